//! Classical robust aggregation rules.
//!
//! Every rule takes an n x p matrix whose columns are worker gradients and
//! returns one n-vector. Coordinate-wise rules break ties by value and then by
//! worker index, so outputs do not depend on column order.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::flag::{fa_aggregate_detailed, FlagConfig, GradientMatrix};
use crate::linalg::{axpy, norm, thin_svd_left, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum AggregatorKind {
    Mean,
    Median,
    TrimmedMean,
    MeaMed,
    Phocas,
    /// `m = None` selects `p - f - 2` workers.
    MultiKrum { m: Option<usize> },
    Bulyan,
    /// `m = None` uses `ceil((p + 1) / 2)`.
    PcaBaseline { m: Option<usize> },
    Flag(FlagConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatorSpec {
    pub kind: AggregatorKind,
    /// Assumed number of Byzantine workers.
    pub f: usize,
}

/// Aggregate plus the IRLS iteration count (0 for non-iterative rules).
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub vector: Vec<f64>,
    pub irls_iters: usize,
}

impl AggregatorSpec {
    pub fn new(kind: AggregatorKind, f: usize) -> Self {
        Self { kind, f }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            AggregatorKind::Mean => "mean",
            AggregatorKind::Median => "median",
            AggregatorKind::TrimmedMean => "trimmed-mean",
            AggregatorKind::MeaMed => "meamed",
            AggregatorKind::Phocas => "phocas",
            AggregatorKind::MultiKrum { .. } => "multi-krum",
            AggregatorKind::Bulyan => "bulyan",
            AggregatorKind::PcaBaseline { .. } => "pca",
            AggregatorKind::Flag(_) => "flag",
        }
    }

    /// Whether the rule is defined for p workers sending n-vectors, checked
    /// before any gradient exists.
    pub fn check_shape(&self, n: usize, p: usize) -> Result<()> {
        let f = self.f;
        let (ok, need) = match &self.kind {
            AggregatorKind::Mean | AggregatorKind::Median => (p >= 1, "p >= 1".to_string()),
            AggregatorKind::TrimmedMean | AggregatorKind::Phocas => (p > 2 * f, "p > 2f".into()),
            AggregatorKind::MeaMed => (p > f, "p > f".into()),
            AggregatorKind::MultiKrum { m } => {
                let m_ok = m.is_none_or(|m| m >= 1 && m <= p);
                (p >= 2 * f + 3 && m_ok, "p >= 2f + 3 and 1 <= m <= p".into())
            }
            AggregatorKind::Bulyan => (p >= 4 * f + 3, "p >= 4f + 3".into()),
            AggregatorKind::PcaBaseline { m } => {
                (p >= 1 && m.is_none_or(|m| m >= 1 && m <= p.min(n)), "1 <= m <= min(n, p)".into())
            }
            AggregatorKind::Flag(cfg) => {
                cfg.validate()?;
                if p < 2 {
                    return Err(Error::TooFewWorkers("flag needs at least two workers".into()));
                }
                cfg.resolved_m(n, p)?;
                (true, String::new())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::TooFewWorkers(format!("{} needs {need}, got p={p} f={f}", self.name())))
        }
    }

    pub fn aggregate(&self, g: &Matrix) -> Result<Vec<f64>> {
        Ok(self.aggregate_detailed(g)?.vector)
    }

    pub fn aggregate_detailed(&self, g: &Matrix) -> Result<Aggregated> {
        let f = self.f;
        let vector = match &self.kind {
            AggregatorKind::Mean => mean(g)?,
            AggregatorKind::Median => coordinate_median(g)?,
            AggregatorKind::TrimmedMean => trimmed_mean(g, f)?,
            AggregatorKind::MeaMed => meamed(g, f)?,
            AggregatorKind::Phocas => phocas(g, f)?,
            AggregatorKind::MultiKrum { m } => {
                let m = m.unwrap_or_else(|| g.cols().saturating_sub(f + 2).max(1));
                multi_krum(g, f, m)?
            }
            AggregatorKind::Bulyan => bulyan(g, f)?,
            AggregatorKind::PcaBaseline { m } => {
                let m = m.unwrap_or_else(|| FlagConfig::default_m(g.cols()).min(g.cols()).min(g.rows()));
                pca_baseline(&canonical_order(g), m)?
            }
            AggregatorKind::Flag(cfg) => {
                let out = fa_aggregate_detailed(&GradientMatrix::new(canonical_order(g))?, cfg)?;
                return Ok(Aggregated { vector: out.aggregate, irls_iters: out.trace.iterations_run });
            }
        };
        Ok(Aggregated { vector, irls_iters: 0 })
    }
}

/// Columns sorted lexicographically. The subspace rules are order-free only
/// in exact arithmetic; IRLS stopping and step rejection can flip on a
/// rounding difference, so they always see the same column order.
fn canonical_order(g: &Matrix) -> Matrix {
    let mut idx: Vec<usize> = (0..g.cols()).collect();
    idx.sort_by(|&a, &b| {
        g.col(a).iter().zip(g.col(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    });
    g.select_columns(&idx)
}

fn need_workers(g: &Matrix) -> Result<()> {
    if g.cols() == 0 {
        return Err(Error::TooFewWorkers("no gradients to aggregate".into()));
    }
    Ok(())
}

fn row(g: &Matrix, r: usize) -> Vec<f64> {
    (0..g.cols()).map(|j| g[(r, j)]).collect()
}

/// Indices ordered by (value, index).
fn order_by_value(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    idx
}

fn median_of(xs: &[f64]) -> f64 {
    let idx = order_by_value(xs);
    let k = xs.len();
    if k % 2 == 1 {
        xs[idx[k / 2]]
    } else {
        0.5 * (xs[idx[k / 2 - 1]] + xs[idx[k / 2]])
    }
}

fn trimmed_of(xs: &[f64], f: usize) -> f64 {
    let idx = order_by_value(xs);
    let kept = &idx[f..xs.len() - f];
    kept.iter().map(|&i| xs[i]).sum::<f64>() / kept.len() as f64
}

/// Mean of the `k` values closest to `center`, ties by (value, index).
fn closest_mean(xs: &[f64], center: f64, k: usize) -> f64 {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| {
        let da = (xs[a] - center).abs();
        let db = (xs[b] - center).abs();
        da.total_cmp(&db).then(xs[a].total_cmp(&xs[b])).then(a.cmp(&b))
    });
    idx[..k].iter().map(|&i| xs[i]).sum::<f64>() / k as f64
}

fn per_coordinate(g: &Matrix, rule: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..g.rows()).map(|r| rule(&row(g, r))).collect()
}

pub fn mean(g: &Matrix) -> Result<Vec<f64>> {
    need_workers(g)?;
    let mut sum = vec![0.0; g.rows()];
    for c in g.columns() {
        axpy(1.0, c, &mut sum);
    }
    let p = g.cols() as f64;
    Ok(sum.into_iter().map(|x| x / p).collect())
}

/// Per-coordinate median; the midpoint of the two middle values for even p.
pub fn coordinate_median(g: &Matrix) -> Result<Vec<f64>> {
    need_workers(g)?;
    Ok(per_coordinate(g, median_of))
}

/// Drops the f smallest and f largest values per coordinate and averages the rest.
pub fn trimmed_mean(g: &Matrix, f: usize) -> Result<Vec<f64>> {
    if g.cols() <= 2 * f {
        return Err(Error::TooFewWorkers(format!("trimmed mean needs p > 2f, got p={} f={f}", g.cols())));
    }
    Ok(per_coordinate(g, |xs| trimmed_of(xs, f)))
}

/// Mean of the p - f values closest to the coordinate median.
pub fn meamed(g: &Matrix, f: usize) -> Result<Vec<f64>> {
    if g.cols() <= f {
        return Err(Error::TooFewWorkers(format!("meamed needs p > f, got p={} f={f}", g.cols())));
    }
    let k = g.cols() - f;
    Ok(per_coordinate(g, |xs| closest_mean(xs, median_of(xs), k)))
}

/// Mean of the p - f values closest to the coordinate trimmed mean.
pub fn phocas(g: &Matrix, f: usize) -> Result<Vec<f64>> {
    if g.cols() <= 2 * f {
        return Err(Error::TooFewWorkers(format!("phocas needs p > 2f, got p={} f={f}", g.cols())));
    }
    let k = g.cols() - f;
    Ok(per_coordinate(g, |xs| closest_mean(xs, trimmed_of(xs, f), k)))
}

fn squared_distances(g: &Matrix) -> Vec<Vec<f64>> {
    let p = g.cols();
    let mut d = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            let s: f64 = g.col(i).iter().zip(g.col(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i][j] = s;
            d[j][i] = s;
        }
    }
    d
}

/// Krum scores of the workers in `set`: sum of squared distances to the
/// `neighbors` closest other members.
fn krum_scores(dist: &[Vec<f64>], set: &[usize], neighbors: usize) -> Vec<f64> {
    set.iter()
        .map(|&i| {
            let mut ds: Vec<f64> = set.iter().filter(|&&j| j != i).map(|&j| dist[i][j]).collect();
            ds.sort_by(f64::total_cmp);
            ds[..neighbors.min(ds.len())].iter().sum()
        })
        .collect()
}

/// Positions in `set` ordered by (score, worker index).
fn rank_by_score(set: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| match scores[a].total_cmp(&scores[b]) {
        Ordering::Equal => set[a].cmp(&set[b]),
        o => o,
    });
    order
}

/// Mean of the m workers with the lowest Krum score (p - f - 2 neighbors).
pub fn multi_krum(g: &Matrix, f: usize, m: usize) -> Result<Vec<f64>> {
    let p = g.cols();
    if p < 2 * f + 3 {
        return Err(Error::TooFewWorkers(format!("multi-krum needs p >= 2f + 3, got p={p} f={f}")));
    }
    if m == 0 || m > p {
        return Err(Error::InvalidInput(format!("multi-krum m = {m} must be in 1..={p}")));
    }
    let dist = squared_distances(g);
    let set: Vec<usize> = (0..p).collect();
    let scores = krum_scores(&dist, &set, p - f - 2);
    let chosen: Vec<usize> = rank_by_score(&set, &scores)[..m].iter().map(|&k| set[k]).collect();
    mean(&g.select_columns(&chosen))
}

/// Krum-selected set of size p - 2f followed by a coordinate-wise mean around the median.
pub fn bulyan(g: &Matrix, f: usize) -> Result<Vec<f64>> {
    let p = g.cols();
    if p < 4 * f + 3 {
        return Err(Error::TooFewWorkers(format!("bulyan needs p >= 4f + 3, got p={p} f={f}")));
    }
    let theta = p - 2 * f;
    let beta = theta - 2 * f;
    let dist = squared_distances(g);
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut selected = Vec::with_capacity(theta);
    while selected.len() < theta {
        let r = remaining.len();
        // the Krum neighbor count shrinks with the pool; keep at least one
        let neighbors = r.saturating_sub(f + 2).max(1).min(r - 1);
        let scores = krum_scores(&dist, &remaining, neighbors);
        let best = rank_by_score(&remaining, &scores)[0];
        selected.push(remaining.remove(best));
    }
    selected.sort_unstable();
    let s = g.select_columns(&selected);
    Ok(per_coordinate(&s, |xs| closest_mean(xs, median_of(xs), beta)))
}

/// `(1/p) Y Y^T G 1` with Y the top-m left singular subspace of the column-normalized G.
pub fn pca_baseline(g: &Matrix, m: usize) -> Result<Vec<f64>> {
    need_workers(g)?;
    let p = g.cols();
    if m == 0 || m > p || m > g.rows() {
        return Err(Error::InvalidInput(format!("pca m = {m} must be in 1..=min(n, p)")));
    }
    let normalized: Vec<Vec<f64>> = g
        .columns()
        .map(|c| {
            let s = norm(c);
            if s > 1e-12 {
                c.iter().map(|x| x / s).collect()
            } else {
                vec![0.0; c.len()]
            }
        })
        .collect();
    let y = thin_svd_left(&Matrix::from_columns(&normalized)?, m)?.subspace;
    Ok(y.project(&mean(g)?))
}
