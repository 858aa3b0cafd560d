use crate::error::{Error, Result};
use crate::linalg::{axpy, orthonormalize, thin_svd_left, Matrix, Subspace};

use super::objective::{check_dims, Problem};
use super::{FlagConfig, GradientMatrix, IrlsTrace, Regularizer};

/// Weights for one weighted-PCA step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWeights {
    /// Weight per worker (length p); zero drops the worker from the step.
    pub data: Vec<f64>,
    /// Weights for the pairwise difference directions, in `i < j` order over present workers.
    pub pairs: Vec<f64>,
}

impl StepWeights {
    /// Equal weight on every worker, no pairwise columns.
    pub fn uniform(p: usize) -> Self {
        Self { data: vec![1.0; p], pairs: Vec::new() }
    }
}

/// The result of a full aggregation: output vector, subspace and solver trace.
#[derive(Debug, Clone)]
pub struct FlagOutput {
    pub aggregate: Vec<f64>,
    pub subspace: Subspace,
    pub trace: IrlsTrace,
}

/// One weighted-PCA step: top-m left singular subspace of `[sqrt(w_i) g_i/||g_i|| | sqrt(w_ij) u_ij]`.
///
/// Zero-norm workers and zero weights are skipped.
pub fn irls_step(g: &GradientMatrix, weights: &StepWeights, m: usize, guard_eps: f64) -> Result<Subspace> {
    let cfg = FlagConfig { guard_eps, lambda: if weights.pairs.is_empty() { 0.0 } else { 1.0 }, ..Default::default() };
    let problem = Problem::new(g, &cfg)?;
    if weights.data.len() != g.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} data weights for {} workers",
            weights.data.len(),
            g.p()
        )));
    }
    weighted_pca(&problem, weights, m)
}

fn weighted_pca(problem: &Problem, weights: &StepWeights, m: usize) -> Result<Subspace> {
    if !weights.pairs.is_empty() && weights.pairs.len() != problem.pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} pair weights for {} pairs",
            weights.pairs.len(),
            problem.pairs.len()
        )));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (k, &i) in problem.active.iter().enumerate() {
        let w = weights.data[i];
        if w > 0.0 {
            let s = w.sqrt();
            columns.push(problem.units[k].iter().map(|x| s * x).collect());
        }
    }
    for (pair, &w) in problem.pairs.iter().zip(&weights.pairs) {
        if w > 0.0 {
            let s = w.sqrt();
            columns.push(pair.unit.iter().map(|x| s * x).collect());
        }
    }
    // pad so the SVD is defined; the completion step supplies the missing directions
    while columns.len() < m {
        columns.push(vec![0.0; problem.n]);
    }
    Ok(thin_svd_left(&Matrix::from_columns(&columns)?, m)?.subspace)
}

fn weights_at(problem: &Problem, y: &Matrix) -> StepWeights {
    let mut data = vec![0.0; problem.p];
    for (&i, v) in problem.active.iter().zip(problem.data_variances(y)) {
        data[i] = problem.data_weight(v).max(0.0);
    }
    let pairs = if problem.cfg.lambda > 0.0 {
        problem.pair_variances(y).into_iter().map(|v| problem.pair_weight(v)).collect()
    } else {
        Vec::new()
    };
    StepWeights { data, pairs }
}

const POLISH_STEPS: usize = 50;

/// Projected gradient step on the Stiefel manifold with backtracking.
///
/// Returns the new point only if it strictly lowers the objective.
fn descent_step(problem: &Problem, y: &Subspace, current: f64) -> Option<(Subspace, f64)> {
    descent_step_from(problem, y, current, 0.1).map(|(s, v, _)| (s, v))
}

/// As [`descent_step`], starting the backtracking at `t0 / ||riem grad||`; also returns the accepted `t`.
fn descent_step_from(problem: &Problem, y: &Subspace, current: f64, t0: f64) -> Option<(Subspace, f64, f64)> {
    let yb = y.basis();
    let grad = problem.gradient(yb);
    let sym = {
        let a = yb.tr_mul(&grad);
        Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    };
    let riem = grad.sub(&yb.mul(&sym));
    let gnorm = riem.frobenius_norm();
    if gnorm == 0.0 || !gnorm.is_finite() {
        return None;
    }
    let mut t = t0;
    for _ in 0..40 {
        if let Ok(cand) = orthonormalize(&yb.sub(&riem.scaled(t / gnorm))) {
            let val = problem.objective(cand.basis());
            if val < current {
                return Some((cand, val, t));
            }
        }
        t *= 0.5;
    }
    None
}

/// Iteratively reweighted least squares for the Flag objective.
///
/// Each iteration freezes the weights at the current subspace and solves the
/// resulting weighted PCA in closed form. Steps that would raise the objective
/// (possible only through the `guard_eps` floor or a non-default shape) are
/// rejected and the solver stops, so the recorded trace is nonincreasing.
pub fn irls_solve(
    g: &GradientMatrix,
    cfg: &FlagConfig,
    init: Option<&Subspace>,
) -> Result<(Subspace, IrlsTrace)> {
    cfg.validate()?;
    let problem = Problem::new(g, cfg)?;
    let m = cfg.resolved_m(g.n(), g.p())?;

    let mut y = match init {
        Some(s) => {
            check_dims(s, g)?;
            if s.dim() != m {
                return Err(Error::DimensionMismatch(format!(
                    "initial subspace has dimension {}, expected {m}",
                    s.dim()
                )));
            }
            s.clone()
        }
        None => weighted_pca(&problem, &StepWeights::uniform(g.p()), m)?,
    };
    let smooth_l1 = matches!(cfg.regularizer, Regularizer::ElementwiseL1 { .. }) && cfg.lambda > 0.0;

    let mut obj = problem.objective(y.basis());
    let mut trace = IrlsTrace { objectives: vec![obj], ..Default::default() };
    let slack = 1e-12 * obj.abs().max(1.0);

    for _ in 0..cfg.max_iters {
        let weights = weights_at(&problem, y.basis());
        let mut cand = weighted_pca(&problem, &weights, m)?;
        let mut cand_obj = problem.objective(cand.basis());
        if smooth_l1 {
            // the closed-form step ignores the l1 term; polish against the full objective
            let mut t = 0.1;
            for _ in 0..POLISH_STEPS {
                let Some((next, val, used)) = descent_step_from(&problem, &cand, cand_obj, t) else {
                    break;
                };
                let gain = cand_obj - val;
                cand = next;
                cand_obj = val;
                t = 2.0 * used;
                if gain < cfg.tol {
                    break;
                }
            }
        }
        if cand_obj > obj + slack {
            match descent_step(&problem, &y, obj) {
                Some((next, val)) => {
                    cand = next;
                    cand_obj = val;
                }
                None => {
                    trace.converged = true;
                    break;
                }
            }
        }
        let change = (obj - cand_obj).abs();
        y = cand;
        obj = cand_obj;
        trace.objectives.push(obj);
        trace.weights.push(weights.data);
        trace.iterations_run += 1;
        if change < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((y, trace))
}

/// `(1/p) Y Y^T G 1` over present workers.
pub fn fa_aggregate(g: &GradientMatrix, cfg: &FlagConfig) -> Result<Vec<f64>> {
    Ok(fa_aggregate_detailed(g, cfg)?.aggregate)
}

pub fn fa_aggregate_detailed(g: &GradientMatrix, cfg: &FlagConfig) -> Result<FlagOutput> {
    let (subspace, trace) = irls_solve(g, cfg, None)?;
    let active = g.active_columns(cfg.guard_eps);
    let mut sum = vec![0.0; g.n()];
    for &i in &active {
        axpy(1.0, g.column(i), &mut sum);
    }
    let scale = 1.0 / active.len() as f64;
    let aggregate = subspace.project(&sum).into_iter().map(|x| x * scale).collect();
    Ok(FlagOutput { aggregate, subspace, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flag::fa_objective;
    use crate::linalg::{dot, norm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn random_g(n: usize, p: usize, seed: u64) -> GradientMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GradientMatrix::new(Matrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))).unwrap()
    }

    #[test]
    fn identical_columns_give_exact_fit() {
        let u = vec![0.0, 0.6, 0.8];
        let g = GradientMatrix::from_columns(&[u.clone(), u.clone(), u.clone()]).unwrap();
        let cfg = FlagConfig { m: Some(1), ..Default::default() };
        let (y, trace) = irls_solve(&g, &cfg, None).unwrap();
        assert!((dot(y.basis().col(0), &u).abs() - 1.0).abs() < 1e-12);
        assert!(trace.objectives[0] < 1e-6);
        assert!(trace.iterations_run <= 1);
        assert!(fa_aggregate(&g, &cfg).unwrap().iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn majority_direction_wins() {
        let g = GradientMatrix::from_columns(&[e(3, 0), e(3, 0), e(3, 1)]).unwrap();
        let cfg = FlagConfig { m: Some(1), lambda: 0.0, max_iters: 50, ..Default::default() };
        let (y, trace) = irls_solve(&g, &cfg, None).unwrap();
        assert!(y.basis()[(0, 0)].abs() > 1.0 - 1e-9);
        assert!((trace.objectives.last().unwrap() - 1.0).abs() < 1e-6);
        let agg = fa_aggregate(&g, &cfg).unwrap();
        assert!((agg[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!(agg[1].abs() < 1e-9 && agg[2].abs() < 1e-9);
    }

    #[test]
    fn trace_is_monotone_with_pairwise_term() {
        let g = random_g(20, 6, 5);
        let cfg = FlagConfig { m: Some(3), lambda: 1.0, max_iters: 30, ..Default::default() };
        let (_, trace) = irls_solve(&g, &cfg, None).unwrap();
        for w in trace.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{:?}", trace.objectives);
        }
    }

    #[test]
    fn elementwise_l1_trace_is_monotone() {
        let g = random_g(12, 5, 9);
        let cfg = FlagConfig {
            m: Some(2),
            lambda: 0.3,
            regularizer: Regularizer::ElementwiseL1 { delta: 0.05 },
            max_iters: 10,
            ..Default::default()
        };
        let (y, trace) = irls_solve(&g, &cfg, None).unwrap();
        for w in trace.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let direct = fa_objective(&y, &g, &cfg).unwrap();
        assert!((direct - trace.objectives.last().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn aggregate_lies_in_subspace() {
        let g = random_g(15, 7, 1);
        let out = fa_aggregate_detailed(&g, &FlagConfig::default()).unwrap();
        let p = out.subspace.project(&out.aggregate);
        let resid: Vec<f64> = out.aggregate.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(norm(&resid) <= 1e-10 * norm(&out.aggregate));
    }

    #[test]
    fn zero_columns_leave_the_denominator() {
        let g = GradientMatrix::from_columns(&[e(2, 0), e(2, 0), vec![0.0, 0.0]]).unwrap();
        let cfg = FlagConfig { m: Some(1), ..Default::default() };
        let agg = fa_aggregate(&g, &cfg).unwrap();
        assert!((agg[0] - 1.0).abs() < 1e-12);
        let z = GradientMatrix::from_columns(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(fa_aggregate(&z, &cfg), Err(Error::DegenerateInput)));
    }

    #[test]
    fn init_dimension_is_checked() {
        let g = random_g(6, 4, 2);
        let init = Subspace::new(Matrix::from_columns(&[e(6, 0)]).unwrap()).unwrap();
        let cfg = FlagConfig { m: Some(2), ..Default::default() };
        assert!(irls_solve(&g, &cfg, Some(&init)).is_err());
    }
}
