use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix, Subspace};

use super::{FlagConfig, GradientMatrix, Regularizer};

const DEFAULT_GUARD: f64 = 1e-12;

/// `||Y^T g||^2 / ||g||^2`, clamped to [0, 1].
pub fn explained_variance(y: &Subspace, g: &[f64]) -> Result<f64> {
    if g.len() != y.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "gradient of length {} against R^{}",
            g.len(),
            y.ambient_dim()
        )));
    }
    let gn = norm(g);
    if gn <= DEFAULT_GUARD {
        return Err(Error::ZeroGradient(0));
    }
    Ok(unit_variance(y.basis(), g, gn))
}

fn unit_variance(y: &Matrix, g: &[f64], gnorm: f64) -> f64 {
    let z = y.tr_mul_vec(g);
    (dot(&z, &z) / (gnorm * gnorm)).clamp(0.0, 1.0)
}

/// Negative Beta log-likelihood of explained variances, normalizer dropped.
pub fn beta_neg_loglik(v: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(Error::InvalidInput("beta shape parameters must be positive".into()));
    }
    let mut total = 0.0;
    for &vi in v {
        if !(0.0..1.0).contains(&vi) {
            return Err(Error::DomainError(format!("explained variance {vi} outside [0, 1)")));
        }
        if vi == 0.0 && alpha != 1.0 {
            return Err(Error::DomainError("log(0) with alpha != 1".into()));
        }
        let a_term = if alpha == 1.0 { 0.0 } else { (alpha - 1.0) * vi.ln() };
        let b_term = if beta == 1.0 { 0.0 } else { (beta - 1.0) * (1.0 - vi).ln() };
        total -= a_term + b_term;
    }
    Ok(total)
}

/// Taylor surrogate `1/2 sum_i (a (1 - v_i)^(1/a) - a)` of the default likelihood.
pub fn taylor_neg_loglik(v: &[f64], a: f64) -> Result<f64> {
    if a <= 1.0 {
        return Err(Error::InvalidInput(format!("taylor constant a = {a} must exceed 1")));
    }
    let mut total = 0.0;
    for &vi in v {
        if !(0.0..=1.0).contains(&vi) {
            return Err(Error::DomainError(format!("explained variance {vi} outside [0, 1]")));
        }
        total += a * (1.0 - vi).powf(1.0 / a) - a;
    }
    Ok(0.5 * total)
}

/// Full objective `sum_i h(v_i) + lambda R(Y)`.
///
/// Columns with norm at most `guard_eps` are absent workers and contribute 0.
pub fn fa_objective(y: &Subspace, g: &GradientMatrix, cfg: &FlagConfig) -> Result<f64> {
    cfg.validate()?;
    check_dims(y, g)?;
    let problem = Problem::new(g, cfg)?;
    Ok(problem.objective(y.basis()))
}

pub fn regularizer_value(y: &Subspace, g: &GradientMatrix, cfg: &FlagConfig) -> Result<f64> {
    check_dims(y, g)?;
    let problem = Problem::with_pairs(g, cfg, true)?;
    Ok(problem.regularizer(y.basis()))
}

/// Euclidean gradient of `R` with respect to `Y` (without the `lambda` factor).
pub fn regularizer_gradient(y: &Subspace, g: &GradientMatrix, cfg: &FlagConfig) -> Result<Matrix> {
    check_dims(y, g)?;
    let problem = Problem::with_pairs(g, cfg, true)?;
    Ok(problem.regularizer_gradient(y.basis()))
}

pub(crate) fn check_dims(y: &Subspace, g: &GradientMatrix) -> Result<()> {
    if y.ambient_dim() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "subspace in R^{} but gradients in R^{}",
            y.ambient_dim(),
            g.n()
        )));
    }
    Ok(())
}

/// Difference direction between two present workers.
#[derive(Debug, Clone)]
pub(crate) struct Pair {
    pub unit: Vec<f64>,
}

/// Normalized data prepared once per solve.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub cfg: FlagConfig,
    pub n: usize,
    pub p: usize,
    /// Indices of present (nonzero) workers.
    pub active: Vec<usize>,
    pub norms: Vec<f64>,
    /// Unit gradients, aligned with `active`.
    pub units: Vec<Vec<f64>>,
    pub pairs: Vec<Pair>,
    /// `1 / (p_active - 1)`.
    pub pair_scale: f64,
}

impl Problem {
    pub fn new(g: &GradientMatrix, cfg: &FlagConfig) -> Result<Self> {
        let want_pairs = cfg.lambda > 0.0;
        Self::with_pairs(g, cfg, want_pairs)
    }

    pub fn with_pairs(g: &GradientMatrix, cfg: &FlagConfig, want_pairs: bool) -> Result<Self> {
        let eps = cfg.guard_eps;
        let active = g.active_columns(eps);
        if active.is_empty() {
            return Err(Error::DegenerateInput);
        }
        let norms: Vec<f64> = (0..g.p()).map(|i| norm(g.column(i))).collect();
        let units: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| g.column(i).iter().map(|x| x / norms[i]).collect())
            .collect();

        let mut pairs = Vec::new();
        if want_pairs && matches!(cfg.regularizer, Regularizer::PairwiseChordal) {
            for (a, &i) in active.iter().enumerate() {
                for &j in &active[a + 1..] {
                    let diff: Vec<f64> =
                        g.column(i).iter().zip(g.column(j)).map(|(x, y)| x - y).collect();
                    let d = norm(&diff);
                    if d > eps {
                        pairs.push(Pair { unit: diff.iter().map(|x| x / d).collect() });
                    }
                }
            }
        }
        let pair_scale = if active.len() > 1 { 1.0 / (active.len() - 1) as f64 } else { 0.0 };
        Ok(Self { cfg: cfg.clone(), n: g.n(), p: g.p(), active, norms, units, pairs, pair_scale })
    }

    pub fn data_variances(&self, y: &Matrix) -> Vec<f64> {
        self.units.iter().map(|u| unit_variance(y, u, 1.0)).collect()
    }

    pub fn pair_variances(&self, y: &Matrix) -> Vec<f64> {
        self.pairs.iter().map(|pr| unit_variance(y, &pr.unit, 1.0)).collect()
    }

    /// Data term `h(v)`; `sqrt(1 - v)` for the default shape.
    pub fn data_term(&self, v: f64) -> f64 {
        if self.cfg.is_sqrt_objective() {
            return (1.0 - v).max(0.0).sqrt();
        }
        let a = self.cfg.taylor_a;
        let (alpha, beta) = self.cfg.beta_shape;
        a * ((1.0 - beta) * (1.0 - v).max(0.0).powf(1.0 / a) - (alpha - 1.0) * v.powf(1.0 / a))
    }

    /// `-h'(v)` with `1 - v` (and `v`) floored at `guard_eps`: the IRLS weight on `v`.
    pub fn data_weight(&self, v: f64) -> f64 {
        let eps = self.cfg.guard_eps;
        let r = (1.0 - v).max(eps);
        if self.cfg.is_sqrt_objective() {
            return 0.5 / r.sqrt();
        }
        let a = self.cfg.taylor_a;
        let (alpha, beta) = self.cfg.beta_shape;
        let e = 1.0 / a - 1.0;
        (1.0 - beta) * r.powf(e) + (alpha - 1.0) * v.max(eps).powf(e)
    }

    pub fn pair_weight(&self, v: f64) -> f64 {
        self.cfg.lambda * self.pair_scale * 0.5 / (1.0 - v).max(self.cfg.guard_eps).sqrt()
    }

    pub fn regularizer(&self, y: &Matrix) -> f64 {
        match self.cfg.regularizer {
            Regularizer::None => 0.0,
            Regularizer::ElementwiseL1 { delta } => {
                y.data().iter().map(|x| (x * x + delta * delta).sqrt()).sum()
            }
            Regularizer::PairwiseChordal => {
                self.pair_scale
                    * self.pair_variances(y).iter().map(|v| (1.0 - v).max(0.0).sqrt()).sum::<f64>()
            }
        }
    }

    pub fn objective(&self, y: &Matrix) -> f64 {
        let data: f64 = self.data_variances(y).iter().map(|&v| self.data_term(v)).sum();
        if self.cfg.lambda == 0.0 {
            data
        } else {
            data + self.cfg.lambda * self.regularizer(y)
        }
    }

    pub fn regularizer_gradient(&self, y: &Matrix) -> Matrix {
        match self.cfg.regularizer {
            Regularizer::None => Matrix::zeros(y.rows(), y.cols()),
            Regularizer::ElementwiseL1 { delta } => Matrix::from_fn(y.rows(), y.cols(), |i, j| {
                let x = y[(i, j)];
                x / (x * x + delta * delta).sqrt()
            }),
            Regularizer::PairwiseChordal => {
                let eps = self.cfg.guard_eps;
                let coeffs: Vec<f64> = self
                    .pair_variances(y)
                    .iter()
                    .map(|v| -self.pair_scale / (1.0 - v).max(eps).sqrt())
                    .collect();
                rank_one_sum(y, self.pairs.iter().map(|p| p.unit.as_slice()), &coeffs)
            }
        }
    }

    /// Signed data coefficients `c_i` with `grad_data = sum_i c_i u_i u_i^T Y` (unit `u_i`).
    pub fn data_gradient_coeffs(&self, y: &Matrix) -> Vec<f64> {
        self.data_variances(y).iter().map(|&v| -2.0 * self.data_weight(v)).collect()
    }

    /// Euclidean gradient of the full objective, using guarded weights.
    pub fn gradient(&self, y: &Matrix) -> Matrix {
        let coeffs = self.data_gradient_coeffs(y);
        let mut grad = rank_one_sum(y, self.units.iter().map(Vec::as_slice), &coeffs);
        if self.cfg.lambda > 0.0 {
            grad = grad.add(&self.regularizer_gradient(y).scaled(self.cfg.lambda));
        }
        grad
    }
}

/// `sum_k c_k u_k u_k^T Y`, accumulated in index order.
pub(crate) fn rank_one_sum<'a>(
    y: &Matrix,
    vectors: impl Iterator<Item = &'a [f64]>,
    coeffs: &[f64],
) -> Matrix {
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for (u, &c) in vectors.zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        let z = y.tr_mul_vec(u);
        for (j, zj) in z.iter().enumerate() {
            axpy(c * zj, u, out.col_mut(j));
        }
    }
    out
}
