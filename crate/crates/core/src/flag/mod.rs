//! The Flag Aggregator.
//!
//! Workers' gradients are summarized by an m-dimensional subspace `Y` chosen
//! to maximize a robust likelihood of the per-worker explained variances
//! `v_i = ||Y^T g_i||^2 / ||g_i||^2`. The default objective is
//!
//! ```text
//! A(Y) = sum_i sqrt(1 - v_i) + lambda * R(Y),   Y^T Y = I
//! ```
//!
//! and it is minimized by iteratively reweighted least squares: each step is a
//! weighted PCA (a thin SVD of reweighted, normalized gradient columns). The
//! aggregate is the mean gradient projected onto the learned subspace.

mod irls;
mod objective;
mod optimality;

pub use irls::{fa_aggregate, fa_aggregate_detailed, irls_solve, irls_step, FlagOutput, StepWeights};
pub use objective::{
    beta_neg_loglik, explained_variance, fa_objective, regularizer_gradient, regularizer_value,
    taylor_neg_loglik,
};
pub use optimality::{kkt_residual, selection_matrix, SelectionDiagnostic};

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};

/// Worker gradients stacked as columns of an n x p matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    g: Matrix,
    worker_ids: Vec<usize>,
}

impl GradientMatrix {
    /// Wraps `g` with worker ids `0..p`.
    pub fn new(g: Matrix) -> Result<Self> {
        let ids = (0..g.cols()).collect();
        Self::with_ids(g, ids)
    }

    pub fn with_ids(g: Matrix, worker_ids: Vec<usize>) -> Result<Self> {
        if g.rows() == 0 {
            return Err(Error::InvalidInput("gradients must have n >= 1".into()));
        }
        if g.cols() < 2 {
            return Err(Error::TooFewWorkers(format!("need p >= 2, got {}", g.cols())));
        }
        if worker_ids.len() != g.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} worker ids for {} columns",
                worker_ids.len(),
                g.cols()
            )));
        }
        if let Some(k) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k % g.rows(), col: k / g.rows() });
        }
        Ok(Self { g, worker_ids })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_columns(columns)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.g
    }

    pub fn worker_ids(&self) -> &[usize] {
        &self.worker_ids
    }

    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn p(&self) -> usize {
        self.g.cols()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        self.g.col(i)
    }

    /// Indices of columns whose norm exceeds `eps`.
    pub fn active_columns(&self, eps: f64) -> Vec<usize> {
        (0..self.p()).filter(|&i| norm(self.column(i)) > eps).collect()
    }
}

/// Regularizer `R(Y)` added to the data terms with weight `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    /// Smoothed entrywise l1 norm `sum_ij sqrt(Y_ij^2 + delta^2)`.
    ElementwiseL1 { delta: f64 },
    /// `1/(p-1) sum_{i<j} sqrt(1 - ||Y^T (g_i - g_j)||^2 / ||g_i - g_j||^2)`.
    PairwiseChordal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlagConfig {
    /// Subspace dimension; `None` means `ceil((p + 1) / 2)` (capped by n).
    pub m: Option<usize>,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub max_iters: usize,
    /// Stop once the objective changes by less than this.
    pub tol: f64,
    /// Floor for `1 - v` inside weights and for gradient norms.
    pub guard_eps: f64,
    pub taylor_a: f64,
    /// Beta shape parameters (alpha, beta) of the explained-variance likelihood.
    pub beta_shape: (f64, f64),
}

impl Default for FlagConfig {
    fn default() -> Self {
        Self {
            m: None,
            lambda: 0.0,
            regularizer: Regularizer::PairwiseChordal,
            max_iters: 5,
            tol: 1e-10,
            guard_eps: 1e-12,
            taylor_a: 2.0,
            beta_shape: (1.0, 0.5),
        }
    }
}

impl FlagConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.beta_shape;
        let problems = [
            (self.taylor_a > 1.0, "taylor_a must exceed 1"),
            (self.lambda >= 0.0, "lambda must be nonnegative"),
            (self.tol > 0.0, "tol must be positive"),
            (self.guard_eps > 0.0, "guard_eps must be positive"),
            (a > 0.0 && b > 0.0, "beta shape parameters must be positive"),
            (self.m != Some(0), "m must be at least 1"),
        ];
        for (ok, msg) in problems {
            if !ok {
                return Err(Error::InvalidInput(msg.into()));
            }
        }
        if let Regularizer::ElementwiseL1 { delta } = self.regularizer {
            if delta <= 0.0 {
                return Err(Error::InvalidInput("l1 smoothing delta must be positive".into()));
            }
        }
        Ok(())
    }

    /// `ceil((p + 1) / 2)`.
    pub fn default_m(p: usize) -> usize {
        (p + 2) / 2
    }

    /// Subspace dimension for an n x p problem.
    pub fn resolved_m(&self, n: usize, p: usize) -> Result<usize> {
        match self.m {
            None => Ok(Self::default_m(p).min(n).min(p)),
            Some(m) if m >= 1 && m <= p && m <= n => Ok(m),
            Some(m) => Err(Error::InvalidInput(format!("m = {m} must satisfy 1 <= m <= min(n={n}, p={p})"))),
        }
    }

    /// True for the plain `sqrt(1 - v)` data term.
    pub(crate) fn is_sqrt_objective(&self) -> bool {
        self.taylor_a == 2.0 && self.beta_shape == (1.0, 0.5)
    }
}

/// Per-iteration record of an IRLS run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrlsTrace {
    /// Objective at the initial point followed by one entry per accepted iteration.
    pub objectives: Vec<f64>,
    /// Data-term weights `d_i` used at each iteration (0 for absent workers).
    pub weights: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub converged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_m_is_ceil_half() {
        assert_eq!(FlagConfig::default_m(15), 8);
        assert_eq!(FlagConfig::default_m(8), 5);
        assert_eq!(FlagConfig::default_m(2), 2);
        assert_eq!(FlagConfig::default_m(3), 2);
    }

    #[test]
    fn config_validation() {
        assert!(FlagConfig::default().validate().is_ok());
        let bad = FlagConfig { taylor_a: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FlagConfig { lambda: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FlagConfig { m: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gradient_matrix_requires_two_workers() {
        let g = Matrix::from_columns(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(GradientMatrix::new(g), Err(Error::TooFewWorkers(_))));
    }

    #[test]
    fn resolved_m_caps_default_by_n() {
        let cfg = FlagConfig::default();
        assert_eq!(cfg.resolved_m(2, 15).unwrap(), 2);
        assert_eq!(cfg.resolved_m(50, 15).unwrap(), 8);
        let cfg = FlagConfig { m: Some(4), ..Default::default() };
        assert!(cfg.resolved_m(3, 5).is_err());
    }
}
