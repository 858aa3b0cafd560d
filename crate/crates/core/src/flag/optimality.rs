//! First-order optimality of the Flag objective on the Stiefel manifold.
//!
//! Stationarity reads `grad + 2 Y Gamma = 0` with symmetric multipliers
//! `Gamma = -1/2 sym(Y^T grad)`. At such a point the aggregation `Y Y^T G`
//! can be rewritten as a right-multiplication of `G` by a p x p selection
//! matrix plus a regularizer correction.

use crate::error::Result;
use crate::linalg::{sym_eig, Matrix, Subspace};

use super::objective::{check_dims, Problem};
use super::{FlagConfig, GradientMatrix};

fn sym_part(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// `||grad + 2 Y Gamma||_F / max(1, ||grad||_F)` with `Gamma = -1/2 sym(Y^T grad)`.
pub fn kkt_residual(y: &Subspace, g: &GradientMatrix, cfg: &FlagConfig) -> Result<f64> {
    cfg.validate()?;
    check_dims(y, g)?;
    let problem = Problem::new(g, cfg)?;
    let yb = y.basis();
    let grad = problem.gradient(yb);
    let gamma = sym_part(&yb.tr_mul(&grad)).scaled(-0.5);
    let resid = grad.add(&yb.mul(&gamma).scaled(2.0));
    Ok(resid.frobenius_norm() / grad.frobenius_norm().max(1.0))
}

/// Output of [`selection_matrix`].
#[derive(Debug, Clone)]
pub struct SelectionDiagnostic {
    /// `S_FA = S' M`, p x p.
    pub selection: Matrix,
    /// `M = Gamma^+ Gamma^+ (Y^T G D G^T + lambda grad R^T) G`, m x p.
    pub multiplier_map: Matrix,
    pub gamma: Matrix,
    /// `||Y Y^T G - (G S_FA + lambda grad R M) / 4||_F / ||G||_F`.
    pub reconstruction_residual: f64,
    pub gamma_min_singular: f64,
    /// Set when Gamma's smallest singular value is below 1e-10; the pseudo-inverse was used.
    pub singular_multipliers: bool,
    pub kkt_residual: f64,
}

/// Flag selection matrix at an (approximately) stationary subspace.
pub fn selection_matrix(y: &Subspace, g: &GradientMatrix, cfg: &FlagConfig) -> Result<SelectionDiagnostic> {
    cfg.validate()?;
    check_dims(y, g)?;
    let problem = Problem::new(g, cfg)?;
    let yb = y.basis();
    let gm = g.matrix();
    let p = g.p();

    // signed diagonal D with G D G^T Y equal to the data-term gradient
    let coeffs = problem.data_gradient_coeffs(yb);
    let mut d = vec![0.0; p];
    for (&i, c) in problem.active.iter().zip(coeffs) {
        d[i] = c / (problem.norms[i] * problem.norms[i]);
    }
    let gty = gm.tr_mul(yb);
    let s_prime = Matrix::from_fn(p, yb.cols(), |i, j| d[i] * gty[(i, j)]);
    let data_grad = gm.mul(&s_prime);
    let reg_grad = if cfg.lambda > 0.0 {
        problem.regularizer_gradient(yb).scaled(cfg.lambda)
    } else {
        Matrix::zeros(yb.rows(), yb.cols())
    };
    let grad = data_grad.add(&reg_grad);
    let gamma = sym_part(&yb.tr_mul(&grad)).scaled(-0.5);
    let kkt = grad.add(&yb.mul(&gamma).scaled(2.0)).frobenius_norm() / grad.frobenius_norm().max(1.0);

    let eig = sym_eig(&gamma)?;
    let smax = eig.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let smin = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let cutoff = 1e-10 * smax;
    let inv: Vec<f64> = eig.values.iter().map(|&l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }).collect();
    // Gamma^+ Gamma^+ = V diag(1/l^2) V^T
    let v = &eig.vectors;
    let scaled = Matrix::from_fn(v.rows(), v.cols(), |i, j| v[(i, j)] * inv[j] * inv[j]);
    let gamma_pinv_sq = scaled.mul(&v.transpose());
    let multiplier_map = gamma_pinv_sq.mul(&grad.tr_mul(gm));
    let selection = s_prime.mul(&multiplier_map);

    let lhs = yb.mul(&yb.tr_mul(gm));
    let rhs = gm.mul(&selection).add(&reg_grad.mul(&multiplier_map)).scaled(0.25);
    let reconstruction_residual = lhs.sub(&rhs).frobenius_norm() / gm.frobenius_norm();

    Ok(SelectionDiagnostic {
        selection,
        multiplier_map,
        gamma,
        reconstruction_residual,
        gamma_min_singular: smin,
        singular_multipliers: smin < 1e-10,
        kkt_residual: kkt,
    })
}
