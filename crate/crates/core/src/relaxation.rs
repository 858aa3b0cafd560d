//! Convex-relaxation machinery for the Flag objective.
//!
//! With `M_i = I/m - g~_i g~_i^T` each data term is `sqrt(tr(Y^T M_i Y))`,
//! and `tr(Y^T M Y) = vec(Y)^T (I ⊗ M) vec(Y)` lifts the problem to
//! `Z = vec(Y) vec(Y)^T`. Only the factored form in `Y` is ever optimized.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::flag::GradientMatrix;
use crate::linalg::{dot, norm, orthonormalize, sym_eig, Matrix, Subspace};
use crate::rng;

/// `sqrt(y^T (I - g~ g~^T) y)` for a unit vector `y`.
pub fn socp_term_m1(y: &[f64], g: &[f64]) -> Result<f64> {
    if y.len() != g.len() {
        return Err(Error::DimensionMismatch(format!("y has length {}, g has {}", y.len(), g.len())));
    }
    if (norm(y) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("y must be a unit vector, norm is {}", norm(y))));
    }
    let gn = norm(g);
    if gn <= 1e-12 {
        return Err(Error::ZeroGradient(0));
    }
    let c = dot(y, g) / gn;
    Ok((dot(y, y) - c * c).max(0.0).sqrt())
}

fn check_square(m: &Matrix, n: usize) -> Result<()> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::DimensionMismatch(format!("expected {n}x{n}, got {}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

/// `|tr(Y^T M Y) - vec(Y)^T (I ⊗ M) vec(Y)|`.
///
/// The Kronecker product is built explicitly when `n m <= 64`; beyond that the
/// block-diagonal structure is accumulated one column block at a time.
pub fn kron_identity_check(y: &Matrix, m: &Matrix) -> Result<f64> {
    let (n, k) = (y.rows(), y.cols());
    check_square(m, n)?;
    let lhs = y.tr_mul(&m.mul(y)).trace();
    // column-major storage is exactly vec(Y)
    let v = y.data();
    let rhs = if n * k <= 64 {
        let big = Matrix::from_fn(n * k, n * k, |r, c| if r / n == c / n { m[(r % n, c % n)] } else { 0.0 });
        dot(v, &big.mul_vec(v))
    } else {
        (0..k).map(|j| dot(y.col(j), &m.mul_vec(y.col(j)))).sum()
    };
    Ok((lhs - rhs).abs())
}

/// Per-worker matrices of the lifted problem.
#[derive(Debug, Clone)]
pub struct LiftedInstance {
    ms: Vec<Matrix>,
    m: usize,
    kappa: f64,
}

impl LiftedInstance {
    /// `kappa = None` picks `|min_i min(lambda_min(M_i), 0)|`.
    pub fn new(ms: Vec<Matrix>, m: usize, kappa: Option<f64>) -> Result<Self> {
        let first = ms.first().ok_or_else(|| Error::InvalidInput("no matrices".into()))?;
        let n = first.rows();
        if m == 0 || m > n {
            return Err(Error::InvalidInput(format!("trace budget m = {m} must be in 1..={n}")));
        }
        let mut lam_min = 0.0_f64;
        for mat in &ms {
            check_square(mat, n)?;
            let asym = mat.max_abs_asymmetry();
            if asym > 1e-12 {
                return Err(Error::NonSymmetric(asym));
            }
            let eig = sym_eig(mat)?;
            lam_min = lam_min.min(eig.values.iter().copied().fold(f64::INFINITY, f64::min));
        }
        let kappa = match kappa {
            Some(k) if k >= 0.0 && k.is_finite() => k,
            Some(k) => return Err(Error::InvalidInput(format!("kappa {k} must be nonnegative"))),
            None => lam_min.min(0.0).abs(),
        };
        Ok(Self { ms, m, kappa })
    }

    /// `M_i = I/m - g~_i g~_i^T` over the nonzero columns of `g`.
    pub fn from_gradients(g: &GradientMatrix, m: usize, kappa: Option<f64>) -> Result<Self> {
        let n = g.n();
        let active = g.active_columns(1e-12);
        if active.is_empty() {
            return Err(Error::DegenerateInput);
        }
        let ms = active
            .iter()
            .map(|&i| {
                let c = g.column(i);
                let s = 1.0 / dot(c, c);
                let diag = 1.0 / m as f64;
                Matrix::from_fn(n, n, |r, q| if r == q { diag } else { 0.0 } - s * c[r] * c[q])
            })
            .collect();
        Self::new(ms, m, kappa)
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.ms
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n(&self) -> usize {
        self.ms[0].rows()
    }

    fn traces(&self, y: &Matrix) -> Vec<f64> {
        self.ms.iter().map(|mat| y.tr_mul(&mat.mul(y)).trace()).collect()
    }

    fn value(&self, y: &Matrix) -> f64 {
        self.traces(y).iter().map(|&t| (t + self.kappa).max(0.0).sqrt()).sum()
    }

    /// `sum_i M_i Y / sqrt(tr(Y^T M_i Y) + kappa)`; terms whose argument is clipped at 0 contribute 0.
    fn gradient(&self, y: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(y.rows(), y.cols());
        for (mat, t) in self.ms.iter().zip(self.traces(y)) {
            if t + self.kappa > 0.0 {
                out = out.add(&mat.mul(y).scaled(1.0 / (t + self.kappa).sqrt()));
            }
        }
        out
    }

    fn check_y(&self, y: &Matrix) -> Result<()> {
        if y.rows() != self.n() {
            return Err(Error::DimensionMismatch(format!("Y has {} rows, instance is in R^{}", y.rows(), self.n())));
        }
        Ok(())
    }
}

/// `sum_i sqrt(max(tr(Y^T M_i Y) + kappa, 0))`.
pub fn lifted_objective(y: &Subspace, inst: &LiftedInstance) -> Result<f64> {
    inst.check_y(y.basis())?;
    Ok(inst.value(y.basis()))
}

/// Euclidean gradient of the lifted objective at an arbitrary `Y`.
pub fn lifted_gradient(y: &Matrix, inst: &LiftedInstance) -> Result<Matrix> {
    inst.check_y(y)?;
    Ok(inst.gradient(y))
}

/// Projected gradient descent on `Y^T Y = I` with a QR retraction.
///
/// The step is halved whenever it would raise the objective and regrows
/// (up to `step`) after each accepted move. Returns the best iterate and the
/// objective trace, starting at the seeded random initial point.
pub fn factored_pgd(
    inst: &LiftedInstance,
    m: usize,
    step: f64,
    iters: usize,
    seed: u64,
) -> Result<(Subspace, Vec<f64>)> {
    const FLOOR: f64 = 1e-8;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step {step} must be positive")));
    }
    let n = inst.n();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("m = {m} must be in 1..={n}")));
    }
    let mut r = rng::stream(seed, &[]);
    let mut y = orthonormalize(&Matrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut r)))?;
    let mut obj = inst.value(y.basis());
    let mut trace = vec![obj];
    let mut t = step;
    for it in 0..iters {
        let grad = inst.gradient(y.basis());
        let mut moved = false;
        while t >= FLOOR {
            if let Ok(cand) = orthonormalize(&y.basis().sub(&grad.scaled(t))) {
                let val = inst.value(cand.basis());
                if val <= obj {
                    let gain = obj - val;
                    y = cand;
                    obj = val;
                    trace.push(obj);
                    moved = gain > 0.0;
                    t = (2.0 * t).min(step);
                    break;
                }
            }
            t *= 0.5;
        }
        if t < FLOOR {
            if it == 0 {
                return Err(Error::StepTooSmall(t));
            }
            break;
        }
        if !moved {
            break;
        }
    }
    Ok((y, trace))
}

/// `M / sum_j |lambda_j(M)|`.
pub fn nuclear_normalize(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", m.rows(), m.cols())));
    }
    let eig = sym_eig(m)?;
    let nuclear: f64 = eig.values.iter().map(|v| v.abs()).sum();
    if nuclear <= f64::MIN_POSITIVE {
        return Err(Error::ZeroMatrix);
    }
    let out = m.scaled(1.0 / nuclear);
    // every eigenvalue of the output is at most 1 in magnitude, so I - out is PSD
    debug_assert!(eig.values.iter().all(|v| 1.0 - v / nuclear >= -1e-10));
    Ok(out)
}

/// Max entrywise gap between the analytic gradient and central differences
/// with step `h`, relative to the analytic gradient's largest entry.
pub fn gradient_fd_check(inst: &LiftedInstance, y: &Matrix, h: f64) -> Result<f64> {
    inst.check_y(y)?;
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step {h} must be positive")));
    }
    let floor = inst.traces(y).iter().map(|&t| t + inst.kappa).fold(f64::INFINITY, f64::min);
    if floor < 1e-6 {
        return Err(Error::InvalidInput(format!("term argument {floor:e} below 1e-6; raise kappa")));
    }
    let analytic = inst.gradient(y);
    let scale = analytic.data().iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    let mut probe = y.clone();
    for k in 0..y.data().len() {
        let (r, c) = (k % y.rows(), k / y.rows());
        let base = y[(r, c)];
        probe.col_mut(c)[r] = base + h;
        let up = inst.value(&probe);
        probe.col_mut(c)[r] = base - h;
        let down = inst.value(&probe);
        probe.col_mut(c)[r] = base;
        worst = worst.max(((up - down) / (2.0 * h) - analytic[(r, c)]).abs());
    }
    Ok(worst / scale)
}

/// Minimum of `sum_i sqrt(1 - (y . g~_i)^2)` over a latitude/longitude grid on the unit 2-sphere.
///
/// Returns the minimum and the grid point attaining it.
pub fn sphere_sweep_min(g: &GradientMatrix, resolution_deg: f64) -> Result<(f64, [f64; 3])> {
    if g.n() != 3 {
        return Err(Error::InvalidInput(format!("sphere sweep needs n = 3, got {}", g.n())));
    }
    if !(resolution_deg > 0.0) {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    let units: Vec<[f64; 3]> = g
        .active_columns(1e-12)
        .iter()
        .map(|&i| {
            let c = g.column(i);
            let s = norm(c);
            [c[0] / s, c[1] / s, c[2] / s]
        })
        .collect();
    let steps_theta = (180.0 / resolution_deg).round() as usize;
    let steps_phi = (360.0 / resolution_deg).round() as usize;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for a in 0..=steps_theta {
        let theta = (a as f64 * resolution_deg).to_radians();
        for b in 0..steps_phi {
            let phi = (b as f64 * resolution_deg).to_radians();
            let y = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let val: f64 = units
                .iter()
                .map(|u| {
                    let c = y[0] * u[0] + y[1] * u[1] + y[2] * u[2];
                    (1.0 - c * c).max(0.0).sqrt()
                })
                .sum();
            if val < best.0 {
                best = (val, y);
            }
            if a == 0 || a == steps_theta {
                break;
            }
        }
    }
    Ok(best)
}

/// Bound on the gap between the grid minimum and the true minimum: every term
/// is 1-Lipschitz in arc length and no point is farther than one grid step
/// from the grid, so `p * resolution` (in radians) suffices.
pub fn sphere_sweep_tolerance(p: usize, resolution_deg: f64) -> f64 {
    p as f64 * resolution_deg.to_radians()
}
