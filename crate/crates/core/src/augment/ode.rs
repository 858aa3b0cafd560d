use crate::error::{Error, Result};

/// Lotka-Volterra coefficients and integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for LvParams {
    fn default() -> Self {
        Self { alpha: 2.0 / 3.0, beta: 4.0 / 3.0, gamma: -1.0, delta: -1.0, horizon: 1.0, step: 0.01 }
    }
}

impl LvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidInput(format!("step {} must be positive", self.step)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon {} must be nonnegative", self.horizon)));
        }
        Ok(())
    }

    fn field(&self, x: f64, y: f64) -> (f64, f64) {
        (self.alpha * x - self.beta * x * y, self.delta * x * y - self.gamma * y)
    }
}

const BLOWUP: f64 = 1e12;

/// Integrates `x' = alpha x - beta x y`, `y' = delta x y - gamma y` with classical RK4.
///
/// The horizon is split into `ceil(T / h)` equal steps, so the step actually
/// used is at most `h`.
pub fn lv_flow(x0: f64, y0: f64, params: &LvParams) -> Result<(f64, f64)> {
    params.validate()?;
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::InvalidInput("initial point must be finite".into()));
    }
    if params.horizon == 0.0 {
        return Ok((x0, y0));
    }
    let steps = (params.horizon / params.step - 1e-9).ceil().max(1.0) as usize;
    let h = params.horizon / steps as f64;
    let (mut x, mut y) = (x0, y0);
    for _ in 0..steps {
        let (k1x, k1y) = params.field(x, y);
        let (k2x, k2y) = params.field(x + 0.5 * h * k1x, y + 0.5 * h * k1y);
        let (k3x, k3y) = params.field(x + 0.5 * h * k2x, y + 0.5 * h * k2y);
        let (k4x, k4y) = params.field(x + h * k3x, y + h * k3y);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        let worst = if x.abs() >= y.abs() { x } else { y };
        if !(worst.abs() <= BLOWUP) {
            return Err(Error::Overflow(worst));
        }
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_fixed() {
        for t in [0.0, 1.0, 5.0] {
            let p = LvParams { horizon: t, ..Default::default() };
            assert_eq!(lv_flow(0.0, 0.0, &p).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn decoupled_closed_form() {
        let p = LvParams { beta: 0.0, delta: 0.0, ..Default::default() };
        let (x, y) = lv_flow(1.0, 1.0, &p).unwrap();
        assert!((x - (2.0f64 / 3.0).exp()).abs() < 1e-6);
        assert!((y - 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn fourth_order_convergence() {
        let base = LvParams { beta: 0.0, delta: 0.0, step: 0.1, ..Default::default() };
        let err = |h: f64| {
            let (x, y) = lv_flow(1.0, 1.0, &LvParams { step: h, ..base }).unwrap();
            (x - (2.0f64 / 3.0).exp()).abs().max((y - 1f64.exp()).abs())
        };
        assert!(err(0.1) / err(0.05) >= 12.0);

        let coarse = lv_flow(1.0, 1.0, &LvParams { step: 0.001, ..Default::default() }).unwrap();
        let fine = lv_flow(1.0, 1.0, &LvParams { step: 0.0005, ..Default::default() }).unwrap();
        assert!((coarse.0 - fine.0).abs() < 1e-7 && (coarse.1 - fine.1).abs() < 1e-7);
    }

    #[test]
    fn blowup_is_reported() {
        let p = LvParams { alpha: 50.0, beta: 0.0, horizon: 1.0, ..Default::default() };
        assert!(matches!(lv_flow(1.0, 0.0, &p), Err(Error::Overflow(_))));
        assert!(lv_flow(0.0, 0.0, &LvParams { step: 0.0, ..Default::default() }).is_err());
    }
}
