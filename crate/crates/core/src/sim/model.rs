use rand_distr::{Distribution, Normal};

use super::data::Split;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Scalar output `w.x + b` with loss `1/2 (w.x + b - t)^2`.
    Linear,
    /// Softmax regression with mean cross-entropy.
    Logistic,
    /// One tanh hidden layer followed by softmax.
    Mlp { hidden: usize },
}

/// Parameter layout and loss for one model family on `dim` features.
///
/// Flat layouts: Linear `[w (dim), b]`; Logistic `[W (C x dim, row-major), b (C)]`;
/// Mlp `[W1 (h x dim), b1 (h), W2 (C x h), b2 (C)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub kind: ModelKind,
    pub dim: usize,
    pub classes: usize,
}

fn softmax_in_place(z: &mut [f64]) {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - top).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl Model {
    pub fn new(kind: ModelKind, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        match kind {
            ModelKind::Linear => {}
            ModelKind::Logistic | ModelKind::Mlp { .. } if classes < 2 => {
                return Err(Error::InvalidInput(format!("classification needs at least 2 classes, got {classes}")))
            }
            ModelKind::Mlp { hidden: 0 } => return Err(Error::InvalidInput("hidden width must be positive".into())),
            _ => {}
        }
        Ok(Self { kind, dim, classes })
    }

    pub fn param_count(&self) -> usize {
        let (d, c) = (self.dim, self.classes);
        match self.kind {
            ModelKind::Linear => d + 1,
            ModelKind::Logistic => c * (d + 1),
            ModelKind::Mlp { hidden: h } => h * (d + 1) + c * (h + 1),
        }
    }

    /// Zeros for the convex models; scaled Gaussian weights for the MLP.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut w = vec![0.0; self.param_count()];
        if let ModelKind::Mlp { hidden: h } = self.kind {
            let mut r = rng::stream(seed, &[0x1417]);
            let first = Normal::new(0.0, 1.0 / (self.dim as f64).sqrt()).unwrap();
            let second = Normal::new(0.0, 1.0 / (h as f64).sqrt()).unwrap();
            let w2_start = h * (self.dim + 1);
            for v in &mut w[..h * self.dim] {
                *v = first.sample(&mut r);
            }
            for v in &mut w[w2_start..w2_start + self.classes * h] {
                *v = second.sample(&mut r);
            }
        }
        w
    }

    /// Loss of one sample; when `grad` is given the sample gradient is added to it.
    pub fn sample_loss(&self, w: &[f64], x: &[f64], label: usize, target: f64, grad: Option<&mut [f64]>) -> f64 {
        let (d, c) = (self.dim, self.classes);
        match self.kind {
            ModelKind::Linear => {
                let r = w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d] - target;
                if let Some(g) = grad {
                    for (gi, xi) in g[..d].iter_mut().zip(x) {
                        *gi += r * xi;
                    }
                    g[d] += r;
                }
                0.5 * r * r
            }
            ModelKind::Logistic => {
                let mut z: Vec<f64> =
                    (0..c).map(|k| w[k * d..(k + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[c * d + k]).collect();
                let loss = log_sum_exp(&z) - z[label];
                if let Some(g) = grad {
                    softmax_in_place(&mut z);
                    z[label] -= 1.0;
                    for k in 0..c {
                        for (gi, xi) in g[k * d..(k + 1) * d].iter_mut().zip(x) {
                            *gi += z[k] * xi;
                        }
                        g[c * d + k] += z[k];
                    }
                }
                loss
            }
            ModelKind::Mlp { hidden: h } => {
                let b1 = h * d;
                let w2 = b1 + h;
                let b2 = w2 + c * h;
                let a: Vec<f64> = (0..h)
                    .map(|j| (w[j * d..(j + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + w[b1 + j]).tanh())
                    .collect();
                let mut z: Vec<f64> =
                    (0..c).map(|k| w[w2 + k * h..w2 + (k + 1) * h].iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() + w[b2 + k]).collect();
                let loss = log_sum_exp(&z) - z[label];
                if let Some(g) = grad {
                    softmax_in_place(&mut z);
                    z[label] -= 1.0;
                    let mut da = vec![0.0; h];
                    for k in 0..c {
                        for j in 0..h {
                            g[w2 + k * h + j] += z[k] * a[j];
                            da[j] += z[k] * w[w2 + k * h + j];
                        }
                        g[b2 + k] += z[k];
                    }
                    for j in 0..h {
                        let dz = da[j] * (1.0 - a[j] * a[j]);
                        for (gi, xi) in g[j * d..(j + 1) * d].iter_mut().zip(x) {
                            *gi += dz * xi;
                        }
                        g[b1 + j] += dz;
                    }
                }
                loss
            }
        }
    }

    /// Mean loss and gradient over the samples `idx` of `split`.
    pub fn batch_gradient(&self, w: &[f64], split: &Split, idx: &[usize]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        for &i in idx {
            loss += self.sample_loss(w, &split.features[i], split.labels[i], split.targets[i], Some(&mut g));
        }
        let s = 1.0 / idx.len().max(1) as f64;
        g.iter_mut().for_each(|v| *v *= s);
        (loss * s, g)
    }

    pub fn mean_loss(&self, w: &[f64], split: &Split) -> f64 {
        let total: f64 = (0..split.len())
            .map(|i| self.sample_loss(w, &split.features[i], split.labels[i], split.targets[i], None))
            .sum();
        total / split.len().max(1) as f64
    }

    /// Fraction of correct predictions; for Linear a prediction is correct within 0.5 of the target.
    pub fn accuracy(&self, w: &[f64], split: &Split) -> f64 {
        let correct = (0..split.len()).filter(|&i| self.correct(w, &split.features[i], split.labels[i], split.targets[i])).count();
        correct as f64 / split.len().max(1) as f64
    }

    fn correct(&self, w: &[f64], x: &[f64], label: usize, target: f64) -> bool {
        match self.kind {
            ModelKind::Linear => {
                let d = self.dim;
                let pred = w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d];
                (pred - target).abs() < 0.5
            }
            _ => {
                let z = self.logits(w, x);
                let best = (0..z.len()).fold(0, |b, k| if z[k] > z[b] { k } else { b });
                best == label
            }
        }
    }

    /// Class scores for the softmax models.
    pub fn logits(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let (d, c) = (self.dim, self.classes);
        let affine = |rows: &[f64], bias: &[f64], input: &[f64]| -> Vec<f64> {
            let k = input.len();
            bias.iter().enumerate().map(|(j, b)| rows[j * k..(j + 1) * k].iter().zip(input).map(|(p, q)| p * q).sum::<f64>() + b).collect()
        };
        match self.kind {
            ModelKind::Linear => vec![w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]],
            ModelKind::Logistic => affine(&w[..c * d], &w[c * d..], x),
            ModelKind::Mlp { hidden: h } => {
                let b1 = h * d;
                let w2 = b1 + h;
                let a: Vec<f64> = affine(&w[..b1], &w[b1..w2], x).into_iter().map(f64::tanh).collect();
                affine(&w[w2..w2 + c * h], &w[w2 + c * h..], &a)
            }
        }
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + z.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_error(model: &Model, w: &[f64], x: &[f64], label: usize, target: f64) -> f64 {
        let mut g = vec![0.0; w.len()];
        model.sample_loss(w, x, label, target, Some(&mut g));
        let h = 1e-6;
        let mut probe = w.to_vec();
        let mut worst = 0.0_f64;
        for k in 0..w.len() {
            probe[k] = w[k] + h;
            let up = model.sample_loss(&probe, x, label, target, None);
            probe[k] = w[k] - h;
            let down = model.sample_loss(&probe, x, label, target, None);
            probe[k] = w[k];
            worst = worst.max(((up - down) / (2.0 * h) - g[k]).abs());
        }
        worst / g.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn linear_gradient_at_zero() {
        let m = Model::new(ModelKind::Linear, 3, 1).unwrap();
        let x = [1.0, -2.0, 0.5];
        let mut g = vec![0.0; 4];
        let loss = m.sample_loss(&[0.0; 4], &x, 0, 3.0, Some(&mut g));
        assert_eq!(loss, 4.5);
        assert_eq!(g, vec![-3.0, 6.0, -1.5, -3.0]);
    }

    #[test]
    fn saturated_logistic_has_tiny_gradient() {
        let m = Model::new(ModelKind::Logistic, 2, 2).unwrap();
        // class 1 weight points along x
        let w = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let mut g = vec![0.0; 6];
        m.sample_loss(&w, &[40.0, 0.0], 1, 0.0, Some(&mut g));
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for kind in [ModelKind::Linear, ModelKind::Logistic, ModelKind::Mlp { hidden: 5 }] {
            let m = Model::new(kind, 4, 3).unwrap();
            let w: Vec<f64> = (0..m.param_count()).map(|_| 0.5 * normal.sample(&mut rng)).collect();
            let x: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
            assert!(fd_error(&m, &w, &x, 2, 0.7) <= 1e-5, "{kind:?}");
        }
    }

    #[test]
    fn param_counts() {
        assert_eq!(Model::new(ModelKind::Linear, 5, 1).unwrap().param_count(), 6);
        assert_eq!(Model::new(ModelKind::Logistic, 5, 3).unwrap().param_count(), 18);
        assert_eq!(Model::new(ModelKind::Mlp { hidden: 4 }, 5, 3).unwrap().param_count(), 24 + 15);
        assert!(Model::new(ModelKind::Logistic, 5, 1).is_err());
    }
}
