//! Byzantine worker behaviors.
//!
//! An attack rewrites the columns of the Byzantine workers in an honest
//! gradient matrix. Each Byzantine worker draws from its own random stream
//! keyed by its index, so column order never changes the result.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    None,
    /// i.i.d. uniform entries on `[lo, hi)`.
    UniformRandom { lo: f64, hi: f64 },
    /// A single worker forces the plain mean to `target`.
    MeanHijack { target: Vec<f64> },
    /// `-scale * mean(honest)`; with `per_worker`, `-scale` times the worker's own gradient.
    SignFlip { scale: f64, per_worker: bool },
    /// `-epsilon * mean(honest)`.
    FallOfEmpires { epsilon: f64 },
    /// Each entry of a Byzantine column is zeroed with probability `rate`.
    PacketLossZero { rate: f64 },
}

impl AttackKind {
    pub fn uniform() -> Self {
        Self::UniformRandom { lo: -1.0, hi: 1.0 }
    }

    pub fn sign_flip() -> Self {
        Self::SignFlip { scale: 10.0, per_worker: false }
    }

    pub fn fall_of_empires() -> Self {
        Self::FallOfEmpires { epsilon: 0.1 }
    }

    pub fn packet_loss() -> Self {
        Self::PacketLossZero { rate: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub byzantine_ids: Vec<usize>,
    pub seed: u64,
}

impl AttackSpec {
    pub fn none() -> Self {
        Self { kind: AttackKind::None, byzantine_ids: Vec::new(), seed: 0 }
    }

    pub fn new(kind: AttackKind, byzantine_ids: Vec<usize>, seed: u64) -> Self {
        Self { kind, byzantine_ids, seed }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if matches!(self.kind, AttackKind::None) {
            return Ok(());
        }
        if self.byzantine_ids.is_empty() {
            return bad("attack has no byzantine workers".into());
        }
        let mut ids = self.byzantine_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.byzantine_ids.len() {
            return bad("duplicate byzantine worker ids".into());
        }
        if let Some(&i) = ids.iter().find(|&&i| i >= p) {
            return bad(format!("byzantine id {i} out of range for {p} workers"));
        }
        match &self.kind {
            AttackKind::None => {}
            AttackKind::UniformRandom { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform bounds [{lo}, {hi}) are empty or infinite"));
                }
            }
            AttackKind::MeanHijack { target } => {
                if self.byzantine_ids.len() != 1 {
                    return bad(format!("mean hijack needs exactly one byzantine worker, got {}", ids.len()));
                }
                if target.len() != n {
                    return bad(format!("hijack target has length {}, gradients have {n}", target.len()));
                }
            }
            AttackKind::SignFlip { scale, per_worker } => {
                if !scale.is_finite() {
                    return bad("sign flip scale must be finite".into());
                }
                if !per_worker && ids.len() == p {
                    return bad("sign flip needs at least one honest worker".into());
                }
            }
            AttackKind::FallOfEmpires { epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return bad(format!("epsilon must be positive, got {epsilon}"));
                }
                if ids.len() == p {
                    return bad("fall of empires needs at least one honest worker".into());
                }
            }
            AttackKind::PacketLossZero { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return bad(format!("loss rate {rate} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

fn honest_mean(g: &Matrix, byz: &[usize]) -> Vec<f64> {
    let mut sum = vec![0.0; g.rows()];
    let mut count = 0usize;
    for j in (0..g.cols()).filter(|j| !byz.contains(j)) {
        axpy(1.0, g.col(j), &mut sum);
        count += 1;
    }
    sum.iter().map(|x| x / count as f64).collect()
}

/// Replaces the Byzantine columns of `g` according to `spec`.
pub fn apply_attack(g: &Matrix, spec: &AttackSpec) -> Result<Matrix> {
    spec.validate(g.rows(), g.cols())?;
    if let Some(k) = g.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: k % g.rows(), col: k / g.rows() });
    }
    let mut out = g.clone();
    let byz = &spec.byzantine_ids;
    let p = g.cols() as f64;
    match &spec.kind {
        AttackKind::None => {}
        AttackKind::UniformRandom { lo, hi } => {
            for &j in byz {
                let mut r = rng::stream(spec.seed, &[j as u64]);
                for x in out.col_mut(j) {
                    *x = r.random_range(*lo..*hi);
                }
            }
        }
        AttackKind::MeanHijack { target } => {
            let j = byz[0];
            let mut col: Vec<f64> = target.iter().map(|t| p * t).collect();
            for k in (0..g.cols()).filter(|&k| k != j) {
                axpy(-1.0, g.col(k), &mut col);
            }
            out.col_mut(j).copy_from_slice(&col);
        }
        AttackKind::SignFlip { scale, per_worker } => {
            let base = if *per_worker { None } else { Some(honest_mean(g, byz)) };
            for &j in byz {
                let src = base.as_deref().unwrap_or(g.col(j)).to_vec();
                for (x, s) in out.col_mut(j).iter_mut().zip(src) {
                    *x = -scale * s;
                }
            }
        }
        AttackKind::FallOfEmpires { epsilon } => {
            let base = honest_mean(g, byz);
            for &j in byz {
                for (x, s) in out.col_mut(j).iter_mut().zip(&base) {
                    *x = -epsilon * s;
                }
            }
        }
        AttackKind::PacketLossZero { rate } => {
            for &j in byz {
                let mut r = rng::stream(spec.seed, &[j as u64]);
                for x in out.col_mut(j) {
                    if r.random::<f64>() < *rate {
                        *x = 0.0;
                    }
                }
            }
        }
    }
    Ok(out)
}
