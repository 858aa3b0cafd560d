//! Deterministic parameter-server training.
//!
//! Each iteration every worker computes a minibatch gradient at the shared
//! parameters, the Byzantine columns are rewritten, the server aggregates and
//! broadcasts one update that all workers apply. Worker gradients run in
//! parallel but are gathered in worker order, so the schedule never shows in
//! the results.

mod data;
mod model;

pub use data::{make_blobs, make_regression, Dataset, Split};
pub use model::{Model, ModelKind};

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::aggregators::{AggregatorKind, AggregatorSpec};
use crate::attacks::{apply_attack, AttackSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Environment variable capping the worker thread pool.
pub const THREADS_ENV: &str = "FLAGAGG_THREADS";

/// `initial * decay^floor((t - 1) / interval)` for iteration `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub interval: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 0.1, decay: 0.2, interval: 100 }
    }
}

impl LrSchedule {
    pub fn at(&self, t: usize) -> f64 {
        let steps = (t.max(1) - 1) / self.interval.max(1);
        self.initial * self.decay.powi(steps as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: usize,
    pub model: ModelKind,
    /// The attack's own seed is replaced by one derived from `seed` and the iteration.
    pub attack: AttackSpec,
    pub aggregator: AggregatorSpec,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub iterations: usize,
    pub seed: u64,
    /// Worker threads; `None` reads `FLAGAGG_THREADS`, falling back to the core count.
    pub threads: Option<usize>,
    /// Measure aggregation wall time; off by default so records are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 8,
            model: ModelKind::Logistic,
            attack: AttackSpec::none(),
            aggregator: AggregatorSpec::new(AggregatorKind::Mean, 0),
            batch_size: 16,
            lr: LrSchedule::default(),
            iterations: 100,
            seed: 0,
            threads: None,
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidInput("need at least one worker".into()));
        }
        if self.batch_size < 1 || self.iterations < 1 {
            return Err(Error::InvalidInput("batch size and iteration count must be at least 1".into()));
        }
        if self.lr.interval < 1 || !(self.lr.initial > 0.0) || !(self.lr.decay > 0.0) {
            return Err(Error::InvalidInput("learning rate, decay and interval must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("thread count must be positive".into()));
        }
        self.attack.validate(n_params, self.p)?;
        self.aggregator.check_shape(n_params, self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRow {
    pub iter: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub agg_wall_ms: f64,
    pub irls_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub final_params: Vec<f64>,
}

pub const CSV_HEADER: &str = "iter,train_loss,test_accuracy,agg_wall_ms,irls_iters";

impl RunRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.iter, r.train_loss, r.test_accuracy, r.agg_wall_ms, r.irls_iters);
        }
        s
    }

    pub fn final_accuracy(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.test_accuracy)
    }
}

/// Minibatch indices of one worker at one iteration, drawn with replacement.
pub fn minibatch(n_train: usize, worker_id: usize, iter: usize, batch_size: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, &[1, worker_id as u64, iter as u64]);
    (0..batch_size).map(|_| r.random_range(0..n_train)).collect()
}

/// Mean gradient of one worker's seeded minibatch at `params`.
pub fn worker_gradient(
    model: &Model,
    params: &[f64],
    data: &Dataset,
    worker_id: usize,
    iter: usize,
    batch_size: usize,
    seed: u64,
) -> Vec<f64> {
    let idx = minibatch(data.train.len(), worker_id, iter, batch_size, seed);
    model.batch_gradient(params, &data.train, &idx).1
}

fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&k: &usize| k > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |k| k.get()))
}

pub fn train(cfg: &RunConfig, data: &Dataset) -> Result<RunRecord> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::InvalidInput("dataset needs training and test samples".into()));
    }
    let classes = if matches!(cfg.model, ModelKind::Linear) { 1 } else { data.classes };
    let model = Model::new(cfg.model, data.dim, classes)?;
    let n = model.param_count();
    cfg.validate(n)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(cfg.threads))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;

    let mut params = model.init_params(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.iterations);
    for t in 1..=cfg.iterations {
        let at = |e: Error| Error::AtIteration { iter: t, source: Box::new(e) };
        let snapshot = &params;
        let grads: Vec<Vec<f64>> = pool.install(|| {
            (0..cfg.p)
                .into_par_iter()
                .map(|w| worker_gradient(&model, snapshot, data, w, t, cfg.batch_size, cfg.seed))
                .collect()
        });
        let honest = Matrix::from_columns(&grads).map_err(at)?;
        let attack = AttackSpec { seed: rng::derive_seed(cfg.seed, &[2, t as u64]), ..cfg.attack.clone() };
        let g = apply_attack(&honest, &attack).map_err(at)?;

        let clock = cfg.record_timing.then(Instant::now);
        let agg = cfg.aggregator.aggregate_detailed(&g).map_err(at)?;
        let agg_wall_ms = clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3);

        // one update vector, applied by every worker to its identical copy
        let lr = cfg.lr.at(t);
        for (w, d) in params.iter_mut().zip(&agg.vector) {
            *w -= lr * d;
        }
        if let Some(bad) = params.iter().find(|v| !v.is_finite()) {
            return Err(at(Error::Overflow(*bad)));
        }
        rows.push(RunRow {
            iter: t,
            train_loss: model.mean_loss(&params, &data.train),
            test_accuracy: model.accuracy(&params, &data.test),
            agg_wall_ms,
            irls_iters: agg.irls_iters,
        });
    }
    Ok(RunRecord { rows, final_params: params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregators::mean;
    use crate::attacks::AttackKind;
    use crate::flag::FlagConfig;

    #[test]
    fn schedule_steps() {
        let lr = LrSchedule { initial: 1.0, decay: 0.2, interval: 10 };
        assert_eq!(lr.at(1), 1.0);
        assert_eq!(lr.at(10), 1.0);
        assert!((lr.at(11) - 0.2).abs() < 1e-15);
        assert!((lr.at(25) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn clean_least_squares_converges() {
        let data = make_regression(5, 200, 0.0, 1).unwrap();
        let cfg = RunConfig {
            p: 4,
            model: ModelKind::Linear,
            lr: LrSchedule { initial: 0.1, decay: 1.0, interval: 1 },
            iterations: 300,
            ..Default::default()
        };
        let rec = train(&cfg, &data).unwrap();
        assert!(rec.rows.last().unwrap().train_loss < 1e-8);
        // after burn-in the loss keeps falling
        let late: Vec<f64> = rec.rows[100..].iter().map(|r| r.train_loss).collect();
        assert!(late.windows(10).all(|w| w[9] <= w[0]));
    }

    #[test]
    fn hijack_to_zero_freezes_the_model() {
        let data = make_blobs(4, 2, 20, 0.5, 2).unwrap();
        let model = Model::new(ModelKind::Logistic, 4, 2).unwrap();
        let cfg = RunConfig {
            p: 5,
            attack: AttackSpec::new(AttackKind::MeanHijack { target: vec![0.0; model.param_count()] }, vec![4], 0),
            iterations: 20,
            ..Default::default()
        };
        let rec = train(&cfg, &data).unwrap();
        assert!(rec.final_params.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mean_equals_union_batch_gradient() {
        let data = make_blobs(3, 2, 30, 1.0, 3).unwrap();
        let model = Model::new(ModelKind::Logistic, 3, 2).unwrap();
        let w: Vec<f64> = (0..model.param_count()).map(|k| 0.1 * k as f64 - 0.3).collect();
        let p = 6;
        let grads: Vec<Vec<f64>> = (0..p).map(|i| worker_gradient(&model, &w, &data, i, 4, 8, 11)).collect();
        let agg = mean(&Matrix::from_columns(&grads).unwrap()).unwrap();
        let union: Vec<usize> = (0..p).flat_map(|i| minibatch(data.train.len(), i, 4, 8, 11)).collect();
        let (_, direct) = model.batch_gradient(&w, &data.train, &union);
        for (a, b) in agg.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_subspace_flag_is_the_mean() {
        let data = make_blobs(6, 2, 30, 1.0, 5).unwrap();
        let model = Model::new(ModelKind::Logistic, 6, 2).unwrap();
        let w = model.init_params(0);
        let grads: Vec<Vec<f64>> = (0..4).map(|i| worker_gradient(&model, &w, &data, i, 1, 8, 2)).collect();
        let g = Matrix::from_columns(&grads).unwrap();
        let flag = AggregatorSpec::new(AggregatorKind::Flag(FlagConfig { m: Some(4), ..Default::default() }), 0);
        let a = flag.aggregate(&g).unwrap();
        for (x, y) in a.iter().zip(mean(&g).unwrap()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn runs_replay_across_thread_counts() {
        let data = make_blobs(5, 3, 20, 1.0, 6).unwrap();
        let base = RunConfig {
            p: 6,
            attack: AttackSpec::new(AttackKind::uniform(), vec![1, 4], 0),
            aggregator: AggregatorSpec::new(AggregatorKind::Flag(FlagConfig::default()), 2),
            iterations: 15,
            seed: 9,
            ..Default::default()
        };
        let one = train(&RunConfig { threads: Some(1), ..base.clone() }, &data).unwrap();
        let many = train(&RunConfig { threads: Some(4), ..base.clone() }, &data).unwrap();
        assert_eq!(one.to_csv(), many.to_csv());
        assert_eq!(one.rows.len(), 15);
        assert!(one.to_csv().starts_with(CSV_HEADER));
    }

    #[test]
    fn infeasible_aggregator_is_rejected_before_training() {
        let data = make_blobs(3, 2, 10, 1.0, 7).unwrap();
        let cfg = RunConfig { p: 4, aggregator: AggregatorSpec::new(AggregatorKind::Bulyan, 1), ..Default::default() };
        assert!(matches!(train(&cfg, &data), Err(Error::TooFewWorkers(_))));
    }
}
