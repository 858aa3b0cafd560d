//! Line-oriented `key = value` configuration.
//!
//! Keys are flat and dotted (`flag.lambda`). A `[section]` line prefixes the
//! keys that follow it, so `[flag]` then `lambda = 1` sets `flag.lambda`.
//! Every accepted key and its default lives in [`KEYS`].

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use flagagg_core::aggregators::{AggregatorKind, AggregatorSpec};
use flagagg_core::attacks::{AttackKind, AttackSpec};
use flagagg_core::augment::{AugmentKind, AugmentSpec, LvMode, LvParams};
use flagagg_core::sim::{make_blobs, make_regression, Dataset, LrSchedule, ModelKind, RunConfig, Split};
use flagagg_core::{FlagConfig, Regularizer};

use crate::error::{CliError, CliResult};

/// A config key with its default and a short description.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("run.p", "8", "worker count"),
    key("run.iterations", "100", "training iterations T"),
    key("run.batch_size", "16", "per-worker minibatch size B"),
    key("run.seed", "0", "master seed"),
    key("run.lr", "0.1", "initial learning rate"),
    key("run.lr_decay", "0.2", "learning-rate factor applied every interval"),
    key("run.lr_interval", "100", "iterations between decays"),
    key("run.timing", "false", "record aggregation wall time (makes output nondeterministic)"),
    key("model.kind", "logistic", "linear | logistic | mlp"),
    key("model.hidden", "16", "mlp hidden width"),
    key("data.kind", "blobs", "blobs | regression | csv"),
    key("data.dim", "20", "feature dimension"),
    key("data.classes", "2", "blob classes"),
    key("data.samples_per_class", "200", "blob samples per class"),
    key("data.spread", "1", "blob standard deviation"),
    key("data.samples", "500", "regression sample count"),
    key("data.noise", "0.1", "regression target noise"),
    key("data.seed", "auto", "dataset seed; auto uses run.seed"),
    key("data.train_features", "", "csv: training feature matrix, one sample per row"),
    key("data.train_labels", "", "csv: training `label,target` lines"),
    key("data.test_features", "", "csv: test feature matrix"),
    key("data.test_labels", "", "csv: test `label,target` lines"),
    key("attack.kind", "none", "none | uniform | hijack | signflip | empires | packetloss"),
    key("attack.f", "0", "number of byzantine workers"),
    key("attack.ids", "auto", "comma-separated byzantine worker ids; auto picks 0..f-1"),
    key("attack.lo", "-1", "uniform lower bound"),
    key("attack.hi", "1", "uniform upper bound"),
    key("attack.target", "0", "hijack target: one value for every coordinate or a full comma list"),
    key("attack.epsilon", "0.1", "fall-of-empires epsilon"),
    key("attack.scale", "10", "sign-flip scale"),
    key("attack.per_worker", "false", "sign-flip each worker's own gradient instead of the honest mean"),
    key("attack.rate", "0.1", "packet-loss zeroing probability"),
    key("agg.kind", "mean", "mean | median | trimmed | meamed | phocas | krum | bulyan | pca | flag"),
    key("agg.f", "auto", "byzantine count assumed by the rule; auto uses attack.f"),
    key("agg.m", "auto", "multi-krum selection size or pca dimension"),
    key("flag.lambda", "0", "regularization weight"),
    key("flag.m", "auto", "subspace dimension; auto is ceil((p+1)/2)"),
    key("flag.max_iters", "5", "IRLS iteration cap"),
    key("flag.tol", "1e-10", "IRLS objective-change tolerance"),
    key("flag.regularizer", "pairwise", "pairwise | l1 | none"),
    key("flag.l1_delta", "0.05", "smoothing of the l1 regularizer"),
    key("flag.guard_eps", "1e-12", "floor inside the IRLS weights"),
    key("augment.map", "catmap", "catmap | smoothcat | lv | noise"),
    key("augment.iters", "1", "map iterations"),
    key("augment.m", "0.95", "smooth cat map sharpness"),
    key("augment.sigma", "0.1", "noise map standard deviation"),
    key("augment.noise", "0", "extra Gaussian noise after the map"),
    key("augment.fraction", "1", "share of a directory that is augmented"),
    key("augment.seed", "0", "augmentation seed"),
    key("augment.lv_mode", "values", "values | coordinates"),
    key("augment.lv_horizon", "1", "Lotka-Volterra integration time"),
    key("augment.lv_step", "0.01", "Lotka-Volterra RK4 step"),
];

/// `--help` text listing every key with its default.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys (default in brackets):\n");
    for k in KEYS {
        let default = if k.default.is_empty() { "unset" } else { k.default };
        out.push_str(&format!("  {:width$}  [{default}]  {}\n", k.name, k.help));
    }
    out
}

/// Parsed key/value pairs on top of the defaults. Reads are recorded so
/// tests can check that every documented key is consumed somewhere.
#[derive(Debug)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
    read: RefCell<BTreeSet<&'static str>>,
}

impl Default for Config {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|k| (k.name, k.default.to_string())).collect(), read: RefCell::default() }
    }
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name.trim() {
                    "aggregator" => "agg".to_string(),
                    s => s.to_string(),
                };
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`, got {line:?}", k + 1)));
            };
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') { key.to_string() } else { format!("{section}.{key}") };
            cfg.set(&full, value.trim()).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("line {}: {msg}", k + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match KEYS.iter().find(|k| k.name == key) {
            Some(k) => {
                self.values.insert(k.name, value.to_string());
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn keys_read(&self) -> BTreeSet<&'static str> {
        self.read.borrow().clone()
    }

    fn raw(&self, key: &'static str) -> &str {
        self.read.borrow_mut().insert(key);
        self.values.get(key).map(String::as_str).expect("key listed in KEYS")
    }

    fn auto(&self, key: &'static str) -> Option<&str> {
        Some(self.raw(key)).filter(|v| *v != "auto")
    }

    fn parse_as<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
        v.parse().map_err(|_| CliError::Config(format!("`{key}`: cannot parse {v:?}")))
    }

    fn get<T: std::str::FromStr>(&self, key: &'static str) -> CliResult<T> {
        Self::parse_as(key, self.raw(key))
    }

    fn get_auto<T: std::str::FromStr>(&self, key: &'static str) -> CliResult<Option<T>> {
        self.auto(key).map(|v| Self::parse_as(key, v)).transpose()
    }

    fn list(&self, key: &'static str, v: &str) -> CliResult<Vec<f64>> {
        v.split(',').map(|s| Self::parse_as(key, s.trim())).collect()
    }

    fn choice<'a>(&self, key: &'static str, allowed: &[&'a str]) -> CliResult<&'a str> {
        let v = self.raw(key);
        allowed
            .iter()
            .find(|a| **a == v)
            .copied()
            .ok_or_else(|| CliError::Config(format!("`{key}` = {v:?}; expected one of {}", allowed.join(", "))))
    }

    pub fn model_kind(&self) -> CliResult<ModelKind> {
        let hidden = self.get("model.hidden")?;
        Ok(match self.choice("model.kind", &["linear", "logistic", "mlp"])? {
            "linear" => ModelKind::Linear,
            "logistic" => ModelKind::Logistic,
            _ => ModelKind::Mlp { hidden },
        })
    }

    pub fn flag_config(&self) -> CliResult<FlagConfig> {
        let delta = self.get("flag.l1_delta")?;
        let regularizer = match self.choice("flag.regularizer", &["pairwise", "l1", "none"])? {
            "pairwise" => Regularizer::PairwiseChordal,
            "l1" => Regularizer::ElementwiseL1 { delta },
            _ => Regularizer::None,
        };
        let cfg = FlagConfig {
            m: self.get_auto("flag.m")?,
            lambda: self.get("flag.lambda")?,
            regularizer,
            max_iters: self.get("flag.max_iters")?,
            tol: self.get("flag.tol")?,
            guard_eps: self.get("flag.guard_eps")?,
            ..FlagConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Config(format!("flag settings: {e}")))?;
        Ok(cfg)
    }

    pub fn aggregator(&self) -> CliResult<AggregatorSpec> {
        let attack_f: usize = self.get("attack.f")?;
        let f = self.get_auto("agg.f")?.unwrap_or(attack_f);
        let m = self.get_auto("agg.m")?;
        let flag = self.flag_config()?;
        let kind = match self.choice(
            "agg.kind",
            &["mean", "median", "trimmed", "meamed", "phocas", "krum", "bulyan", "pca", "flag"],
        )? {
            "mean" => AggregatorKind::Mean,
            "median" => AggregatorKind::Median,
            "trimmed" => AggregatorKind::TrimmedMean,
            "meamed" => AggregatorKind::MeaMed,
            "phocas" => AggregatorKind::Phocas,
            "krum" => AggregatorKind::MultiKrum { m },
            "bulyan" => AggregatorKind::Bulyan,
            "pca" => AggregatorKind::PcaBaseline { m },
            _ => AggregatorKind::Flag(flag),
        };
        Ok(AggregatorSpec::new(kind, f))
    }

    /// The attack; hijack targets need the parameter count `n`.
    pub fn attack(&self, n: usize) -> CliResult<AttackSpec> {
        let f: usize = self.get("attack.f")?;
        let ids: Vec<usize> = match self.auto("attack.ids") {
            Some(v) if !v.trim().is_empty() => {
                v.split(',').map(|s| Self::parse_as("attack.ids", s.trim())).collect::<CliResult<_>>()?
            }
            _ => (0..f).collect(),
        };
        if ids.len() != f {
            return Err(CliError::Config(format!("attack.ids lists {} workers but attack.f = {f}", ids.len())));
        }
        let lo = self.get("attack.lo")?;
        let hi = self.get("attack.hi")?;
        let target_raw = self.raw("attack.target").to_string();
        let epsilon = self.get("attack.epsilon")?;
        let scale = self.get("attack.scale")?;
        let per_worker = self.get("attack.per_worker")?;
        let rate = self.get("attack.rate")?;
        let kind = match self.choice("attack.kind", &["none", "uniform", "hijack", "signflip", "empires", "packetloss"])? {
            "none" => return Ok(AttackSpec::none()),
            "uniform" => AttackKind::UniformRandom { lo, hi },
            "hijack" => {
                let values = self.list("attack.target", &target_raw)?;
                let target = match values.len() {
                    1 => vec![values[0]; n],
                    k if k == n => values,
                    k => return Err(CliError::Config(format!("attack.target has {k} values, model has {n} parameters"))),
                };
                AttackKind::MeanHijack { target }
            }
            "signflip" => AttackKind::SignFlip { scale, per_worker },
            "empires" => AttackKind::FallOfEmpires { epsilon },
            _ => AttackKind::PacketLossZero { rate },
        };
        Ok(AttackSpec::new(kind, ids, 0))
    }

    pub fn dataset(&self) -> CliResult<Dataset> {
        let run_seed: u64 = self.get("run.seed")?;
        let seed = self.get_auto("data.seed")?.unwrap_or(run_seed);
        let dim = self.get("data.dim")?;
        let classes = self.get("data.classes")?;
        let spc = self.get("data.samples_per_class")?;
        let spread = self.get("data.spread")?;
        let samples = self.get("data.samples")?;
        let noise = self.get("data.noise")?;
        let paths = ["data.train_features", "data.train_labels", "data.test_features", "data.test_labels"]
            .map(|k| self.raw(k).to_string());
        let built = match self.choice("data.kind", &["blobs", "regression", "csv"])? {
            "blobs" => make_blobs(dim, classes, spc, spread, seed),
            "regression" => make_regression(dim, samples, noise, seed),
            _ => return load_csv_dataset(&paths),
        };
        built.map_err(|e| CliError::Config(format!("data settings: {e}")))
    }

    pub fn run_config(&self) -> CliResult<RunConfig> {
        Ok(RunConfig {
            p: self.get("run.p")?,
            model: self.model_kind()?,
            attack: AttackSpec::none(),
            aggregator: self.aggregator()?,
            batch_size: self.get("run.batch_size")?,
            lr: LrSchedule {
                initial: self.get("run.lr")?,
                decay: self.get("run.lr_decay")?,
                interval: self.get("run.lr_interval")?,
            },
            iterations: self.get("run.iterations")?,
            seed: self.get("run.seed")?,
            threads: None,
            record_timing: self.get("run.timing")?,
        })
    }

    pub fn augment_spec(&self) -> CliResult<(AugmentSpec, u64)> {
        let iterations = self.get("augment.iters")?;
        let m = self.get("augment.m")?;
        let sigma = self.get("augment.sigma")?;
        let params = LvParams { horizon: self.get("augment.lv_horizon")?, step: self.get("augment.lv_step")?, ..LvParams::default() };
        let mode = match self.choice("augment.lv_mode", &["values", "coordinates"])? {
            "values" => LvMode::Values,
            _ => LvMode::Coordinates,
        };
        let kind = match self.choice("augment.map", &["catmap", "smoothcat", "lv", "noise"])? {
            "catmap" => AugmentKind::CatMap { iterations },
            "smoothcat" => AugmentKind::SmoothCatMap { m, iterations },
            "lv" => AugmentKind::LotkaVolterra { params, mode },
            _ => AugmentKind::GaussianNoise { sigma },
        };
        let spec = AugmentSpec { kind, fraction: self.get("augment.fraction")?, noise_sigma: self.get("augment.noise")? };
        spec.validate().map_err(|e| CliError::Config(format!("augment settings: {e}")))?;
        if let AugmentKind::LotkaVolterra { params, .. } = &spec.kind {
            params.validate().map_err(|e| CliError::Config(format!("augment settings: {e}")))?;
        }
        Ok((spec, self.get("augment.seed")?))
    }
}

fn load_csv_dataset(paths: &[String; 4]) -> CliResult<Dataset> {
    let read = |p: &String| {
        if p.is_empty() {
            return Err(CliError::Config("data.kind = csv needs all four data.*_features/labels paths".into()));
        }
        std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{p}: {e}")))
    };
    let split = |f: &String, l: &String| -> CliResult<Split> {
        Split::from_csv(&read(f)?, &read(l)?).map_err(|e| CliError::Input(format!("{f}: {e}")))
    };
    let train = split(&paths[0], &paths[1])?;
    let test = split(&paths[2], &paths[3])?;
    let dim = train.features.first().map_or(0, Vec::len);
    if test.features.iter().any(|x| x.len() != dim) || dim == 0 {
        return Err(CliError::Input("train and test feature widths differ".into()));
    }
    let classes = train.labels.iter().chain(&test.labels).max().map_or(1, |m| m + 1);
    Ok(Dataset { train, test, dim, classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let cfg = Config::parse("# header\n[flag]\nlambda = 0.5  # trailing\n[run]\np=12\nagg.kind = flag\n").unwrap();
        assert_eq!(cfg.raw("flag.lambda"), "0.5");
        assert_eq!(cfg.raw("run.p"), "12");
        assert_eq!(cfg.raw("agg.kind"), "flag");
    }

    #[test]
    fn aggregator_section_alias() {
        let cfg = Config::parse("[aggregator]\nkind = median\n").unwrap();
        assert_eq!(cfg.aggregator().unwrap().kind, AggregatorKind::Median);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::parse("[flag]\nlabmda = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("labmda"), "{err}");
        assert!(Config::parse("run.p 8\n").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let cfg = Config::parse("run.p = eight\n").unwrap();
        assert_eq!(cfg.run_config().unwrap_err().exit_code(), 2);
        let cfg = Config::parse("agg.kind = krumm\n").unwrap();
        assert!(cfg.aggregator().unwrap_err().to_string().contains("krumm"));
    }

    #[test]
    fn agg_f_follows_attack_f() {
        let cfg = Config::parse("attack.f = 2\nattack.kind = uniform\n").unwrap();
        assert_eq!(cfg.aggregator().unwrap().f, 2);
        assert_eq!(cfg.attack(10).unwrap().byzantine_ids, vec![0, 1]);
        let cfg = Config::parse("attack.f = 1\nattack.ids = 4,5\nattack.kind = uniform\n").unwrap();
        assert!(cfg.attack(10).is_err());
    }

    #[test]
    fn hijack_target_broadcasts() {
        let cfg = Config::parse("attack.kind = hijack\nattack.f = 1\nattack.target = 0.5\n").unwrap();
        assert_eq!(cfg.attack(3).unwrap().kind, AttackKind::MeanHijack { target: vec![0.5; 3] });
        let cfg = Config::parse("attack.kind = hijack\nattack.f = 1\nattack.target = 1,2\n").unwrap();
        assert!(cfg.attack(3).is_err());
    }

    #[test]
    fn help_lists_every_key_and_every_key_is_consumed() {
        let help = keys_help();
        let listed: BTreeSet<&str> =
            help.lines().skip(1).filter_map(|l| l.split_whitespace().next()).collect();
        let table: BTreeSet<&str> = KEYS.iter().map(|k| k.name).collect();
        assert_eq!(listed, table);

        let cfg = Config::default();
        cfg.run_config().unwrap();
        cfg.attack(42).unwrap();
        cfg.dataset().unwrap();
        cfg.augment_spec().unwrap();
        assert_eq!(cfg.keys_read(), table);
    }
}
