use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use flagagg_core::aggregators::{AggregatorKind, AggregatorSpec};
use flagagg_core::augment::pgm::{decode_pgm, encode_pgm, INDEX_FILE};
use flagagg_core::augment::{augment_image, select_for_augmentation, AugmentSpec};
use flagagg_core::linalg::Matrix;
use flagagg_core::rng;
use flagagg_core::sim::{train, Dataset, Model, ModelKind, RunConfig};
use flagagg_core::FlagConfig;

use crate::config::Config;
use crate::error::{CliError, CliResult};

/// A validated training setup.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub run: RunConfig,
    pub data: Dataset,
}

impl TrainSetup {
    pub fn from_config(cfg: &Config) -> CliResult<Self> {
        let mut run = cfg.run_config()?;
        let data = cfg.dataset()?;
        let classes = if matches!(run.model, ModelKind::Linear) { 1 } else { data.classes };
        let model = Model::new(run.model, data.dim, classes).map_err(|e| CliError::Config(format!("model: {e}")))?;
        run.attack = cfg.attack(model.param_count())?;
        run.validate(model.param_count()).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { run, data })
    }
}

/// Loads a config file (or the defaults) and applies `key=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> CliResult<Config> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

/// Runs one training job and returns its CSV.
pub fn train_csv(setup: &TrainSetup) -> CliResult<String> {
    Ok(train(&setup.run, &setup.data)?.to_csv())
}

/// Aggregators compared by `--plot-data`, all sharing the run's f.
fn comparison_rules(flag: &FlagConfig) -> Vec<AggregatorKind> {
    vec![
        AggregatorKind::Mean,
        AggregatorKind::Median,
        AggregatorKind::TrimmedMean,
        AggregatorKind::MeaMed,
        AggregatorKind::Phocas,
        AggregatorKind::MultiKrum { m: None },
        AggregatorKind::Bulyan,
        AggregatorKind::PcaBaseline { m: None },
        AggregatorKind::Flag(flag.clone()),
    ]
}

/// Reruns the setup under every aggregator. Rules whose worker-count
/// preconditions fail are skipped and reported in the second value.
pub fn comparison_csv(setup: &TrainSetup, flag: &FlagConfig) -> CliResult<(String, Vec<String>)> {
    let mut out = String::from("aggregator,iter,train_loss,test_accuracy\n");
    let mut skipped = Vec::new();
    for kind in comparison_rules(flag) {
        let spec = AggregatorSpec::new(kind, setup.run.aggregator.f);
        let run = RunConfig { aggregator: spec.clone(), ..setup.run.clone() };
        match train(&run, &setup.data) {
            Ok(rec) => {
                for r in &rec.rows {
                    let _ = writeln!(out, "{},{},{},{}", spec.name(), r.iter, r.train_loss, r.test_accuracy);
                }
            }
            Err(e) => skipped.push(format!("{}: {e}", spec.name())),
        }
    }
    Ok((out, skipped))
}

/// Aggregates the columns of a CSV matrix; one output value per line.
pub fn aggregate_csv(text: &str, spec: &AggregatorSpec) -> CliResult<String> {
    let g = Matrix::from_csv_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    let v = spec.aggregate(&g)?;
    Ok(v.iter().map(|x| format!("{x}\n")).collect())
}

/// Augments one PGM file. Images the transform leaves unchanged are
/// copied byte for byte.
pub fn augment_file(input: &Path, output: &Path, spec: &AugmentSpec, seed: u64) -> CliResult<()> {
    let bytes = fs::read(input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let img = decode_pgm(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let out = augment_image(&img, spec, seed)?;
    let encoded = if out == img { bytes } else { encode_pgm(&out) };
    write(output, &encoded)
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Directory mode: every `*.pgm` in `input` is written to `output`; a seeded
/// `fraction` of them (in file-name order) is augmented. The index file, if
/// present, is copied along. Returns the augmented file names.
pub fn augment_dir(input: &Path, output: &Path, spec: &AugmentSpec, seed: u64) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    fs::create_dir_all(output).map_err(|e| CliError::Runtime(format!("{}: {e}", output.display())))?;

    let picked = select_for_augmentation(files.len(), spec.fraction, seed);
    let mut names = Vec::with_capacity(picked.len());
    for (i, path) in files.iter().enumerate() {
        let name = path.file_name().expect("read_dir entries have names");
        let dest = output.join(name);
        if picked.binary_search(&i).is_ok() {
            augment_file(path, &dest, spec, rng::derive_seed(seed, &[i as u64]))?;
            names.push(name.to_string_lossy().into_owned());
        } else {
            let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            decode_pgm(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            write(&dest, &bytes)?;
        }
    }
    let index = input.join(INDEX_FILE);
    if index.is_file() {
        fs::copy(&index, output.join(INDEX_FILE)).map_err(|e| CliError::Runtime(format!("{}: {e}", index.display())))?;
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_median_by_hand() {
        let spec = AggregatorSpec::new(AggregatorKind::Median, 0);
        assert_eq!(aggregate_csv("1,3,2\n0,0,0\n", &spec).unwrap(), "2\n0\n");
    }

    #[test]
    fn aggregate_flag_on_repeated_axis() {
        let cfg = FlagConfig { m: Some(1), ..FlagConfig::default() };
        let spec = AggregatorSpec::new(AggregatorKind::Flag(cfg), 0);
        let out = aggregate_csv("1,1,0\n0,0,1\n0,0,0\n", &spec).unwrap();
        let v: Vec<f64> = out.lines().map(|l| l.parse().unwrap()).collect();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-12 && v[1].abs() < 1e-12 && v[2] == 0.0, "{v:?}");
    }

    #[test]
    fn malformed_csv_is_an_input_error() {
        let spec = AggregatorSpec::new(AggregatorKind::Mean, 0);
        assert_eq!(aggregate_csv("1,2\n3\n", &spec).unwrap_err().exit_code(), 2);
        assert_eq!(aggregate_csv("1,x\n", &spec).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn default_setup_validates() {
        let setup = TrainSetup::from_config(&Config::default()).unwrap();
        assert_eq!(setup.run.p, 8);
        assert_eq!(setup.data.dim, 20);
    }

    #[test]
    fn infeasible_attack_is_a_config_error() {
        let cfg = Config::parse("attack.kind = uniform\nattack.f = 9\n").unwrap();
        assert_eq!(TrainSetup::from_config(&cfg).unwrap_err().exit_code(), 2);
    }
}
