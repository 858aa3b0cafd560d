use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use flagagg_cli::commands::{self, TrainSetup};
use flagagg_cli::config::{keys_help, Config};
use flagagg_cli::verify::{self, Kernels};
use flagagg_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "flagagg", version, about = "Byzantine-robust gradient aggregation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate distributed training and write the per-iteration CSV.
    #[command(after_help = keys_help())]
    Train {
        /// Config file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also rerun under every aggregator and write the comparison CSV here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Aggregate the columns of a CSV matrix (rows are coordinates).
    Aggregate {
        matrix: PathBuf,
        /// mean | median | trimmed | meamed | phocas | krum | bulyan | pca | flag
        #[arg(long, default_value = "mean")]
        agg: String,
        /// Assumed Byzantine count.
        #[arg(long, default_value_t = 0)]
        f: usize,
        /// Subspace dimension (flag, pca) or selection size (krum).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// pairwise | l1 | none
        #[arg(long, default_value = "pairwise")]
        regularizer: String,
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run fixed-seed checks of the aggregation math.
    Verify {
        #[arg(value_parser = ["kron", "pca-equiv", "irls-mono", "kkt", "grad-fd", "socp-sweep", "all"])]
        suite: String,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Transform a PGM image, or every PGM in a directory.
    Augment {
        input: PathBuf,
        /// Output file, or directory in directory mode.
        #[arg(long)]
        out: PathBuf,
        /// Config file supplying augment.* keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// catmap | smoothcat | lv | noise
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        iters: Option<usize>,
        /// Smooth cat map sharpness.
        #[arg(long)]
        m: Option<f64>,
        /// Gaussian noise added after the map.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn write_output(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, overrides, out, plot_data } => {
            let cfg = commands::load_config(config.as_deref(), &overrides)?;
            let setup = TrainSetup::from_config(&cfg)?;
            let csv = commands::train_csv(&setup)?;
            if let Some(path) = plot_data {
                let (cmp, skipped) = commands::comparison_csv(&setup, &cfg.flag_config()?)?;
                for s in skipped {
                    eprintln!("flagagg: skipped {s}");
                }
                write_output(Some(&path), &cmp)?;
            }
            write_output(out.as_ref(), &csv)
        }
        Command::Aggregate { matrix, agg, f, m, lambda, regularizer, max_iters, tol } => {
            let mut cfg = Config::default();
            let m = m.map_or("auto".to_string(), |m| m.to_string());
            for (k, v) in [
                ("agg.kind", agg),
                ("agg.f", f.to_string()),
                ("agg.m", m.clone()),
                ("flag.m", m),
                ("flag.lambda", lambda.to_string()),
                ("flag.regularizer", regularizer),
                ("flag.max_iters", max_iters.to_string()),
                ("flag.tol", tol.to_string()),
            ] {
                cfg.set(k, &v)?;
            }
            let spec = cfg.aggregator()?;
            let text = std::fs::read_to_string(&matrix)
                .map_err(|e| CliError::Input(format!("{}: {e}", matrix.display())))?;
            write_output(None, &commands::aggregate_csv(&text, &spec)?)
        }
        Command::Verify { suite, inject_fault } => {
            let kernels = Kernels { fault: inject_fault };
            let names: Vec<&str> = if suite == "all" { verify::SUITES.to_vec() } else { vec![suite.as_str()] };
            let reports: Vec<_> = names.iter().filter_map(|s| verify::run_suite(s, kernels)).collect();
            write_output(None, &verify::format_table(&reports))?;
            let failed: Vec<String> = reports
                .iter()
                .filter(|r| !r.ok())
                .map(|r| format!("{} (seed {})", r.name, r.first_failure.unwrap_or(0)))
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verify(failed.join(", ")))
            }
        }
        Command::Augment { input, out, config, map, iters, m, noise, fraction, seed } => {
            let mut cfg = commands::load_config(config.as_deref(), &[])?;
            let flags = [
                ("augment.map", map),
                ("augment.iters", iters.map(|v| v.to_string())),
                ("augment.m", m.map(|v| v.to_string())),
                ("augment.noise", noise.map(|v| v.to_string())),
                ("augment.fraction", fraction.map(|v| v.to_string())),
                ("augment.seed", seed.map(|v| v.to_string())),
            ];
            for (k, v) in flags {
                if let Some(v) = v {
                    cfg.set(k, &v)?;
                }
            }
            let (spec, seed) = cfg.augment_spec()?;
            if input.is_dir() {
                let names = commands::augment_dir(&input, &out, &spec, seed)?;
                write_output(None, &names.iter().map(|n| format!("{n}\n")).collect::<String>())
            } else {
                commands::augment_file(&input, &out, &spec, seed)
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("flagagg: {e}");
        std::process::exit(e.exit_code());
    }
}
