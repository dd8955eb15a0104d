//! Command-line harness: dataset generation, training, refinement,
//! diagnostics, ablations, and the full report pipeline.
//!
//! Configuration comes from an optional `key = value` file plus repeated
//! `--set key=value` overrides. The only ambient state is two environment
//! variables: `REFINELAB_OUT` (output directory override) and
//! `REFINELAB_THREADS` (worker-pool size).

use clap::{Parser, Subcommand};
use refinelab_core::config::ExperimentConfig;
use refinelab_core::experiment::{self, ExperimentError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "refinelab", version, about = "Iterative-refinement solver lab")]
struct Cli {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a single configuration key, e.g. --set problem.eps=0.3.
    /// May be repeated; applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate the train/test datasets into the output directory.
    GenData {
        /// Also export the datasets as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Train the refinement operator; writes params.json and the training log.
    Train,
    /// Refine the test set with trained parameters; writes trajectory CSVs.
    Refine,
    /// Run the diagnostics battery on trained parameters.
    Diagnose,
    /// Train paired arms differing in one ablated knob and compare them.
    Ablate,
    /// Run the full pipeline and emit the complete report bundle.
    Report,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    for pair in &cli.overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            ExperimentError::Config(refinelab_core::config::ConfigError::Invalid(format!(
                "--set expects KEY=VALUE, got '{pair}'"
            )))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Ok(dir) = std::env::var("REFINELAB_OUT") {
        if !dir.is_empty() {
            cfg.output_dir = dir;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_thread_pool() {
    if let Ok(threads) = std::env::var("REFINELAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    match &cli.verb {
        Verb::GenData { csv } => {
            let (train_ds, test_ds) = experiment::ensure_datasets(&cfg)?;
            if *csv {
                let out = PathBuf::from(&cfg.output_dir);
                std::fs::write(out.join("train.csv"), train_ds.to_csv())?;
                std::fs::write(out.join("test.csv"), test_ds.to_csv())?;
            }
            println!(
                "wrote {} train / {} test samples to {}",
                train_ds.pairs.len(),
                test_ds.pairs.len(),
                cfg.output_dir
            );
        }
        Verb::Train => {
            let (params, log) = experiment::phase_train(&cfg)?;
            let last = log.epochs.last();
            println!(
                "trained {} parameters over {} epochs (final L_total {})",
                params.param_count(),
                log.epochs.len(),
                last.map(|e| format!("{:.6e}", e.total)).unwrap_or_else(|| "n/a".into())
            );
        }
        Verb::Refine => {
            let trajectories = experiment::phase_refine(&cfg)?;
            println!(
                "refined {} test samples for {} steps",
                trajectories.len(),
                cfg.refine.k_max
            );
        }
        Verb::Diagnose => {
            let (report, band) = experiment::phase_diagnose(&cfg)?;
            if let Some(m) = &report.monotonicity {
                println!(
                    "monotonicity: m = {:.4} +- {:.4}, M = {:.4} +- {:.4}, m>0 on {:.1}%",
                    m.summary.m_mean,
                    m.summary.m_std,
                    m.summary.big_m_mean,
                    m.summary.big_m_std,
                    100.0 * m.summary.m_positive_fraction
                );
            }
            if let Some(b) = &report.bias_error {
                match b.pearson {
                    Some(r) => println!(
                        "bias/error correlation: r = {r:.4} over {} samples ({} divergent excluded)",
                        b.pairs.len(),
                        b.excluded_divergent
                    ),
                    None => println!(
                        "bias/error correlation undefined over {} samples",
                        b.pairs.len()
                    ),
                }
            }
            if band.is_some() {
                println!("band ratios written to band_ratios.csv");
            }
        }
        Verb::Ablate => {
            let report = experiment::ablation_suite(&cfg)?;
            print!("{}", report.to_csv());
        }
        Verb::Report => {
            let summary = experiment::run_experiment(&cfg)?;
            println!(
                "report bundle written to {} ({} trajectories)",
                summary.output_dir.display(),
                summary.trajectories.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
