//! Experiment orchestration: dataset generation, training, test-set
//! refinement with trajectory export, the diagnostics battery, the ablation
//! suite, and the report bundle (CSV/JSON plus a hashed manifest).

use crate::base::EllipticProblem;
use crate::config::{AblationKind, ConfigError, ExperimentConfig};
use crate::data::{self, DataError, Dataset};
use crate::diag::{
    self, spectral::Band, spectral::BandRatioReport, spectral::SpectralProfile, BiasErrorStudy,
    DiagError, JacobianReport, MonotonicitySummary, RecursionFit, SpectrumMethod,
};
use crate::field::Grid;
use crate::net::{MlpParams, NetError};
use crate::refine::{run_refinement, RefineConfig, RefineError, RefinementTrajectory};
use crate::train::{self, TrainError, TrainingLog};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Trajectory length of the bias/error-floor study.
const BIAS_STUDY_STEPS: usize = 24;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("dataset: {0}")]
    Data(#[from] DataError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("refinement of test sample {sample}: {source}")]
    Refine {
        sample: usize,
        source: Box<RefineError>,
    },
    #[error("diagnostics ({phase}): {source}")]
    Diag {
        phase: &'static str,
        source: DiagError,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl ExperimentError {
    /// Process exit code: 0 success, 2 config error, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(DataError::EmptyDataset) => 2,
            ExperimentError::Train(TrainError::Config(_)) => 2,
            ExperimentError::Train(TrainError::Diverged { .. }) => 3,
            ExperimentError::Train(TrainError::NonFiniteGradient { .. }) => 3,
            ExperimentError::Refine { source, .. } => match source.as_ref() {
                RefineError::Diverged { .. } | RefineError::NonFiniteUpdate => 3,
                _ => 1,
            },
            ExperimentError::Data(_) => 4,
            ExperimentError::Io(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub alpha: f64,
    pub samples: Vec<JacobianReport>,
    pub summary: MonotonicitySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionFitReport {
    pub per_sample: Vec<RecursionFit>,
    pub median_q_hat: f64,
    pub median_c_hat: f64,
    pub median_b_hat: f64,
}

/// One step-size arm of the stability sweep. Divergent samples are recorded,
/// not fatal: the sweep exists to map the divergence regime.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub alpha: f64,
    pub samples: usize,
    pub diverged: usize,
    /// Median error norm across surviving samples, per iterate 0..k_max.
    pub median_error_norms: Vec<f64>,
    pub median_q_hat: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct DiagnosticsReport {
    pub monotonicity: Option<MonotonicityReport>,
    pub bias_error: Option<BiasErrorStudy>,
    pub recursion_fit: Option<RecursionFitReport>,
    pub step_size_sweep: Option<Vec<SweepEntry>>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: String,
    config_hash: String,
    created_unix: u64,
    files: Vec<String>,
}

/// Everything a run produced, kept in memory for callers; the same content
/// is written to the output directory.
pub struct ExperimentSummary {
    pub output_dir: PathBuf,
    pub params: MlpParams,
    pub log: TrainingLog,
    pub test: Dataset,
    pub trajectories: Vec<RefinementTrajectory>,
    pub diagnostics: DiagnosticsReport,
    pub band_report: Option<BandRatioReport>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

fn diag_phase(phase: &'static str) -> impl Fn(DiagError) -> ExperimentError {
    move |source| ExperimentError::Diag { phase, source }
}

/// Run the full experiment: data, training, refinement, diagnostics, reports.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(out.join("trajectories"))?;
    let mut files: Vec<String> = Vec::new();

    let config_text = cfg.serialize();
    write_file(&out, "config.txt", &config_text, &mut files)?;

    let grid = Grid::new(cfg.problem.n).expect("validated");
    let prob = EllipticProblem::new(cfg.problem.eps, grid);

    // Datasets.
    let (train_ds, test_ds) = data::train_test(&prob, &cfg.data)?;
    train_ds.write_to(&out.join("train.ds"))?;
    test_ds.write_to(&out.join("test.ds"))?;
    files.push("train.ds".into());
    files.push("test.ds".into());

    // Training.
    let (params, log) = train::train(
        &train_ds.pairs,
        &cfg.base,
        &prob,
        &cfg.model,
        &cfg.train,
        &cfg.losses,
    )?;
    write_file(&out, "params.json", &params.to_json(), &mut files)?;
    write_file(&out, "training_log.csv", &log.to_csv(), &mut files)?;

    // Test-set refinement trajectories from the base ansatz.
    let trajectories = refine_test_set(&params, &test_ds, &prob, cfg, &cfg.refine)?;
    for (i, (traj, (_, y))) in trajectories.iter().zip(test_ds.pairs.iter()).enumerate() {
        let name = format!("trajectories/sample_{i:04}.csv");
        write_file(&out, &name, &traj.to_csv(Some(y)), &mut files)?;
    }

    // Band ratios from per-step spectral profiles.
    let band_report = if cfg.diagnostics.band_ratios {
        let report = band_report_from_trajectories(&trajectories, &test_ds)
            .map_err(diag_phase("band_ratios"))?;
        write_file(&out, "band_ratios.csv", &report.to_csv(), &mut files)?;
        Some(report)
    } else {
        None
    };

    let diagnostics = run_diagnostics(&params, &test_ds, &prob, cfg, &trajectories)?;
    if let Some(sweep) = &diagnostics.step_size_sweep {
        for entry in sweep {
            let name = format!("sweep_alpha_{}.csv", entry.alpha);
            let mut csv = String::from("k,median_error_norm\n");
            for (k, e) in entry.median_error_norms.iter().enumerate() {
                csv.push_str(&format!("{k},{e:.16e}\n"));
            }
            write_file(&out, &name, &csv, &mut files)?;
        }
    }
    write_file(
        &out,
        "diagnostics.json",
        &serde_json::to_string_pretty(&diagnostics).expect("report serializes"),
        &mut files,
    )?;

    // Manifest goes last and carries the only timestamp in the bundle.
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hex_sha256(&config_text),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    Ok(ExperimentSummary {
        output_dir: out,
        params,
        log,
        test: test_ds,
        trajectories,
        diagnostics,
        band_report,
    })
}

fn write_file(
    out: &Path,
    name: &str,
    content: &str,
    files: &mut Vec<String>,
) -> Result<(), ExperimentError> {
    std::fs::write(out.join(name), content)?;
    files.push(name.to_string());
    Ok(())
}

fn hex_sha256(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Refine every test sample from its base ansatz; divergence is fatal here
/// and reported with the sample index (the sweep handles divergence as data).
pub fn refine_test_set(
    params: &MlpParams,
    test: &Dataset,
    prob: &EllipticProblem,
    cfg: &ExperimentConfig,
    refine_cfg: &RefineConfig,
) -> Result<Vec<RefinementTrajectory>, ExperimentError> {
    let results: Vec<Result<RefinementTrajectory, ExperimentError>> = test
        .pairs
        .par_iter()
        .enumerate()
        .map(|(sample, (x, y))| {
            let h0 = cfg.base.predict(prob, x).map_err(|e| ExperimentError::Data(e.into()))?;
            run_refinement(params, x, &h0, refine_cfg, Some(y)).map_err(|source| {
                ExperimentError::Refine {
                    sample,
                    source: Box::new(source),
                }
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Band-ratio report over all recorded steps, with step 0 (the base ansatz)
/// as the reference profile.
pub fn band_report_from_trajectories(
    trajectories: &[RefinementTrajectory],
    test: &Dataset,
) -> Result<BandRatioReport, DiagError> {
    let max_k = trajectories.iter().map(|t| t.len() - 1).min().unwrap_or(0);
    let base_profiles: Vec<SpectralProfile> = trajectories
        .iter()
        .zip(test.pairs.iter())
        .map(|(t, (_, y))| diag::spectral::spectral_error_profile(&t.iterates[0], y, 0))
        .collect();
    let step_profiles: Vec<(usize, Vec<SpectralProfile>)> = (1..=max_k)
        .map(|k| {
            let profiles = trajectories
                .iter()
                .zip(test.pairs.iter())
                .map(|(t, (_, y))| diag::spectral::spectral_error_profile(&t.iterates[k], y, k))
                .collect();
            (k, profiles)
        })
        .collect();
    diag::spectral::band_ratios(&step_profiles, &base_profiles)
}

fn run_diagnostics(
    params: &MlpParams,
    test: &Dataset,
    prob: &EllipticProblem,
    cfg: &ExperimentConfig,
    trajectories: &[RefinementTrajectory],
) -> Result<DiagnosticsReport, ExperimentError> {
    let mut report = DiagnosticsReport::default();

    if cfg.diagnostics.monotonicity {
        report.monotonicity = Some(monotonicity_study(
            params,
            test,
            cfg.refine.alpha,
            SpectrumMethod::DenseExact,
        )?);
    }

    if cfg.diagnostics.bias_error {
        let study_cfg = RefineConfig::constant(cfg.refine.alpha, BIAS_STUDY_STEPS);
        report.bias_error = Some(
            diag::bias_error_study(params, &test.pairs, prob, &cfg.base, &study_cfg)
                .map_err(diag_phase("bias_error"))?,
        );
    }

    if cfg.diagnostics.recursion_fit {
        let fits: Vec<RecursionFit> = trajectories
            .iter()
            .filter(|t| t.error_norms.as_ref().map(|e| e.len()).unwrap_or(0) >= 4)
            .map(diag::fit_error_recursion)
            .collect::<Result<_, _>>()
            .map_err(diag_phase("recursion_fit"))?;
        if !fits.is_empty() {
            let med = |f: &dyn Fn(&RecursionFit) -> f64| {
                median(&mut fits.iter().map(|r| f(r)).collect()).expect("nonempty fits")
            };
            report.recursion_fit = Some(RecursionFitReport {
                median_q_hat: med(&|r| r.q_hat),
                median_c_hat: med(&|r| r.c_hat),
                median_b_hat: med(&|r| r.b_hat),
                per_sample: fits,
            });
        }
    }

    if !cfg.diagnostics.step_size_sweep.is_empty() {
        let entries = step_size_sweep(
            params,
            test,
            prob,
            cfg,
            &cfg.diagnostics.step_size_sweep,
            cfg.refine.k_max,
        )?;
        report.step_size_sweep = Some(entries);
    }

    Ok(report)
}

/// Monotonicity study: the Jacobian is evaluated at the true solution of
/// every test pair.
pub fn monotonicity_study(
    params: &MlpParams,
    test: &Dataset,
    alpha: f64,
    method: SpectrumMethod,
) -> Result<MonotonicityReport, ExperimentError> {
    let samples: Vec<JacobianReport> = test
        .pairs
        .par_iter()
        .map(|(x, y)| diag::jacobian_report(params, x, y, alpha, method))
        .collect::<Result<_, _>>()
        .map_err(diag_phase("monotonicity"))?;
    let summary = MonotonicitySummary::from_reports(&samples);
    Ok(MonotonicityReport {
        alpha,
        samples,
        summary,
    })
}

/// Step-size stability sweep: per alpha, refine every test sample and
/// aggregate error norms; divergent runs are counted, not fatal.
pub fn step_size_sweep(
    params: &MlpParams,
    test: &Dataset,
    prob: &EllipticProblem,
    cfg: &ExperimentConfig,
    alphas: &[f64],
    k_max: usize,
) -> Result<Vec<SweepEntry>, ExperimentError> {
    let mut entries = Vec::new();
    for &alpha in alphas {
        let runs: Vec<Result<Option<RefinementTrajectory>, ExperimentError>> = test
            .pairs
            .par_iter()
            .map(|(x, y)| {
                let h0 = cfg
                    .base
                    .predict(prob, x)
                    .map_err(|e| ExperimentError::Data(e.into()))?;
                match run_refinement(params, x, &h0, &RefineConfig::constant(alpha, k_max), Some(y))
                {
                    Ok(t) => Ok(Some(t)),
                    Err(RefineError::Diverged { .. } | RefineError::NonFiniteUpdate) => Ok(None),
                    Err(e) => Err(ExperimentError::Refine {
                        sample: 0,
                        source: Box::new(e),
                    }),
                }
            })
            .collect();

        let mut survivors: Vec<RefinementTrajectory> = Vec::new();
        let mut diverged = 0usize;
        for r in runs {
            match r? {
                Some(t) => survivors.push(t),
                None => diverged += 1,
            }
        }

        let median_error_norms: Vec<f64> = (0..=k_max)
            .map_while(|k| {
                let mut at_k: Vec<f64> = survivors
                    .iter()
                    .filter_map(|t| t.error_norms.as_ref().and_then(|e| e.get(k)).copied())
                    .collect();
                median(&mut at_k)
            })
            .collect();

        let mut q_hats: Vec<f64> = survivors
            .iter()
            .filter_map(|t| diag::fit_error_recursion(t).ok().map(|f| f.q_hat))
            .collect();
        entries.push(SweepEntry {
            alpha,
            samples: test.pairs.len(),
            diverged,
            median_error_norms,
            median_q_hat: median(&mut q_hats),
        });
    }
    Ok(entries)
}

/// Load the datasets from the output directory, generating and writing them
/// when absent. Generation is deterministic, so both paths agree bytewise.
pub fn ensure_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset), ExperimentError> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out)?;
    let train_path = out.join("train.ds");
    let test_path = out.join("test.ds");
    if train_path.exists() && test_path.exists() {
        return Ok((
            Dataset::read_from(&train_path)?,
            Dataset::read_from(&test_path)?,
        ));
    }
    let grid = Grid::new(cfg.problem.n).expect("validated");
    let prob = EllipticProblem::new(cfg.problem.eps, grid);
    let (train_ds, test_ds) = data::train_test(&prob, &cfg.data)?;
    train_ds.write_to(&train_path)?;
    test_ds.write_to(&test_path)?;
    Ok((train_ds, test_ds))
}

/// Train on the stored dataset and write `params.json` and the training log.
pub fn phase_train(cfg: &ExperimentConfig) -> Result<(MlpParams, TrainingLog), ExperimentError> {
    let (train_ds, _) = ensure_datasets(cfg)?;
    let prob = train_ds.problem();
    let (params, log) = train::train(
        &train_ds.pairs,
        &cfg.base,
        &prob,
        &cfg.model,
        &cfg.train,
        &cfg.losses,
    )?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::write(out.join("params.json"), params.to_json())?;
    std::fs::write(out.join("training_log.csv"), log.to_csv())?;
    Ok((params, log))
}

/// Load previously trained parameters from the output directory.
pub fn load_params(cfg: &ExperimentConfig) -> Result<MlpParams, ExperimentError> {
    let text = std::fs::read_to_string(PathBuf::from(&cfg.output_dir).join("params.json"))?;
    Ok(MlpParams::from_json(&text)?)
}

/// Refine the stored test set with stored parameters; writes trajectory CSVs.
pub fn phase_refine(cfg: &ExperimentConfig) -> Result<Vec<RefinementTrajectory>, ExperimentError> {
    let (_, test_ds) = ensure_datasets(cfg)?;
    let params = load_params(cfg)?;
    let prob = test_ds.problem();
    let trajectories = refine_test_set(&params, &test_ds, &prob, cfg, &cfg.refine)?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(out.join("trajectories"))?;
    for (i, (traj, (_, y))) in trajectories.iter().zip(test_ds.pairs.iter()).enumerate() {
        std::fs::write(
            out.join(format!("trajectories/sample_{i:04}.csv")),
            traj.to_csv(Some(y)),
        )?;
    }
    Ok(trajectories)
}

/// Run the diagnostics battery on stored parameters and test set; writes the
/// diagnostics JSON, band-ratio CSV and sweep CSVs.
pub fn phase_diagnose(
    cfg: &ExperimentConfig,
) -> Result<(DiagnosticsReport, Option<BandRatioReport>), ExperimentError> {
    let (_, test_ds) = ensure_datasets(cfg)?;
    let params = load_params(cfg)?;
    let prob = test_ds.problem();
    let trajectories = refine_test_set(&params, &test_ds, &prob, cfg, &cfg.refine)?;
    let out = PathBuf::from(&cfg.output_dir);

    let band_report = if cfg.diagnostics.band_ratios {
        let report = band_report_from_trajectories(&trajectories, &test_ds)
            .map_err(diag_phase("band_ratios"))?;
        std::fs::write(out.join("band_ratios.csv"), report.to_csv())?;
        Some(report)
    } else {
        None
    };
    let diagnostics = run_diagnostics(&params, &test_ds, &prob, cfg, &trajectories)?;
    if let Some(sweep) = &diagnostics.step_size_sweep {
        for entry in sweep {
            let mut csv = String::from("k,median_error_norm\n");
            for (k, e) in entry.median_error_norms.iter().enumerate() {
                csv.push_str(&format!("{k},{e:.16e}\n"));
            }
            std::fs::write(out.join(format!("sweep_alpha_{}.csv", entry.alpha)), csv)?;
        }
    }
    std::fs::write(
        out.join("diagnostics.json"),
        serde_json::to_string_pretty(&diagnostics).expect("report serializes"),
    )?;
    Ok((diagnostics, band_report))
}

/// One arm of the ablation table.
#[derive(Debug, Clone, Serialize)]
pub struct AblationArm {
    pub label: String,
    pub monotonicity: MonotonicitySummary,
    /// Final-step band ratios (low, mid, high), median across seeds.
    pub band_low: f64,
    pub band_mid: f64,
    pub band_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub kind: AblationKind,
    pub seeds: usize,
    pub arms: Vec<AblationArm>,
}

impl AblationReport {
    /// Side-by-side table: one row per arm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "arm,m_mean,m_std,M_mean,M_std,m_positive_pct,band_low,band_mid,band_high\n",
        );
        for arm in &self.arms {
            let s = &arm.monotonicity;
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.1},{:.6},{:.6},{:.6}\n",
                arm.label,
                s.m_mean,
                s.m_std,
                s.big_m_mean,
                s.big_m_std,
                100.0 * s.m_positive_fraction,
                arm.band_low,
                arm.band_mid,
                arm.band_high,
            ));
        }
        out
    }
}

/// Train one arm across the configured seeds and aggregate its metrics.
fn run_arm(
    label: &str,
    cfg: &ExperimentConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
    prob: &EllipticProblem,
) -> Result<AblationArm, ExperimentError> {
    let mut all_reports: Vec<JacobianReport> = Vec::new();
    let mut lows = Vec::new();
    let mut mids = Vec::new();
    let mut highs = Vec::new();
    for s in 0..cfg.ablate.seeds {
        let mut arm_cfg = cfg.clone();
        arm_cfg.train.seed = cfg.train.seed + s as u64;
        arm_cfg.model.seed = cfg.model.seed + s as u64;
        let (params, _) = train::train(
            &train_ds.pairs,
            &arm_cfg.base,
            prob,
            &arm_cfg.model,
            &arm_cfg.train,
            &arm_cfg.losses,
        )?;
        let mono = monotonicity_study(
            &params,
            test_ds,
            arm_cfg.refine.alpha,
            SpectrumMethod::DenseExact,
        )?;
        all_reports.extend(mono.samples);

        let trajectories = refine_test_set(&params, test_ds, prob, &arm_cfg, &arm_cfg.refine)?;
        let band = band_report_from_trajectories(&trajectories, test_ds)
            .map_err(diag_phase("ablation band ratios"))?;
        let final_k = trajectories.iter().map(|t| t.len() - 1).min().unwrap_or(0);
        lows.push(band.ratio(final_k, Band::Low).unwrap_or(f64::NAN));
        mids.push(band.ratio(final_k, Band::Mid).unwrap_or(f64::NAN));
        highs.push(band.ratio(final_k, Band::High).unwrap_or(f64::NAN));
    }
    Ok(AblationArm {
        label: label.to_string(),
        monotonicity: MonotonicitySummary::from_reports(&all_reports),
        band_low: median(&mut lows).unwrap_or(f64::NAN),
        band_mid: median(&mut mids).unwrap_or(f64::NAN),
        band_high: median(&mut highs).unwrap_or(f64::NAN),
    })
}

/// Train paired models differing only in the ablated knob and emit the
/// side-by-side comparison.
pub fn ablation_suite(cfg: &ExperimentConfig) -> Result<AblationReport, ExperimentError> {
    cfg.validate()?;
    let grid = Grid::new(cfg.problem.n).expect("validated");
    let prob = EllipticProblem::new(cfg.problem.eps, grid);
    let (train_ds, test_ds) = data::train_test(&prob, &cfg.data)?;

    let mut arms = Vec::new();
    match cfg.ablate.kind {
        AblationKind::Control => {
            arms.push(run_arm("control_a", cfg, &train_ds, &test_ds, &prob)?);
            arms.push(run_arm("control_b", cfg, &train_ds, &test_ds, &prob)?);
        }
        AblationKind::DeepSupervision => {
            let mut full = cfg.clone();
            full.train.deep_supervision = true;
            arms.push(run_arm("full", &full, &train_ds, &test_ds, &prob)?);
            let mut ablated = cfg.clone();
            ablated.train.deep_supervision = false;
            arms.push(run_arm(
                "no_deep_supervision",
                &ablated,
                &train_ds,
                &test_ds,
                &prob,
            )?);
        }
        AblationKind::Lambda => {
            arms.push(run_arm("progressive", cfg, &train_ds, &test_ds, &prob)?);
            for &lam in &cfg.ablate.fixed_lambdas {
                let mut fixed = cfg.clone();
                fixed.losses.lambda_start = lam;
                fixed.losses.lambda_end = lam;
                arms.push(run_arm(
                    &format!("fixed_{lam}"),
                    &fixed,
                    &train_ds,
                    &test_ds,
                    &prob,
                )?);
            }
        }
    }

    let report = AblationReport {
        kind: cfg.ablate.kind,
        seeds: cfg.ablate.seeds,
        arms,
    };
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("ablation.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    std::fs::write(out.join("ablation.csv"), report.to_csv())?;
    Ok(report)
}
