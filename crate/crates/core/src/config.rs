//! Experiment configuration: a flat, diff-friendly `section.key = value`
//! text format with comments, full defaults, and exact round-tripping.

use crate::base::{BaseKind, BaseOperatorSpec};
use crate::loss::LossWeights;
use crate::refine::{AlphaSchedule, RefineConfig};
use crate::train::{LrSchedule, ModelSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': {msg}")]
    BadValue { key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsFamily {
    /// Saturated cosine profiles with a smooth low-mode perturbation.
    Tanh,
    /// Power-law spectra with seeded Gaussian amplitudes and random phases.
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub eps: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub rhs_family: RhsFamily,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsToggles {
    pub monotonicity: bool,
    pub bias_error: bool,
    pub band_ratios: bool,
    pub recursion_fit: bool,
    /// Step sizes for the stability sweep; empty disables it.
    pub step_size_sweep: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    /// Two identical arms; a determinism control.
    Control,
    DeepSupervision,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub kind: AblationKind,
    /// Fixed spectral exponents compared against the progressive schedule.
    pub fixed_lambdas: Vec<f64>,
    /// Number of training seeds aggregated per arm.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub data: DataSpec,
    pub base: BaseOperatorSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub losses: LossWeights,
    pub refine: RefineConfig,
    pub diagnostics: DiagnosticsToggles,
    pub ablate: AblationSpec,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSpec { eps: 0.3, n: 128 },
            data: DataSpec {
                n_train: 512,
                n_test: 200,
                rhs_family: RhsFamily::Tanh,
                seed: 7,
            },
            base: BaseOperatorSpec {
                kind: BaseKind::Truncated,
                cutoff_fraction: 0.25,
                noise_amp: 0.05,
                seed: 11,
            },
            model: ModelSpec {
                hidden_dim: 256,
                init_gain: 0.1,
                seed: 1,
            },
            train: TrainConfig::default(),
            losses: LossWeights::default(),
            refine: RefineConfig {
                alpha: 0.2,
                k_max: 12,
                stop_threshold: 0.0,
                alpha_schedule: AlphaSchedule::Constant,
            },
            diagnostics: DiagnosticsToggles {
                monotonicity: true,
                bias_error: true,
                band_ratios: true,
                recursion_fit: true,
                step_size_sweep: Vec::new(),
            },
            ablate: AblationSpec {
                kind: AblationKind::DeepSupervision,
                fixed_lambdas: vec![1.0, 2.0],
                seeds: 3,
            },
            output_dir: "runs/desk".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        msg: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            msg: format!("expected true/false, got '{value}'"),
        }),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| parse_num::<f64>(key, s.trim()))
        .collect()
}

fn list_to_string(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse call-style values like `cosine(1e-6)` into (name, inner).
fn parse_call(value: &str) -> (&str, Option<&str>) {
    match (value.find('('), value.ends_with(')')) {
        (Some(open), true) => (&value[..open], Some(&value[open + 1..value.len() - 1])),
        _ => (value, None),
    }
}

impl ExperimentConfig {
    /// Apply one `section.key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "problem.eps" => self.problem.eps = parse_num(key, value)?,
            "problem.n" => self.problem.n = parse_num(key, value)?,
            "data.n_train" => self.data.n_train = parse_num(key, value)?,
            "data.n_test" => self.data.n_test = parse_num(key, value)?,
            "data.rhs_family" => {
                self.data.rhs_family = match value {
                    "tanh" => RhsFamily::Tanh,
                    "fourier" => RhsFamily::Fourier,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            msg: format!("expected tanh or fourier, got '{value}'"),
                        })
                    }
                }
            }
            "data.seed" => self.data.seed = parse_num(key, value)?,
            "base.kind" => {
                self.base.kind = match value {
                    "exact" => BaseKind::Exact,
                    "truncated" => BaseKind::Truncated,
                    "zero" => BaseKind::Zero,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            msg: format!("expected exact, truncated or zero, got '{value}'"),
                        })
                    }
                }
            }
            "base.cutoff_fraction" => self.base.cutoff_fraction = parse_num(key, value)?,
            "base.noise_amp" => self.base.noise_amp = parse_num(key, value)?,
            "base.seed" => self.base.seed = parse_num(key, value)?,
            "model.hidden_dim" => self.model.hidden_dim = parse_num(key, value)?,
            "model.init_gain" => self.model.init_gain = parse_num(key, value)?,
            "model.seed" => self.model.seed = parse_num(key, value)?,
            "train.k" => self.train.k = parse_num(key, value)?,
            "train.alpha" => self.train.alpha = parse_num(key, value)?,
            "train.epochs" => self.train.epochs = parse_num(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_num(key, value)?,
            "train.lr" => self.train.lr = parse_num(key, value)?,
            "train.weight_decay" => self.train.weight_decay = parse_num(key, value)?,
            "train.grad_clip" => self.train.grad_clip = parse_num(key, value)?,
            "train.lr_schedule" => {
                self.train.lr_schedule = match parse_call(value) {
                    ("constant", None) => LrSchedule::Constant,
                    ("cosine", Some(min)) => LrSchedule::Cosine(parse_num(key, min)?),
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            msg: format!("expected constant or cosine(min_lr), got '{value}'"),
                        })
                    }
                }
            }
            "train.seed" => self.train.seed = parse_num(key, value)?,
            "train.deep_supervision" => self.train.deep_supervision = parse_bool(key, value)?,
            "losses.beta_spectral" => self.losses.beta_spectral = parse_num(key, value)?,
            "losses.beta_fp" => self.losses.beta_fp = parse_num(key, value)?,
            "losses.lambda_start" => self.losses.lambda_start = parse_num(key, value)?,
            "losses.lambda_end" => self.losses.lambda_end = parse_num(key, value)?,
            "losses.spectral_warmup_epochs" => {
                self.losses.spectral_warmup_epochs = parse_num(key, value)?
            }
            "refine.alpha" => self.refine.alpha = parse_num(key, value)?,
            "refine.k_max" => self.refine.k_max = parse_num(key, value)?,
            "refine.stop_threshold" => self.refine.stop_threshold = parse_num(key, value)?,
            "refine.alpha_schedule" => {
                self.refine.alpha_schedule = match parse_call(value) {
                    ("constant", None) => AlphaSchedule::Constant,
                    ("decay", Some(rate)) => AlphaSchedule::Decay(parse_num(key, rate)?),
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            msg: format!("expected constant or decay(rate), got '{value}'"),
                        })
                    }
                }
            }
            "diagnostics.monotonicity" => self.diagnostics.monotonicity = parse_bool(key, value)?,
            "diagnostics.bias_error" => self.diagnostics.bias_error = parse_bool(key, value)?,
            "diagnostics.band_ratios" => self.diagnostics.band_ratios = parse_bool(key, value)?,
            "diagnostics.recursion_fit" => {
                self.diagnostics.recursion_fit = parse_bool(key, value)?
            }
            "diagnostics.step_size_sweep" => {
                self.diagnostics.step_size_sweep = parse_list(key, value)?
            }
            "ablate.kind" => {
                self.ablate.kind = match value {
                    "control" => AblationKind::Control,
                    "deep_supervision" => AblationKind::DeepSupervision,
                    "lambda" => AblationKind::Lambda,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            msg: format!(
                                "expected control, deep_supervision or lambda, got '{value}'"
                            ),
                        })
                    }
                }
            }
            "ablate.fixed_lambdas" => self.ablate.fixed_lambdas = parse_list(key, value)?,
            "ablate.seeds" => self.ablate.seeds = parse_num(key, value)?,
            "output_dir" => self.output_dir = value.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Parse a full config document on top of the defaults. Lines are
    /// `key = value`; `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: idx + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ConfigError::Parse {
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(cfg)
    }

    /// Canonical text form; `parse(serialize(cfg)) == cfg`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem.eps", self.problem.eps.to_string());
        kv("problem.n", self.problem.n.to_string());
        kv("data.n_train", self.data.n_train.to_string());
        kv("data.n_test", self.data.n_test.to_string());
        kv(
            "data.rhs_family",
            match self.data.rhs_family {
                RhsFamily::Tanh => "tanh".into(),
                RhsFamily::Fourier => "fourier".into(),
            },
        );
        kv("data.seed", self.data.seed.to_string());
        kv(
            "base.kind",
            match self.base.kind {
                BaseKind::Exact => "exact".into(),
                BaseKind::Truncated => "truncated".into(),
                BaseKind::Zero => "zero".into(),
            },
        );
        kv("base.cutoff_fraction", self.base.cutoff_fraction.to_string());
        kv("base.noise_amp", self.base.noise_amp.to_string());
        kv("base.seed", self.base.seed.to_string());
        kv("model.hidden_dim", self.model.hidden_dim.to_string());
        kv("model.init_gain", self.model.init_gain.to_string());
        kv("model.seed", self.model.seed.to_string());
        kv("train.k", self.train.k.to_string());
        kv("train.alpha", self.train.alpha.to_string());
        kv("train.epochs", self.train.epochs.to_string());
        kv("train.batch_size", self.train.batch_size.to_string());
        kv("train.lr", self.train.lr.to_string());
        kv("train.weight_decay", self.train.weight_decay.to_string());
        kv("train.grad_clip", self.train.grad_clip.to_string());
        kv(
            "train.lr_schedule",
            match self.train.lr_schedule {
                LrSchedule::Constant => "constant".into(),
                LrSchedule::Cosine(min) => format!("cosine({min})"),
            },
        );
        kv("train.seed", self.train.seed.to_string());
        kv(
            "train.deep_supervision",
            self.train.deep_supervision.to_string(),
        );
        kv("losses.beta_spectral", self.losses.beta_spectral.to_string());
        kv("losses.beta_fp", self.losses.beta_fp.to_string());
        kv("losses.lambda_start", self.losses.lambda_start.to_string());
        kv("losses.lambda_end", self.losses.lambda_end.to_string());
        kv(
            "losses.spectral_warmup_epochs",
            self.losses.spectral_warmup_epochs.to_string(),
        );
        kv("refine.alpha", self.refine.alpha.to_string());
        kv("refine.k_max", self.refine.k_max.to_string());
        kv("refine.stop_threshold", self.refine.stop_threshold.to_string());
        kv(
            "refine.alpha_schedule",
            match self.refine.alpha_schedule {
                AlphaSchedule::Constant => "constant".into(),
                AlphaSchedule::Decay(rate) => format!("decay({rate})"),
            },
        );
        kv(
            "diagnostics.monotonicity",
            self.diagnostics.monotonicity.to_string(),
        );
        kv("diagnostics.bias_error", self.diagnostics.bias_error.to_string());
        kv(
            "diagnostics.band_ratios",
            self.diagnostics.band_ratios.to_string(),
        );
        kv(
            "diagnostics.recursion_fit",
            self.diagnostics.recursion_fit.to_string(),
        );
        kv(
            "diagnostics.step_size_sweep",
            list_to_string(&self.diagnostics.step_size_sweep),
        );
        kv(
            "ablate.kind",
            match self.ablate.kind {
                AblationKind::Control => "control".into(),
                AblationKind::DeepSupervision => "deep_supervision".into(),
                AblationKind::Lambda => "lambda".into(),
            },
        );
        kv(
            "ablate.fixed_lambdas",
            list_to_string(&self.ablate.fixed_lambdas),
        );
        kv("ablate.seeds", self.ablate.seeds.to_string());
        kv("output_dir", self.output_dir.clone());
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.n < 4 || !self.problem.n.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "problem.n must be a power of two >= 4, got {}",
                self.problem.n
            )));
        }
        if self.problem.eps < 0.0 {
            return Err(ConfigError::Invalid("problem.eps must be nonnegative".into()));
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(ConfigError::Invalid(
                "data.n_train and data.n_test must be positive".into(),
            ));
        }
        self.base.validate().map_err(ConfigError::Invalid)?;
        self.model.validate().map_err(ConfigError::Invalid)?;
        self.train.validate().map_err(ConfigError::Invalid)?;
        self.losses.validate().map_err(ConfigError::Invalid)?;
        self.refine.validate().map_err(ConfigError::Invalid)?;
        for a in &self.diagnostics.step_size_sweep {
            if !(*a > 0.0 && *a <= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "diagnostics.step_size_sweep entries must lie in (0, 1], got {a}"
                )));
            }
        }
        if self.ablate.seeds == 0 {
            return Err(ConfigError::Invalid("ablate.seeds must be positive".into()));
        }
        if self.output_dir.is_empty() {
            return Err(ConfigError::Invalid("output_dir must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_default_and_modified() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.serialize()).unwrap(), cfg);

        let mut cfg = ExperimentConfig::default();
        cfg.set("problem.eps", "0.7").unwrap();
        cfg.set("train.lr_schedule", "constant").unwrap();
        cfg.set("refine.alpha_schedule", "decay(0.9)").unwrap();
        cfg.set("diagnostics.step_size_sweep", "0.05,0.2,0.6").unwrap();
        cfg.set("data.rhs_family", "fourier").unwrap();
        cfg.set("base.kind", "zero").unwrap();
        cfg.set("train.deep_supervision", "false").unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn parse_with_comments_and_blank_lines() {
        let text = "\n# a comment\nproblem.eps = 0.5  # trailing comment\n\ntrain.k = 6\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.problem.eps, 0.5);
        assert_eq!(cfg.train.k, 6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::parse("no.such.key = 1"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("problem.n", "hello").is_err());
        assert!(cfg.set("train.lr_schedule", "sawtooth").is_err());
        assert!(cfg.set("data.rhs_family", "sine").is_err());
    }

    #[test]
    fn validation_catches_semantic_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.problem.n = 100;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.base.cutoff_fraction = 2.0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.diagnostics.step_size_sweep = vec![0.2, 1.4];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.train.alpha = 0.0;
        assert!(cfg.validate().is_err());
    }
}
