//! Mini-batch trainer: AdamW with decoupled weight decay, global gradient
//! clipping, cosine learning-rate schedule, and spectral-weight warm-up.
//! The per-epoch shuffle and every reduction are order-fixed, so runs are
//! bit-reproducible for any thread count.

use crate::base::BaseOperatorSpec;
use crate::base::EllipticProblem;
use crate::field::Field;
use crate::loss::{total_loss_with_grad_into, LossBreakdown, LossWeights};
use crate::net::{GradAccumulator, MlpParams, NetError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("unrolled refinement diverged at step {step}")]
    Diverged { step: usize },
    #[error("non-finite gradient in epoch {epoch}, batch {batch}")]
    NonFiniteGradient { epoch: usize, batch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "min_lr")]
pub enum LrSchedule {
    Constant,
    /// Cosine annealing from the base rate down to `min_lr` over the epochs.
    Cosine(f64),
}

/// Architecture and initialization of the refinement network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub init_gain: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden_dim: 256,
            init_gain: 0.1,
            seed: 0,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden_dim == 0 {
            return Err("model.hidden_dim must be positive".into());
        }
        if self.init_gain < 0.0 {
            return Err("model.init_gain must be nonnegative".into());
        }
        Ok(())
    }

    pub fn init(&self, n: usize) -> MlpParams {
        MlpParams::xavier_init(self.seed, self.hidden_dim, n, self.init_gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Unroll horizon K.
    pub k: usize,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    /// Supervise every unrolled step; `false` is the final-step-only ablation.
    pub deep_supervision: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 4,
            alpha: 0.2,
            epochs: 100,
            batch_size: 16,
            lr: 3e-4,
            weight_decay: 1e-5,
            grad_clip: 1.0,
            lr_schedule: LrSchedule::Cosine(1e-6),
            seed: 0,
            deep_supervision: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k < 1 {
            return Err("train.k must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("train.alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return Err("train.batch_size must be positive".into());
        }
        if !(self.grad_clip > 0.0) {
            return Err("train.grad_clip must be positive".into());
        }
        if self.lr < 0.0 || self.weight_decay < 0.0 {
            return Err("train.lr and train.weight_decay must be nonnegative".into());
        }
        if let LrSchedule::Cosine(min_lr) = self.lr_schedule {
            if min_lr < 0.0 || min_lr > self.lr {
                return Err("train.lr_schedule cosine min_lr must lie in [0, lr]".into());
            }
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine(min_lr) => {
                if self.epochs <= 1 {
                    self.lr
                } else {
                    let progress = (epoch - 1) as f64 / (self.epochs - 1) as f64;
                    min_lr + 0.5 * (self.lr - min_lr) * (1.0 + (PI * progress).cos())
                }
            }
        }
    }
}

/// Spectral weight after warm-up scaling at a 1-based epoch index:
/// `beta_spectral * min(1, epoch / warmup_epochs)`.
pub fn effective_beta_spectral(weights: &LossWeights, epoch: usize) -> f64 {
    if weights.spectral_warmup_epochs == 0 {
        return weights.beta_spectral;
    }
    weights.beta_spectral * (epoch as f64 / weights.spectral_warmup_epochs as f64).min(1.0)
}

/// Adam moments with a step counter, shape-congruent with the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    first: GradAccumulator,
    second: GradAccumulator,
    step: u64,
}

impl OptimizerState {
    pub fn new(params: &MlpParams) -> Self {
        OptimizerState {
            first: GradAccumulator::zeros_like(params),
            second: GradAccumulator::zeros_like(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW update. Clips the global gradient norm to `grad_clip` before the
/// moment update and applies decoupled weight decay. Returns the pre-clip
/// gradient norm.
pub fn optimizer_step(
    state: &mut OptimizerState,
    params: &mut MlpParams,
    grads: &GradAccumulator,
    lr: f64,
    weight_decay: f64,
    grad_clip: f64,
) -> Result<f64, TrainError> {
    if !grads.all_finite() {
        return Err(TrainError::NonFiniteGradient { epoch: 0, batch: 0 });
    }
    let norm = grads.global_norm();
    let clip_scale = if norm > grad_clip { grad_clip / norm } else { 1.0 };

    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);

    for (li, layer) in params.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut state.first.layers[li];
        let v = &mut state.second.layers[li];
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            let g = g * clip_scale;
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS) + lr * weight_decay * *p;
        };
        for i in 0..layer.weight.len() {
            update(&mut layer.weight[i], g.weight[i], &mut m.weight[i], &mut v.weight[i]);
        }
        for i in 0..layer.bias.len() {
            update(&mut layer.bias[i], g.bias[i], &mut m.bias[i], &mut v.bias[i]);
        }
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub spatial: f64,
    pub spectral: f64,
    pub fp: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,L_total,L_spatial,L_spectral,L_fp,lr,grad_norm\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.epoch, e.total, e.spatial, e.spectral, e.fp, e.lr, e.grad_norm
            );
        }
        out
    }
}

/// Pairwise reduction in a fixed tree, in place: the sum lands in slot 0.
/// The tree shape depends only on the length, so results are deterministic
/// for any thread count.
fn tree_reduce_in_place(slots: &mut [GradAccumulator]) {
    if slots.len() <= 1 {
        return;
    }
    let mid = slots.len().div_ceil(2);
    let (a, b) = slots.split_at_mut(mid);
    tree_reduce_in_place(a);
    tree_reduce_in_place(b);
    a[0].add_assign(&b[0]);
}

/// Train the refinement operator on `(x, y)` pairs: base prediction without
/// gradient, K unrolled steps with per-step loss accumulation, fixed-point
/// term added once, AdamW update per mini-batch.
pub fn train(
    dataset: &[(Field, Field)],
    base: &BaseOperatorSpec,
    prob: &EllipticProblem,
    model: &ModelSpec,
    cfg: &TrainConfig,
    weights: &LossWeights,
) -> Result<(MlpParams, TrainingLog), TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    model.validate().map_err(TrainError::Config)?;
    weights.validate().map_err(TrainError::Config)?;
    if dataset.is_empty() {
        return Err(TrainError::Config("dataset is empty".into()));
    }

    let n = prob.grid.n();
    let mut params = model.init(n);
    let mut opt = OptimizerState::new(&params);
    let mut log = TrainingLog::default();

    // Base predictions are fixed inputs to the unroll and carry no gradient.
    let h0s: Vec<Field> = dataset
        .iter()
        .map(|(x, _)| base.predict(prob, x))
        .collect::<Result<_, _>>()?;

    // Per-sample gradient buffers, reused across every batch.
    let mut slots: Vec<GradAccumulator> = (0..cfg.batch_size.min(dataset.len()))
        .map(|_| GradAccumulator::zeros_like(&params))
        .collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let beta_eff = effective_beta_spectral(weights, epoch);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = LossBreakdown::default();
        let mut grad_norm_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let used = chunk.len();
            let breakdowns: Vec<Result<LossBreakdown, TrainError>> = chunk
                .par_iter()
                .zip(slots[..used].par_iter_mut())
                .map(|(&i, slot)| {
                    let (x, y) = &dataset[i];
                    total_loss_with_grad_into(&params, x, y, &h0s[i], cfg, weights, beta_eff, slot)
                })
                .collect();

            let mut batch_loss = LossBreakdown::default();
            for b in breakdowns {
                batch_loss.add_assign(&b?);
            }
            tree_reduce_in_place(&mut slots[..used]);
            let inv = 1.0 / used as f64;
            slots[0].scale(inv);
            if !slots[0].all_finite() {
                return Err(TrainError::NonFiniteGradient {
                    epoch,
                    batch: batch_idx,
                });
            }

            grad_norm_sum += optimizer_step(
                &mut opt,
                &mut params,
                &slots[0],
                lr,
                cfg.weight_decay,
                cfg.grad_clip,
            )?;
            loss_sum.add_assign(&batch_loss);
            batches += 1;
        }

        loss_sum.scale(1.0 / dataset.len() as f64);
        log.epochs.push(EpochStats {
            epoch,
            total: loss_sum.total,
            spatial: loss_sum.spatial,
            spectral: loss_sum.spectral,
            fp: loss_sum.fp,
            lr,
            grad_norm: grad_norm_sum / batches.max(1) as f64,
        });
    }

    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn tiny_dataset(g: Grid, count: usize) -> Vec<(Field, Field)> {
        let prob = EllipticProblem::new(0.3, g);
        (0..count)
            .map(|i| {
                let x = Field::from_fn(g, |s| {
                    ((s as f64 + 1.0) * (i as f64 * 0.7 + 0.5)).sin().tanh()
                })
                .unwrap();
                let y = prob.solve_exact(&x).unwrap();
                (x, y)
            })
            .collect()
    }

    fn tiny_setup() -> (EllipticProblem, BaseOperatorSpec, ModelSpec, TrainConfig) {
        let g = grid(8);
        let prob = EllipticProblem::new(0.3, g);
        let base = BaseOperatorSpec {
            kind: crate::base::BaseKind::Truncated,
            cutoff_fraction: 0.5,
            noise_amp: 0.0,
            seed: 3,
        };
        let model = ModelSpec {
            hidden_dim: 8,
            init_gain: 0.1,
            seed: 1,
        };
        let cfg = TrainConfig {
            k: 2,
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        (prob, base, model, cfg)
    }

    #[test]
    fn optimizer_zero_grads_and_zero_lr_leave_params() {
        let params0 = MlpParams::xavier_init(2, 4, 8, 0.1);

        let mut params = params0.clone();
        let mut opt = OptimizerState::new(&params);
        let grads = GradAccumulator::zeros_like(&params);
        optimizer_step(&mut opt, &mut params, &grads, 1e-3, 0.0, 1.0).unwrap();
        assert_eq!(params, params0);

        let mut params = params0.clone();
        let mut opt = OptimizerState::new(&params);
        let mut grads = GradAccumulator::zeros_like(&params);
        grads.layers[0].weight[0] = 0.5;
        optimizer_step(&mut opt, &mut params, &grads, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(params, params0);
    }

    #[test]
    fn optimizer_first_step_magnitude() {
        // A single unit gradient entry moves its parameter by
        // lr / (1 + eps) on the first bias-corrected step.
        let mut params = MlpParams::xavier_init(2, 4, 8, 0.1);
        let before = params.layers()[0].weight[5];
        let mut opt = OptimizerState::new(&params);
        let mut grads = GradAccumulator::zeros_like(&params);
        grads.layers[0].weight[5] = 1.0;
        optimizer_step(&mut opt, &mut params, &grads, 1e-3, 0.0, 10.0).unwrap();
        let delta = before - params.layers()[0].weight[5];
        assert!((delta - 1e-3 / (1.0 + 1e-8)).abs() < 1e-12);
        // Untouched entries stay put without weight decay.
        assert_eq!(params.layers()[0].weight[6], {
            let p0 = MlpParams::xavier_init(2, 4, 8, 0.1);
            p0.layers()[0].weight[6]
        });
    }

    #[test]
    fn optimizer_rejects_non_finite_grads() {
        let mut params = MlpParams::xavier_init(2, 4, 8, 0.1);
        let mut opt = OptimizerState::new(&params);
        let mut grads = GradAccumulator::zeros_like(&params);
        grads.layers[0].weight[0] = f64::NAN;
        assert!(optimizer_step(&mut opt, &mut params, &grads, 1e-3, 0.0, 1.0).is_err());
    }

    #[test]
    fn clipping_bounds_applied_norm() {
        let mut params = MlpParams::xavier_init(2, 4, 8, 0.0);
        let mut opt = OptimizerState::new(&params);
        let mut grads = GradAccumulator::zeros_like(&params);
        for w in grads.layers[0].weight.iter_mut() {
            *w = 100.0;
        }
        let pre_clip = grads.global_norm();
        let returned = optimizer_step(&mut opt, &mut params, &grads, 1e-3, 0.0, 1.0).unwrap();
        assert!((returned - pre_clip).abs() < 1e-9);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (prob, base, model, mut cfg) = tiny_setup();
        cfg.epochs = 0;
        let data = tiny_dataset(prob.grid, 4);
        let (params, log) = train(&data, &base, &prob, &model, &cfg, &LossWeights::default())
            .unwrap();
        assert_eq!(params, model.init(8));
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn zero_lr_freezes_params_and_losses() {
        let (prob, base, model, mut cfg) = tiny_setup();
        cfg.lr = 0.0;
        cfg.lr_schedule = LrSchedule::Constant;
        cfg.epochs = 5;
        let mut weights = LossWeights::default();
        weights.spectral_warmup_epochs = 0;
        let data = tiny_dataset(prob.grid, 4);
        let (params, log) = train(&data, &base, &prob, &model, &cfg, &weights).unwrap();
        assert_eq!(params, model.init(8));
        let first = log.epochs.first().unwrap().total;
        for e in &log.epochs {
            assert!((e.total - first).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_dataset_is_config_error() {
        let (prob, base, model, cfg) = tiny_setup();
        let err = train(&[], &base, &prob, &model, &cfg, &LossWeights::default());
        assert!(matches!(err, Err(TrainError::Config(_))));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (prob, base, model, cfg) = tiny_setup();
        let data = tiny_dataset(prob.grid, 6);
        let w = LossWeights::default();
        let (p1, l1) = train(&data, &base, &prob, &model, &cfg, &w).unwrap();
        let (p2, l2) = train(&data, &base, &prob, &model, &cfg, &w).unwrap();
        assert_eq!(p1, p2);
        for (a, b) in l1.epochs.iter().zip(l2.epochs.iter()) {
            assert_eq!(a.total.to_bits(), b.total.to_bits());
        }
    }

    #[test]
    fn fixed_point_term_decreases_on_linear_toy() {
        let (prob, base, mut model, mut cfg) = tiny_setup();
        // A loud initialization gives the fixed-point term something to shed.
        model.init_gain = 1.0;
        cfg.epochs = 200;
        cfg.lr_schedule = LrSchedule::Constant;
        let data = tiny_dataset(prob.grid, 4);
        let (_, log) = train(&data, &base, &prob, &model, &cfg, &LossWeights::default()).unwrap();
        let first = log.epochs.first().unwrap().fp;
        let last = log.epochs.last().unwrap().fp;
        assert!(last < first, "L_fp should decrease: {first} -> {last}");
    }

    #[test]
    fn descent_sanity_on_fixed_batch() {
        let g = grid(8);
        let prob = EllipticProblem::new(0.3, g);
        let data = tiny_dataset(g, 2);
        let base = BaseOperatorSpec::exact();
        let model = ModelSpec {
            hidden_dim: 8,
            init_gain: 0.3,
            seed: 7,
        };
        let cfg = TrainConfig {
            k: 2,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let weights = LossWeights::default();
        let mut params = model.init(8);
        let mut opt = OptimizerState::new(&params);
        let h0s: Vec<Field> = data.iter().map(|(x, _)| base.predict(&prob, x).unwrap()).collect();

        let batch_loss = |params: &MlpParams| -> f64 {
            data.iter()
                .zip(h0s.iter())
                .map(|((x, y), h0)| {
                    crate::loss::total_loss(params, x, y, h0, &cfg, &weights)
                        .unwrap()
                        .total
                })
                .sum::<f64>()
                / data.len() as f64
        };

        let mut prev = batch_loss(&params);
        for _ in 0..10 {
            let mut grads_list: Vec<GradAccumulator> = data
                .iter()
                .zip(h0s.iter())
                .map(|((x, y), h0)| {
                    crate::loss::total_loss_with_grad(
                        &params,
                        x,
                        y,
                        h0,
                        &cfg,
                        &weights,
                        weights.beta_spectral,
                    )
                    .unwrap()
                    .1
                })
                .collect();
            tree_reduce_in_place(&mut grads_list);
            let mut grads = grads_list.swap_remove(0);
            grads.scale(1.0 / data.len() as f64);
            optimizer_step(&mut opt, &mut params, &grads, 1e-6, 0.0, 1e9).unwrap();
            let cur = batch_loss(&params);
            assert!(cur <= prev + 1e-12, "loss increased: {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn warmup_scales_spectral_weight() {
        let w = LossWeights {
            beta_spectral: 0.4,
            spectral_warmup_epochs: 5,
            ..LossWeights::default()
        };
        assert!((effective_beta_spectral(&w, 1) - 0.08).abs() < 1e-15);
        assert!((effective_beta_spectral(&w, 5) - 0.4).abs() < 1e-15);
        assert!((effective_beta_spectral(&w, 50) - 0.4).abs() < 1e-15);
        let none = LossWeights {
            beta_spectral: 0.4,
            spectral_warmup_epochs: 0,
            ..LossWeights::default()
        };
        assert_eq!(effective_beta_spectral(&none, 1), 0.4);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = TrainConfig {
            epochs: 11,
            lr: 1e-3,
            lr_schedule: LrSchedule::Cosine(1e-6),
            ..TrainConfig::default()
        };
        assert!((cfg.lr_at(1) - 1e-3).abs() < 1e-18);
        assert!((cfg.lr_at(11) - 1e-6).abs() < 1e-18);
        assert!(cfg.lr_at(6) < 1e-3 && cfg.lr_at(6) > 1e-6);
    }
}
