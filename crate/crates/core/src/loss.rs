//! Training losses: trajectory-averaged spatial error, the progressive
//! frequency-weighted spectral loss, fixed-point regularization, and the
//! total objective with reverse-mode gradients through the unrolled loop.

use crate::field::Field;
use crate::net::{GradAccumulator, MlpParams};
use crate::refine::RefinementTrajectory;
use crate::train::{TrainConfig, TrainError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta_spectral: f64,
    pub beta_fp: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    /// Epochs over which the spectral weight ramps linearly to full strength.
    pub spectral_warmup_epochs: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta_spectral: 0.1,
            beta_fp: 1.0,
            lambda_start: 1.0,
            lambda_end: 2.0,
            spectral_warmup_epochs: 5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), String> {
        if self.beta_spectral < 0.0 || self.beta_fp < 0.0 {
            return Err("losses.beta_spectral and losses.beta_fp must be nonnegative".into());
        }
        if self.lambda_end < self.lambda_start {
            return Err(format!(
                "losses.lambda_end ({}) must be >= losses.lambda_start ({})",
                self.lambda_end, self.lambda_start
            ));
        }
        Ok(())
    }
}

/// Mean-square of a field; the squared norm every loss term is built from.
pub fn mean_square(f: &Field) -> f64 {
    f.values().iter().map(|v| v * v).sum::<f64>() / f.n() as f64
}

fn mean_square_diff(a: &Field, b: &Field) -> f64 {
    debug_assert_eq!(a.grid(), b.grid());
    a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.n() as f64
}

/// Spectral exponent at unrolled step `k` (1-based): linear from
/// `lambda_start` to `lambda_end`; a single step uses `lambda_start`.
pub fn lambda_schedule(k: usize, big_k: usize, weights: &LossWeights) -> f64 {
    debug_assert!(k >= 1 && k <= big_k);
    if big_k <= 1 {
        return weights.lambda_start;
    }
    weights.lambda_start
        + (k - 1) as f64 / (big_k - 1) as f64 * (weights.lambda_end - weights.lambda_start)
}

/// Frequency weight `1 + (|omega| / |omega|_nyq)^lambda`.
pub fn spectral_weight(omega_mag: f64, nyq: f64, lam: f64) -> f64 {
    debug_assert!(omega_mag >= 0.0 && omega_mag <= nyq);
    1.0 + (omega_mag / nyq).powf(lam)
}

/// One step's magnitude-spectrum loss and, when requested, its gradient with
/// respect to the estimate. The sum runs over all n coefficients with folded
/// frequency magnitudes; the mean weight normalizes the schedule out of the
/// loss scale.
fn spectral_step_impl(h: &Field, y: &Field, lam: f64, want_grad: bool) -> (f64, Option<Field>) {
    let grid = h.grid();
    let n = grid.n();
    let nyq = grid.nyquist() as f64;
    let h_hat = h.fft();
    let y_mags = y.fft().magnitudes();

    let rho: Vec<f64> = (0..n)
        .map(|k| spectral_weight(grid.folded(k) as f64, nyq, lam))
        .collect();
    let rho_bar = rho.iter().sum::<f64>() / n as f64;
    let scale = 1.0 / (n as f64 * rho_bar);

    let mut loss = 0.0;
    let mut u = if want_grad {
        Some(vec![Complex64::new(0.0, 0.0); n])
    } else {
        None
    };
    for k in 0..n {
        let c = h_hat.coeffs()[k];
        let mag = c.norm();
        let diff = mag - y_mags[k];
        loss += scale * rho[k] * diff * diff;
        if let Some(u) = u.as_mut() {
            if mag > 0.0 {
                u[k] = c * (2.0 * scale * rho[k] * diff / mag);
            }
        }
    }
    let grad = u.map(|u| {
        // dL/dh_i = Re(sum_k u_k e^{+2 pi i k i / n}) = n * Re(ifft(u))_i.
        let spec = crate::field::Spectrum::new(grid, u).expect("length n by construction");
        let complex = spec.ifft_complex();
        Field::new(grid, complex.iter().map(|c| c.re * n as f64).collect())
            .expect("finite gradient")
    });
    (loss, grad)
}

/// Frequency-weighted magnitude-spectrum loss of one refinement step.
pub fn spectral_loss_step(h: &Field, y: &Field, lam: f64) -> f64 {
    spectral_step_impl(h, y, lam, false).0
}

/// Trajectory-averaged spatial loss; `h_0` is excluded from the average.
pub fn spatial_loss(traj: &RefinementTrajectory, y: &Field) -> f64 {
    assert!(
        traj.len() >= 2,
        "spatial loss needs at least one post-initialization iterate"
    );
    let steps = &traj.iterates[1..];
    steps.iter().map(|h| mean_square_diff(h, y)).sum::<f64>() / steps.len() as f64
}

/// Fixed-point regularizer `|| phi(x, y) ||^2`: the residual correction at
/// the true solution should be zero.
pub fn fixed_point_loss(params: &MlpParams, x: &Field, y: &Field) -> Result<f64, TrainError> {
    Ok(mean_square(&params.eval(x, y)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub spatial: f64,
    pub spectral: f64,
    pub fp: f64,
}

impl LossBreakdown {
    pub(crate) fn add_assign(&mut self, other: &LossBreakdown) {
        self.total += other.total;
        self.spatial += other.spatial;
        self.spectral += other.spectral;
        self.fp += other.fp;
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.total *= s;
        self.spatial *= s;
        self.spectral *= s;
        self.fp *= s;
    }
}

/// Total objective: unrolls K refinement steps from `h0`, accumulates the
/// per-step spatial and spectral terms (every step under deep supervision,
/// only step K otherwise), and adds the fixed-point term once.
pub fn total_loss(
    params: &MlpParams,
    x: &Field,
    y: &Field,
    h0: &Field,
    cfg: &TrainConfig,
    weights: &LossWeights,
) -> Result<LossBreakdown, TrainError> {
    let (breakdown, _) = unroll_loss(params, x, y, h0, cfg, weights, weights.beta_spectral, None)?;
    Ok(breakdown)
}

/// Total objective with gradients accumulated through the unrolled loop.
/// Gradients flow through every `h_k`; `h_0` carries none.
pub fn total_loss_with_grad(
    params: &MlpParams,
    x: &Field,
    y: &Field,
    h0: &Field,
    cfg: &TrainConfig,
    weights: &LossWeights,
    beta_spectral_eff: f64,
) -> Result<(LossBreakdown, GradAccumulator), TrainError> {
    let mut grads = GradAccumulator::zeros_like(params);
    let breakdown =
        total_loss_with_grad_into(params, x, y, h0, cfg, weights, beta_spectral_eff, &mut grads)?;
    Ok((breakdown, grads))
}

/// As [`total_loss_with_grad`] but reusing a caller-owned gradient buffer
/// (zeroed on entry); avoids per-sample allocation in the training loop.
#[allow(clippy::too_many_arguments)]
pub fn total_loss_with_grad_into(
    params: &MlpParams,
    x: &Field,
    y: &Field,
    h0: &Field,
    cfg: &TrainConfig,
    weights: &LossWeights,
    beta_spectral_eff: f64,
    grads: &mut GradAccumulator,
) -> Result<LossBreakdown, TrainError> {
    grads.zero();
    let (breakdown, _) = unroll_loss(
        params,
        x,
        y,
        h0,
        cfg,
        weights,
        beta_spectral_eff,
        Some(grads),
    )?;
    Ok(breakdown)
}

#[allow(clippy::too_many_arguments)]
fn unroll_loss(
    params: &MlpParams,
    x: &Field,
    y: &Field,
    h0: &Field,
    cfg: &TrainConfig,
    weights: &LossWeights,
    beta_spectral_eff: f64,
    want_grads: Option<&mut GradAccumulator>,
) -> Result<(LossBreakdown, ()), TrainError> {
    let big_k = cfg.k;
    let alpha = cfg.alpha;
    let n = h0.n() as f64;

    let mut tapes = Vec::with_capacity(big_k);
    let mut iterates = Vec::with_capacity(big_k + 1);
    iterates.push(h0.clone());
    for k in 1..=big_k {
        let (phi, tape) = params.forward(x, &iterates[k - 1])?;
        let next = iterates[k - 1].add_scaled(alpha, &phi)?;
        if !next.is_finite() {
            return Err(TrainError::Diverged { step: k });
        }
        tapes.push(tape);
        iterates.push(next);
    }

    let contributes = |k: usize| cfg.deep_supervision || k == big_k;
    let denom = if cfg.deep_supervision { big_k as f64 } else { 1.0 };

    let mut spatial = 0.0;
    let mut spectral = 0.0;
    let mut step_grads: Vec<Option<Field>> = vec![None; big_k + 1];
    for k in 1..=big_k {
        if !contributes(k) {
            continue;
        }
        let h_k = &iterates[k];
        let lam = lambda_schedule(k, big_k, weights);
        spatial += mean_square_diff(h_k, y) / denom;
        let (sl, sg) = spectral_step_impl(h_k, y, lam, want_grads.is_some());
        spectral += sl / denom;
        if want_grads.is_some() {
            // Direct gradient of this step's loss terms with respect to h_k.
            let diff = h_k.sub(y)?.scale(2.0 / (n * denom));
            let spectral_part = sg.expect("gradient requested").scale(beta_spectral_eff / denom);
            step_grads[k] = Some(diff.add(&spectral_part)?);
        }
    }

    let (phi_y, tape_y) = params.forward(x, y)?;
    let fp = mean_square(&phi_y);
    let total = spatial + beta_spectral_eff * spectral + weights.beta_fp * fp;
    let breakdown = LossBreakdown {
        total,
        spatial,
        spectral,
        fp,
    };

    let Some(grads) = want_grads else {
        return Ok((breakdown, ()));
    };

    let mut g = Field::zeros(h0.grid());
    for k in (1..=big_k).rev() {
        if let Some(direct) = &step_grads[k] {
            g = g.add(direct)?;
        }
        let (_, hg) = params.backward_into(&tapes[k - 1], &g.scale(alpha), grads);
        g = g.add(&hg)?;
    }
    // g now holds the gradient with respect to h_0, which carries none.

    params.backward_into(&tape_y, &phi_y.scale(weights.beta_fp * 2.0 / n), grads);

    Ok((breakdown, ()))
}
