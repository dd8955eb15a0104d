//! Inference-time fixed-point refinement `h_{k+1} = h_k + alpha * phi(x, h_k)`
//! with trajectory recording, adaptive stopping, and divergence guards.

use crate::field::Field;
use crate::net::{MlpParams, NetError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Iterate-norm blowup factor that trips the divergence guard.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("refinement update produced a non-finite value")]
    NonFiniteUpdate,
    #[error("refinement diverged at step {step}")]
    Diverged {
        step: usize,
        partial: RefinementTrajectory,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "rate")]
pub enum AlphaSchedule {
    Constant,
    /// `alpha_k = alpha * rate^k`; the long-horizon divergence guard.
    Decay(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub alpha: f64,
    pub k_max: usize,
    /// Stop once `|| phi(x, h_k) ||` falls below this; 0 disables.
    pub stop_threshold: f64,
    pub alpha_schedule: AlphaSchedule,
}

impl RefineConfig {
    pub fn constant(alpha: f64, k_max: usize) -> Self {
        RefineConfig {
            alpha,
            k_max,
            stop_threshold: 0.0,
            alpha_schedule: AlphaSchedule::Constant,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("refine.alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.stop_threshold < 0.0 {
            return Err("refine.stop_threshold must be nonnegative".into());
        }
        if let AlphaSchedule::Decay(rate) = self.alpha_schedule {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(format!("refine.alpha_schedule decay rate must lie in (0, 1], got {rate}"));
            }
        }
        Ok(())
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        match self.alpha_schedule {
            AlphaSchedule::Constant => self.alpha,
            AlphaSchedule::Decay(rate) => self.alpha * rate.powi(k as i32),
        }
    }
}

/// Recorded iterates `h_0..h_k` with per-step update norms and, when the
/// target is supplied, per-iterate error norms.
#[derive(Debug, Clone)]
pub struct RefinementTrajectory {
    pub iterates: Vec<Field>,
    /// `|| phi(x, h_k) ||` for each applied step; length `iterates.len() - 1`.
    pub update_norms: Vec<f64>,
    /// `|| y - h_k ||` per iterate, present iff `y` was supplied.
    pub error_norms: Option<Vec<f64>>,
    pub stopped_early: bool,
}

impl RefinementTrajectory {
    pub fn last(&self) -> &Field {
        self.iterates.last().expect("trajectory holds h_0")
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn min_error(&self) -> Option<f64> {
        self.error_norms
            .as_ref()
            .map(|e| e.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// CSV rows `(k, update_norm, error_norm, vrmse)`, one per iterate. The
    /// update norm on row k is the step taken from `h_k`; the final iterate
    /// has none. Error and VRMSE columns are empty without a target.
    pub fn to_csv(&self, y: Option<&Field>) -> String {
        let mut out = String::from("k,update_norm,error_norm,vrmse\n");
        for (k, h) in self.iterates.iter().enumerate() {
            let un = self
                .update_norms
                .get(k)
                .map(|u| format!("{u:.16e}"))
                .unwrap_or_default();
            let en = self
                .error_norms
                .as_ref()
                .and_then(|e| e.get(k))
                .map(|e| format!("{e:.16e}"))
                .unwrap_or_default();
            let vr = y
                .map(|y| format!("{:.16e}", crate::diag::metrics::vrmse(h, y)))
                .unwrap_or_default();
            let _ = writeln!(out, "{k},{un},{en},{vr}");
        }
        out
    }
}

/// One refinement step `h + alpha * phi(x, h)`.
pub fn refine_step(
    params: &MlpParams,
    x: &Field,
    h: &Field,
    alpha: f64,
) -> Result<Field, RefineError> {
    let phi = params.eval(x, h)?;
    let next = h.add_scaled(alpha, &phi)?;
    if !next.is_finite() {
        return Err(RefineError::NonFiniteUpdate);
    }
    Ok(next)
}

/// Run the fixed-point iteration from `h0` until `k_max` steps or the adaptive
/// stop fires. Supplying `y` only adds error bookkeeping; the iterates are
/// identical either way. Never mutates `params`.
pub fn run_refinement(
    params: &MlpParams,
    x: &Field,
    h0: &Field,
    cfg: &RefineConfig,
    y: Option<&Field>,
) -> Result<RefinementTrajectory, RefineError> {
    let err_of = |h: &Field| y.map(|y| y.sub(h).expect("same grid").l2_norm());
    let mut traj = RefinementTrajectory {
        iterates: vec![h0.clone()],
        update_norms: Vec::new(),
        error_norms: err_of(h0).map(|e| vec![e]),
        stopped_early: false,
    };
    let bound = DIVERGENCE_FACTOR * (1.0 + h0.l2_norm());

    for k in 0..cfg.k_max {
        let phi = params.eval(x, traj.last())?;
        let next = traj.last().add_scaled(cfg.alpha_at(k), &phi)?;
        if !phi.is_finite() || !next.is_finite() || next.l2_norm() > bound {
            return Err(RefineError::Diverged { step: k, partial: traj });
        }
        let update_norm = phi.l2_norm();
        traj.update_norms.push(update_norm);
        if let (Some(errs), Some(e)) = (traj.error_norms.as_mut(), err_of(&next)) {
            errs.push(e);
        }
        traj.iterates.push(next);
        if cfg.stop_threshold > 0.0 && update_norm < cfg.stop_threshold {
            traj.stopped_early = true;
            break;
        }
    }
    Ok(traj)
}
