//! Desk-scale laboratory for learned iterative refinement of solver outputs.
//!
//! A base operator produces a coarse solution of the 1-D periodic elliptic
//! problem `(I - eps*L) y = f`; a small refinement network, applied as the
//! fixed-point iteration `h_{k+1} = h_k + alpha * phi(x, h_k)`, corrects it.
//! The crate provides the function-space substrate (fields, FFT), the
//! network with hand-rolled reverse-mode differentiation, training with
//! multi-step supervision, a progressive spectral loss and fixed-point
//! regularization, and diagnostics that verify the contraction behavior of
//! the learned dynamics numerically.

pub mod base;
pub mod config;
pub mod data;
pub mod diag;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod loss;
pub mod net;
pub mod refine;
pub mod train;

pub use base::{BaseKind, BaseOperatorSpec, EllipticProblem};
pub use field::{Field, FieldError, Grid, Spectrum};
pub use net::{GradAccumulator, MlpParams, Tape};
pub use refine::{run_refinement, AlphaSchedule, RefineConfig, RefineError, RefinementTrajectory};
