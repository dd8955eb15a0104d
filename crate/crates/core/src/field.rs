//! Periodic 1-D grids, real-valued fields, and their Fourier spectra.
//!
//! The grid spacing is fixed at 1, so the discrete Laplacian is the bare
//! three-point stencil and all norms are mean-square (resolution-comparable).

use crate::fft;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// Largest tolerated imaginary residue when inverting the spectrum of a real field.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid size {0} is invalid: need a power of two >= 4")]
    BadGridSize(usize),
    #[error("value count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("inverse transform left imaginary residue {residue:.3e} (conjugate symmetry violated)")]
    ConjugateSymmetry { residue: f64 },
}

/// Uniform periodic grid; spacing is dimensionless 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, FieldError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(FieldError::BadGridSize(n));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nyquist index, `n/2`.
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Folded frequency magnitude of coefficient index `k`: `min(k, n-k)`.
    pub fn folded(&self, k: usize) -> usize {
        k.min(self.n - k)
    }
}

/// Real samples on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.n() {
            return Err(FieldError::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self, FieldError> {
        Field::new(grid, vec![c; grid.n()])
    }

    /// Builds a field from sample values of a function of the grid index.
    pub fn from_fn(grid: Grid, f: impl Fn(usize) -> f64) -> Result<Self, FieldError> {
        Field::new(grid, (0..grid.n()).map(f).collect())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw samples without the finiteness re-check; used by hot loops that
    /// validate separately (the refinement engine's divergence guard).
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Field { grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_same_grid(&self, other: &Field) -> Result<(), FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch(self.n(), other.n()));
        }
        Ok(())
    }

    /// Periodic three-point Laplacian, `out[i] = f[i-1] - 2 f[i] + f[i+1]`.
    pub fn laplacian(&self) -> Field {
        let n = self.n();
        let v = &self.values;
        let out = (0..n)
            .map(|i| v[(i + n - 1) % n] - 2.0 * v[i] + v[(i + 1) % n])
            .collect();
        Field::from_raw(self.grid, out)
    }

    /// Mean-square norm, `sqrt(mean(f^2))`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.n() as f64).sqrt()
    }

    /// Mean-square inner product, `mean(f * g)`.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.n() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn add(&self, other: &Field) -> Result<Field, FieldError> {
        self.check_same_grid(other)?;
        let out = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Field::from_raw(self.grid, out))
    }

    pub fn sub(&self, other: &Field) -> Result<Field, FieldError> {
        self.check_same_grid(other)?;
        let out = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field::from_raw(self.grid, out))
    }

    pub fn scale(&self, s: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self + s * other`, the refinement update shape.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Result<Field, FieldError> {
        self.check_same_grid(other)?;
        let out = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(Field::from_raw(self.grid, out))
    }

    /// Unnormalized forward transform.
    pub fn fft(&self) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: fft::forward_real(&self.values),
        }
    }

    /// CSV rows `(index, value)` at full double precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{:.16e}", i, v);
        }
        out
    }
}

/// Complex Fourier coefficients of a field. Unnormalized forward convention;
/// the inverse divides by `n`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self, FieldError> {
        if coeffs.len() != grid.n() {
            return Err(FieldError::LengthMismatch {
                expected: grid.n(),
                got: coeffs.len(),
            });
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient magnitudes `|c_k|` for k = 0..n-1.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// Inverse transform back to a real field. Rejects spectra whose inverse
    /// carries an imaginary residue above [`IMAG_RESIDUE_TOL`].
    pub fn ifft(&self) -> Result<Field, FieldError> {
        let complex = fft::inverse(&self.coeffs);
        let residue = complex.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if residue > IMAG_RESIDUE_TOL {
            return Err(FieldError::ConjugateSymmetry { residue });
        }
        Ok(Field::from_raw(
            self.grid,
            complex.iter().map(|c| c.re).collect(),
        ))
    }

    /// Inverse transform that keeps the complex samples; used where the
    /// caller handles the real projection itself (spectral-loss gradients).
    pub fn ifft_complex(&self) -> Vec<Complex64> {
        fft::inverse(&self.coeffs)
    }
}
