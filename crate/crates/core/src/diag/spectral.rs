//! Spectral error profiles over folded frequencies and the banded
//! convergence summary: per-band error ratios relative to the base operator,
//! aggregated by median with interquartile spread.

use crate::field::Field;
use serde::Serialize;
use std::fmt::Write as _;

use super::DiagError;

/// Stability guard in ratio denominators.
pub const RATIO_GUARD: f64 = 1e-10;

/// Squared magnitude-spectrum error per folded frequency 0..n/2.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralProfile {
    pub step: usize,
    pub errors: Vec<f64>,
}

/// `E(omega) = (|h_hat(omega)| - |y_hat(omega)|)^2` for folded omega = 0..n/2.
pub fn spectral_error_profile(h: &Field, y: &Field, step: usize) -> SpectralProfile {
    debug_assert_eq!(h.grid(), y.grid());
    let h_mags = h.fft().magnitudes();
    let y_mags = y.fft().magnitudes();
    let errors = (0..=h.grid().nyquist())
        .map(|k| {
            let d = h_mags[k] - y_mags[k];
            d * d
        })
        .collect();
    SpectralProfile { step, errors }
}

/// Per-frequency normalized ratio `E_k / (E_0 + eps)`.
pub fn normalized_ratio(profile_k: &[f64], profile_0: &[f64]) -> Vec<f64> {
    debug_assert_eq!(profile_k.len(), profile_0.len());
    profile_k
        .iter()
        .zip(profile_0.iter())
        .map(|(ek, e0)| ek / (e0 + RATIO_GUARD))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    Mid,
    High,
    /// DC (omega = 0) is excluded from the percentile bands and reported on
    /// its own.
    Dc,
}

impl Band {
    pub fn label(&self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Mid => "mid",
            Band::High => "high",
            Band::Dc => "dc",
        }
    }
}

/// Percentile partition of folded frequencies 1..=nyq into bottom, middle and
/// top thirds. DC is excluded.
pub fn band_indices(nyq: usize, band: Band) -> Vec<usize> {
    let c1 = nyq / 3;
    let c2 = 2 * nyq / 3;
    match band {
        Band::Dc => vec![0],
        Band::Low => (1..=c1).collect(),
        Band::Mid => (c1 + 1..=c2).collect(),
        Band::High => (c2 + 1..=nyq).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BandRatioRow {
    pub k: usize,
    pub band: Band,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Band-summed error ratios per refinement step, medians over samples.
#[derive(Debug, Clone, Serialize)]
pub struct BandRatioReport {
    pub nyquist: usize,
    pub rows: Vec<BandRatioRow>,
}

impl BandRatioReport {
    pub fn ratio(&self, k: usize, band: Band) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.k == k && r.band == band)
            .map(|r| r.median)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,band,median,q25,q75\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                r.k,
                r.band.label(),
                r.median,
                r.q25,
                r.q75
            );
        }
        out
    }
}

/// Linear-interpolation quantile of a sorted copy of `values`.
fn quantile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Band ratios for a set of steps. `step_profiles` holds, per recorded step,
/// the per-sample profiles; `base_profiles` holds each sample's step-0
/// profile. Sample order must match.
pub fn band_ratios(
    step_profiles: &[(usize, Vec<SpectralProfile>)],
    base_profiles: &[SpectralProfile],
) -> Result<BandRatioReport, DiagError> {
    if base_profiles.is_empty() {
        return Err(DiagError::InsufficientData { needed: 1, got: 0 });
    }
    let len = base_profiles[0].errors.len();
    let nyq = len - 1;
    for (_, profiles) in step_profiles {
        if profiles.len() != base_profiles.len() {
            return Err(DiagError::BadInput(
                "band_ratios: sample counts differ between steps".into(),
            ));
        }
        if profiles.iter().any(|p| p.errors.len() != len) {
            return Err(DiagError::BadInput(
                "band_ratios: profiles have mixed lengths".into(),
            ));
        }
    }

    let mut rows = Vec::new();
    for &(k, ref profiles) in step_profiles {
        for band in [Band::Low, Band::Mid, Band::High, Band::Dc] {
            let idx = band_indices(nyq, band);
            let ratios: Vec<f64> = profiles
                .iter()
                .zip(base_profiles.iter())
                .map(|(pk, p0)| {
                    let num: f64 = idx.iter().map(|&i| pk.errors[i]).sum();
                    let den: f64 = idx.iter().map(|&i| p0.errors[i]).sum();
                    num / (den + RATIO_GUARD)
                })
                .collect();
            rows.push(BandRatioRow {
                k,
                band,
                median: quantile(&ratios, 0.5),
                q25: quantile(&ratios, 0.25),
                q75: quantile(&ratios, 0.75),
            });
        }
    }
    Ok(BandRatioReport { nyquist: nyq, rows })
}
