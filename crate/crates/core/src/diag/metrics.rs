//! Field-comparison metrics: variance-scaled RMSE, relative Frobenius error,
//! anomaly correlation, and the sample Pearson coefficient.

use crate::field::Field;

use super::DiagError;

const VAR_GUARD: f64 = 1e-10;

fn mean_square_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.n() as f64
}

/// RMSE of the prediction scaled by the reference field's spatial variance.
pub fn vrmse(pred: &Field, reference: &Field) -> f64 {
    let mean = reference.mean();
    let variance = reference
        .values()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / reference.n() as f64;
    (mean_square_diff(pred, reference) / (variance + VAR_GUARD)).sqrt()
}

/// Relative Frobenius norm error `||pred - truth|| / ||truth||`.
pub fn rfne(pred: &Field, truth: &Field) -> Result<f64, DiagError> {
    let denom = truth.l2_norm();
    if denom == 0.0 {
        return Err(DiagError::BadInput("rfne reference norm is zero".into()));
    }
    Ok(pred.sub(truth).expect("same grid").l2_norm() / denom)
}

/// Anomaly correlation coefficient after removing each field's spatial mean.
pub fn acc(pred: &Field, truth: &Field) -> Result<f64, DiagError> {
    let pa = pred.mean();
    let ta = truth.mean();
    let mut num = 0.0;
    let mut pp = 0.0;
    let mut tt = 0.0;
    for (p, t) in pred.values().iter().zip(truth.values().iter()) {
        let pd = p - pa;
        let td = t - ta;
        num += pd * td;
        pp += pd * pd;
        tt += td * td;
    }
    if pp == 0.0 || tt == 0.0 {
        return Err(DiagError::UndefinedCorrelation);
    }
    Ok(num / (pp * tt).sqrt())
}

/// Sample Pearson correlation; needs length >= 3 and nonzero variance in both.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, DiagError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(DiagError::InsufficientData {
            needed: 3,
            got: xs.len().min(ys.len()),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(DiagError::UndefinedCorrelation);
    }
    Ok(num / (vx * vy).sqrt())
}
