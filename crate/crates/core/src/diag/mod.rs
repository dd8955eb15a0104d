//! Numerical verification of the contraction theory: Jacobian spectral
//! constants at the solution, contraction factors, invariant-ball radii,
//! error-recursion fits, iteration-complexity formulas, and the bias/error
//! correlation study.

pub mod linalg;
pub mod metrics;
pub mod spectral;

use crate::base::{BaseOperatorSpec, EllipticProblem};
use crate::field::Field;
use crate::net::{MlpParams, NetError};
use crate::refine::{run_refinement, RefineConfig, RefineError, RefinementTrajectory};
use linalg::{jacobi_eigenvalues, nnls, power_iteration_largest, DenseMatrix};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("power iteration did not converge after {iters} iterations (last estimate {last})")]
    PowerIterationNoConvergence { iters: usize, last: f64 },
    #[error("no invariant ball: discriminant {discriminant} is negative (bias too large)")]
    NoInvariantBall { discriminant: f64 },
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("correlation undefined: an input has zero variance")]
    UndefinedCorrelation,
    #[error("singular matrix")]
    SingularMatrix,
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// How spectral constants are computed from the dense Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum SpectrumMethod {
    DenseExact,
    PowerIteration { iters: usize, tol: f64 },
}

impl SpectrumMethod {
    pub fn power_default() -> Self {
        SpectrumMethod::PowerIteration {
            iters: 10_000,
            tol: 1e-12,
        }
    }
}

/// Per-sample spectral diagnostics of the linearization at the solution.
#[derive(Debug, Clone, Serialize)]
pub struct JacobianReport {
    /// Smallest eigenvalue of the symmetrized Jacobian.
    pub m: f64,
    /// Operator norm (largest singular value).
    pub big_m: f64,
    /// Contraction factor `||I - alpha A||_op` at `alpha_used`.
    pub q: f64,
    pub sigma_min: f64,
    pub alpha_used: f64,
    pub method: SpectrumMethod,
}

/// Dense Jacobian `A = -D_h phi(x, h)`, rows assembled from n VJP calls with
/// basis vectors over a single forward tape.
pub fn jacobian_at(params: &MlpParams, x: &Field, h: &Field) -> Result<DenseMatrix, DiagError> {
    let n = h.n();
    let (_, tape) = params.forward(x, h)?;
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let e = Field::from_fn(h.grid(), |j| if j == i { 1.0 } else { 0.0 })
            .expect("basis vector is finite");
        let row = params.vjp_on_tape(&tape, &e);
        for (j, v) in row.values().iter().enumerate() {
            m.set(i, j, -v);
        }
    }
    Ok(m)
}

/// Strong-monotonicity constant `m = lambda_min((A + A^T)/2)`, operator norm
/// `M = sigma_max(A)` and `sigma_min(A)`, by the requested method. The dense
/// route uses Jacobi eigensolves; the power route uses shifted power
/// iteration with a Gershgorin bound.
pub fn monotonicity_constants(
    a: &DenseMatrix,
    method: SpectrumMethod,
) -> Result<(f64, f64, f64), DiagError> {
    if a.rows() != a.cols() {
        return Err(DiagError::BadInput("matrix must be square".into()));
    }
    let sym = a.symmetric_part();
    let gram = a.gram();
    match method {
        SpectrumMethod::DenseExact => {
            let sym_eigs = jacobi_eigenvalues(&sym);
            let gram_eigs = jacobi_eigenvalues(&gram);
            let m = *sym_eigs.first().expect("nonempty spectrum");
            let big_m = gram_eigs.last().expect("nonempty spectrum").max(0.0).sqrt();
            let sigma_min = gram_eigs.first().expect("nonempty spectrum").max(0.0).sqrt();
            Ok((m, big_m, sigma_min))
        }
        SpectrumMethod::PowerIteration { iters, tol } => {
            // lambda_min(S) = c - lambda_max(cI - S) with c an upper bound on
            // lambda_max(S); cI - S is then positive semidefinite.
            let c = sym.gershgorin_upper();
            let shifted = power_iteration_largest(
                |v| {
                    let sv = sym.matvec(v);
                    v.iter().zip(sv.iter()).map(|(x, s)| c * x - s).collect()
                },
                sym.rows(),
                iters,
                tol,
                1,
            )?;
            let m = c - shifted;

            let lam_max = power_iteration_largest(|v| gram.matvec(v), gram.rows(), iters, tol, 2)?;
            let big_m = lam_max.max(0.0).sqrt();

            // Inverse iteration for the smallest Gram eigenvalue: the power
            // method on the shifted spectrum has no usable gap when singular
            // values cluster near zero, while (A^T A)^{-1} converges fastest
            // exactly there. A singular Gram matrix means sigma_min = 0.
            let probe = vec![1.0; gram.rows()];
            let sigma_min = if gram.solve(&probe).is_err() {
                0.0
            } else {
                let inv_lam = power_iteration_largest(
                    |v| gram.solve(v).expect("probe solve succeeded"),
                    gram.rows(),
                    iters,
                    tol,
                    3,
                )?;
                if inv_lam > 0.0 {
                    (1.0 / inv_lam).sqrt()
                } else {
                    0.0
                }
            };
            Ok((m, big_m, sigma_min))
        }
    }
}

/// Contraction factor `q = sigma_max(I - alpha A)`, dense route.
pub fn contraction_factor(a: &DenseMatrix, alpha: f64) -> f64 {
    let b = a.identity_minus_scaled(alpha);
    let eigs = jacobi_eigenvalues(&b.gram());
    eigs.last().expect("nonempty spectrum").max(0.0).sqrt()
}

/// Full per-sample report: constants of `A` evaluated at the given state plus
/// the contraction factor at `alpha`.
pub fn jacobian_report(
    params: &MlpParams,
    x: &Field,
    at: &Field,
    alpha: f64,
    method: SpectrumMethod,
) -> Result<JacobianReport, DiagError> {
    let a = jacobian_at(params, x, at)?;
    let (m, big_m, sigma_min) = monotonicity_constants(&a, method)?;
    let q = contraction_factor(&a, alpha);
    Ok(JacobianReport {
        m,
        big_m,
        q,
        sigma_min,
        alpha_used: alpha,
        method,
    })
}

/// Aggregate over per-sample reports, in the layout of the monotonicity
/// study: mean and standard deviation of m and M plus the fraction m > 0.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicitySummary {
    pub samples: usize,
    pub m_mean: f64,
    pub m_std: f64,
    pub big_m_mean: f64,
    pub big_m_std: f64,
    pub q_mean: f64,
    pub q_std: f64,
    pub m_positive_fraction: f64,
}

impl MonotonicitySummary {
    pub fn from_reports(reports: &[JacobianReport]) -> Self {
        let n = reports.len().max(1) as f64;
        let mean = |f: &dyn Fn(&JacobianReport) -> f64| {
            reports.iter().map(|r| f(r)).sum::<f64>() / n
        };
        let std = |f: &dyn Fn(&JacobianReport) -> f64, mu: f64| {
            (reports.iter().map(|r| (f(r) - mu).powi(2)).sum::<f64>() / n).sqrt()
        };
        let m_mean = mean(&|r| r.m);
        let big_m_mean = mean(&|r| r.big_m);
        let q_mean = mean(&|r| r.q);
        MonotonicitySummary {
            samples: reports.len(),
            m_mean,
            m_std: std(&|r| r.m, m_mean),
            big_m_mean,
            big_m_std: std(&|r| r.big_m, big_m_mean),
            q_mean,
            q_std: std(&|r| r.q, q_mean),
            m_positive_fraction: reports.iter().filter(|r| r.m > 0.0).count() as f64
                / reports.len().max(1) as f64,
        }
    }
}

/// Invariant-ball radii `r_-, r_+` solving `(1-q) r - c r^2 = alpha ||b||`.
/// With `c = 0` the linear case applies: every radius at least
/// `alpha ||b|| / (1-q)` is invariant, encoded as `(r_-, +inf)`.
pub fn invariant_ball_radii(
    q: f64,
    c: f64,
    alpha: f64,
    b_norm: f64,
) -> Result<(f64, f64), DiagError> {
    if !(q < 1.0) || q < 0.0 {
        return Err(DiagError::BadInput(format!("need 0 <= q < 1, got {q}")));
    }
    if c < 0.0 || alpha <= 0.0 || b_norm < 0.0 {
        return Err(DiagError::BadInput(
            "need c >= 0, alpha > 0, b_norm >= 0".into(),
        ));
    }
    if c == 0.0 {
        return Ok((alpha * b_norm / (1.0 - q), f64::INFINITY));
    }
    let discriminant = (1.0 - q) * (1.0 - q) - 4.0 * alpha * c * b_norm;
    if discriminant < 0.0 {
        return Err(DiagError::NoInvariantBall { discriminant });
    }
    let root = discriminant.sqrt();
    Ok((((1.0 - q) - root) / (2.0 * c), ((1.0 - q) + root) / (2.0 * c)))
}

/// Iterations needed for geometric decay at rate q to bring the error from
/// `e0` to `eps`, `ceil(log(e0/eps) / log(1/q))`.
pub fn geometric_iteration_count(e0: f64, eps: f64, q: f64) -> Result<usize, DiagError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(DiagError::BadInput(format!("need 0 < q < 1, got {q}")));
    }
    if e0 <= 0.0 || eps <= 0.0 {
        return Err(DiagError::BadInput("need positive e0 and eps".into()));
    }
    if e0 <= eps {
        return Ok(0);
    }
    let t = (e0 / eps).ln() / (1.0 / q).ln();
    // Guard against ulp noise pushing exact integer ratios over the ceiling.
    Ok((t - 1e-9).ceil().max(0.0) as usize)
}

/// Coefficients of the error recursion `e_{k+1} ~ q e_k + c e_k^2 + b`,
/// fit by nonnegative least squares over a recorded trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct RecursionFit {
    pub q_hat: f64,
    pub c_hat: f64,
    pub b_hat: f64,
    /// Root-mean-square residual of the fit; reported, never hidden.
    pub residual: f64,
}

pub fn fit_error_recursion(traj: &RefinementTrajectory) -> Result<RecursionFit, DiagError> {
    let errors = traj
        .error_norms
        .as_ref()
        .ok_or_else(|| DiagError::BadInput("trajectory lacks error norms".into()))?;
    fit_error_recursion_from(errors)
}

/// Fit from a raw error-norm sequence (at least 4 points).
pub fn fit_error_recursion_from(errors: &[f64]) -> Result<RecursionFit, DiagError> {
    if errors.len() < 4 {
        return Err(DiagError::InsufficientData {
            needed: 4,
            got: errors.len(),
        });
    }
    let rows: Vec<Vec<f64>> = errors[..errors.len() - 1]
        .iter()
        .map(|&e| vec![e, e * e, 1.0])
        .collect();
    let design = DenseMatrix::from_rows(&rows);
    let target = &errors[1..];
    let (coeffs, residual) = nnls(&design, target)?;
    Ok(RecursionFit {
        q_hat: coeffs[0],
        c_hat: coeffs[1],
        b_hat: coeffs[2],
        residual,
    })
}

/// Result of the bias/error-floor study: per-sample bias magnitude
/// `||phi(x, y)||` paired with the minimum trajectory error, the Pearson
/// correlation over the set (None when undefined), and the count of
/// divergent samples excluded from the pairs.
#[derive(Debug, Clone, Serialize)]
pub struct BiasErrorStudy {
    pub pairs: Vec<(f64, f64)>,
    pub pearson: Option<f64>,
    pub excluded_divergent: usize,
}

pub fn bias_error_study(
    params: &MlpParams,
    dataset: &[(Field, Field)],
    prob: &EllipticProblem,
    base: &BaseOperatorSpec,
    cfg: &RefineConfig,
) -> Result<BiasErrorStudy, DiagError> {
    let outcomes: Vec<Result<Option<(f64, f64)>, DiagError>> = dataset
        .par_iter()
        .map(|(x, y)| {
            let bias = params.eval(x, y)?.l2_norm();
            let h0 = base
                .predict(prob, x)
                .map_err(|e| DiagError::BadInput(e.to_string()))?;
            match run_refinement(params, x, &h0, cfg, Some(y)) {
                Ok(traj) => Ok(Some((bias, traj.min_error().expect("y supplied")))),
                Err(RefineError::Diverged { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();

    let mut pairs = Vec::new();
    let mut excluded = 0usize;
    for o in outcomes {
        match o? {
            Some(p) => pairs.push(p),
            None => excluded += 1,
        }
    }
    let (bs, es): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
    let pearson = metrics::pearson(&bs, &es).ok();
    Ok(BiasErrorStudy {
        pairs,
        pearson,
        excluded_divergent: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseKind;
    use crate::field::Grid;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn eye(n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        m
    }

    #[test]
    fn jacobian_of_hand_built_operators() {
        let g = grid(8);
        let y = Field::from_fn(g, |i| (i as f64 * 0.3).cos()).unwrap();
        let x = Field::zeros(g);
        let h = Field::from_fn(g, |i| (i as f64 * 0.7).sin()).unwrap();

        // phi(x, h) = y - h gives A = identity.
        let residual = MlpParams::linear_residual(&eye(8), &y, &Field::zeros(g));
        let a = jacobian_at(&residual, &x, &h).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.get(i, j) - expect).abs() < 1e-13);
            }
        }

        // phi(x, h) = M h gives A = -M.
        let m: Vec<f64> = (0..64).map(|i| ((i * 7 + 2) % 9) as f64 * 0.05).collect();
        let linear = MlpParams::single_affine(g, None, Some(&m), &vec![0.0; 8]);
        let a = jacobian_at(&linear, &x, &h).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((a.get(i, j) + m[i * 8 + j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = grid(8);
        let params = MlpParams::xavier_init(31, 16, 8, 0.5);
        let x = Field::from_fn(g, |i| (i as f64 * 0.37).sin()).unwrap();
        let h = Field::from_fn(g, |i| (i as f64 * 0.59).cos()).unwrap();
        let a = jacobian_at(&params, &x, &h).unwrap();
        let step = 1e-5;
        for j in 0..8 {
            let mut up = h.values().to_vec();
            up[j] += step;
            let mut down = h.values().to_vec();
            down[j] -= step;
            let fu = params.eval(&x, &Field::new(g, up).unwrap()).unwrap();
            let fd = params.eval(&x, &Field::new(g, down).unwrap()).unwrap();
            for i in 0..8 {
                let fd_val = (fu.values()[i] - fd.values()[i]) / (2.0 * step);
                let ad_val = -a.get(i, j);
                let denom = ad_val.abs().max(fd_val.abs()).max(1e-3);
                assert!(
                    (ad_val - fd_val).abs() / denom < 1e-4,
                    "entry ({i},{j}): ad {ad_val} vs fd {fd_val}"
                );
            }
        }
    }

    #[test]
    fn monotonicity_constants_cases() {
        let eye2 = DenseMatrix::identity(2);
        let (m, big_m, smin) = monotonicity_constants(&eye2, SpectrumMethod::DenseExact).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && (big_m - 1.0).abs() < 1e-12);
        assert!((smin - 1.0).abs() < 1e-12);

        let d = DenseMatrix::diagonal(&[1.0, 3.0]);
        let (m, big_m, smin) = monotonicity_constants(&d, SpectrumMethod::DenseExact).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && (big_m - 3.0).abs() < 1e-12);
        assert!((smin - 1.0).abs() < 1e-12);

        // Pure rotation generator: symmetric part zero, singular values one.
        let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let (m, big_m, _) = monotonicity_constants(&rot, SpectrumMethod::DenseExact).unwrap();
        assert!(m.abs() < 1e-12 && (big_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_power_methods_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let data: Vec<f64> = (0..32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = DenseMatrix::from_row_major(32, 32, data);
            let dense = monotonicity_constants(&a, SpectrumMethod::DenseExact).unwrap();
            let power = monotonicity_constants(&a, SpectrumMethod::power_default()).unwrap();
            assert!((dense.0 - power.0).abs() <= 1e-8 * dense.0.abs().max(1.0));
            assert!((dense.1 - power.1).abs() <= 1e-8 * dense.1.abs().max(1.0));
        }
    }

    #[test]
    fn contraction_factor_cases() {
        let eye2 = DenseMatrix::identity(2);
        assert!((contraction_factor(&eye2, 0.5) - 0.5).abs() < 1e-12);

        let d = DenseMatrix::diagonal(&[1.0, 3.0]);
        assert!((contraction_factor(&d, 0.2) - 0.8).abs() < 1e-12);
        // At alpha = 0.5 the window alpha < 2m/M^2 = 2/9 does not apply, yet
        // q = 0.5 < 1 still holds: the window is sufficient, not necessary.
        assert!(0.5 > 2.0 / 9.0);
        assert!((contraction_factor(&d, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contraction_bound_for_spd_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            // Random SPD via B^T B + small ridge.
            let data: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = DenseMatrix::from_row_major(4, 4, data);
            let mut spd = b.gram();
            for i in 0..4 {
                spd.set(i, i, spd.get(i, i) + 0.1);
            }
            let (m, big_m, _) = monotonicity_constants(&spd, SpectrumMethod::DenseExact).unwrap();
            let alpha = 0.9 * 2.0 * m / (big_m * big_m);
            let q = contraction_factor(&spd, alpha);
            assert!(q < 1.0);
            assert!(q * q <= 1.0 - 2.0 * alpha * m + alpha * alpha * big_m * big_m + 1e-12);
        }
    }

    #[test]
    fn invariant_ball_cases() {
        let (rm, rp) = invariant_ball_radii(0.5, 1.0, 1.0, 0.0).unwrap();
        assert!(rm.abs() < 1e-15 && (rp - 0.5).abs() < 1e-15);

        let (rm, rp) = invariant_ball_radii(0.5, 1.0, 1.0, 0.05).unwrap();
        assert!((rm - 0.13819660112501053).abs() < 1e-12);
        assert!((rp - 0.36180339887498949).abs() < 1e-12);

        assert!(matches!(
            invariant_ball_radii(0.5, 1.0, 1.0, 0.1),
            Err(DiagError::NoInvariantBall { .. })
        ));

        // Linear case: lower radius alpha*b/(1-q), no upper bound.
        let (rm, rp) = invariant_ball_radii(0.5, 0.0, 1.0, 0.05).unwrap();
        assert!((rm - 0.1).abs() < 1e-15);
        assert!(rp.is_infinite());

        assert!(invariant_ball_radii(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn iteration_count_cases() {
        assert_eq!(geometric_iteration_count(1.0, 1e-3, 0.9).unwrap(), 66);
        // One exact decay step: eps = q * e0.
        assert_eq!(geometric_iteration_count(1.0, 0.9, 0.9).unwrap(), 1);
        assert_eq!(geometric_iteration_count(8.0, 1.0, 0.5).unwrap(), 3);
        assert!(geometric_iteration_count(1.0, 1e-3, 1.0).is_err());
        assert!(geometric_iteration_count(1.0, 1e-3, 0.0).is_err());
        assert_eq!(geometric_iteration_count(1.0, 2.0, 0.5).unwrap(), 0);
    }

    #[test]
    fn recursion_fit_cases() {
        // Exact linear decay.
        let errors: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        let fit = fit_error_recursion_from(&errors).unwrap();
        assert!((fit.q_hat - 0.5).abs() < 1e-8, "q_hat {}", fit.q_hat);
        assert!(fit.c_hat.abs() < 1e-8);
        assert!(fit.b_hat.abs() < 1e-8);
        assert!(fit.residual < 1e-10);

        // Constant plateau: the bias floor b/(1-q) must recover the level.
        let plateau = vec![0.2; 8];
        let fit = fit_error_recursion_from(&plateau).unwrap();
        let floor = fit.b_hat / (1.0 - fit.q_hat);
        assert!((floor - 0.2).abs() <= fit.residual + 1e-8);

        assert!(matches!(
            fit_error_recursion_from(&[1.0, 0.5, 0.25]),
            Err(DiagError::InsufficientData { .. })
        ));
    }

    #[test]
    fn bias_error_study_linear_operator() {
        // phi(x, h) = x - h: bias at the solution is x - y, the iteration
        // converges to x, so min error equals ||x - y|| exactly.
        let g = grid(8);
        let n = 8;
        let mut wx = vec![0.0; n * n];
        let mut wh = vec![0.0; n * n];
        for i in 0..n {
            wx[i * n + i] = 1.0;
            wh[i * n + i] = -1.0;
        }
        let params = MlpParams::single_affine(g, Some(&wx), Some(&wh), &vec![0.0; n]);

        // Bias b_i = x_i - y_i is kept orthogonal to x_i (disjoint Fourier
        // modes), so the trajectory minimum equals the floor ||b_i|| exactly.
        let dataset: Vec<(Field, Field)> = (0..12)
            .map(|i| {
                let c = 0.02 + 0.03 * i as f64;
                let x = Field::from_fn(g, |s| {
                    (2.0 * std::f64::consts::PI * s as f64 / 8.0).sin()
                })
                .unwrap();
                let y = Field::from_fn(g, |s| {
                    (2.0 * std::f64::consts::PI * s as f64 / 8.0).sin()
                        - c * (2.0 * std::f64::consts::PI * 2.0 * s as f64 / 8.0).cos()
                })
                .unwrap();
                (x, y)
            })
            .collect();
        let prob = EllipticProblem::new(0.3, g);
        let base = BaseOperatorSpec {
            kind: BaseKind::Zero,
            cutoff_fraction: 1.0,
            noise_amp: 0.0,
            seed: 0,
        };
        let cfg = RefineConfig::constant(0.5, 64);
        let study = bias_error_study(&params, &dataset, &prob, &base, &cfg).unwrap();
        assert_eq!(study.excluded_divergent, 0);
        let r = study.pearson.expect("correlation defined");
        assert!(r > 0.999, "pearson {r}");
        for (bias, min_e) in &study.pairs {
            assert!((bias - min_e).abs() < 1e-9 * bias.max(1e-12));
        }
    }

    #[test]
    fn bias_error_study_degenerate_is_reported() {
        let g = grid(8);
        let params = MlpParams::xavier_init(0, 4, 8, 0.0);
        let prob = EllipticProblem::new(0.3, g);
        let dataset: Vec<(Field, Field)> = (0..4)
            .map(|i| {
                let x = Field::from_fn(g, |s| ((s + i) as f64 * 0.3).cos()).unwrap();
                let y = prob.solve_exact(&x).unwrap();
                (x, y)
            })
            .collect();
        let base = BaseOperatorSpec::exact();
        let cfg = RefineConfig::constant(0.5, 8);
        let study = bias_error_study(&params, &dataset, &prob, &base, &cfg).unwrap();
        for (bias, _) in &study.pairs {
            assert_eq!(*bias, 0.0);
        }
        assert!(study.pearson.is_none());
    }
}
