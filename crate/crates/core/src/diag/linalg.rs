//! Minimal dense linear algebra for the Jacobian diagnostics: row-major
//! matrices, a cyclic Jacobi eigensolver for symmetric matrices, seeded power
//! iteration, Gaussian elimination, and nonnegative least squares.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DiagError;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = DenseMatrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let vr = v[r];
            for (o, a) in out.iter_mut().zip(self.row(r).iter()) {
                *o += vr * a;
            }
        }
        out
    }

    /// Symmetric part `(A + A^T) / 2`; requires a square matrix.
    pub fn symmetric_part(&self) -> DenseMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut s = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        s
    }

    /// Gram matrix `A^T A` (symmetric positive semidefinite).
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut g = DenseMatrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = g.get(i, j) + ri * row[j];
                    g.set(i, j, v);
                }
            }
        }
        g
    }

    /// `I - alpha * A`; requires a square matrix.
    pub fn identity_minus_scaled(&self, alpha: f64) -> DenseMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut b = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                b.set(i, j, id - alpha * self.get(i, j));
            }
        }
        b
    }

    /// Upper bound on the largest eigenvalue of a symmetric matrix from the
    /// Gershgorin discs, `max_i (s_ii + sum_{j != i} |s_ij|)`.
    pub fn gershgorin_upper(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows)
            .map(|i| {
                let radius: f64 = self
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| v.abs())
                    .sum();
                self.get(i, i) + radius
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Solve `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, DiagError> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut aug = self.data.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| {
                    aug[a * n + col]
                        .abs()
                        .partial_cmp(&aug[b * n + col].abs())
                        .expect("finite pivots")
                })
                .expect("nonempty range");
            if aug[pivot * n + col].abs() < 1e-300 {
                return Err(DiagError::SingularMatrix);
            }
            if pivot != col {
                for j in 0..n {
                    aug.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let diag = aug[col * n + col];
            for row in col + 1..n {
                let factor = aug[row * n + col] / diag;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    aug[row * n + j] -= factor * aug[col * n + j];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for j in row + 1..n {
                acc -= aug[row * n + j] * x[j];
            }
            x[row] = acc / aug[row * n + row];
        }
        Ok(x)
    }
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending. Deterministic; converges quadratically at these sizes.
pub fn jacobi_eigenvalues(sym: &DenseMatrix) -> Vec<f64> {
    assert_eq!(sym.rows(), sym.cols());
    let n = sym.rows();
    if n == 0 {
        return Vec::new();
    }
    let mut a = sym.clone();
    let frob: f64 = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-15 * frob.max(1e-300);

    for _sweep in 0..100 {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
            s.sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator given as
/// a matvec closure, by power iteration with a seeded random start.
pub fn power_iteration_largest(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<f64, DiagError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }

    let mut lambda = f64::INFINITY;
    for _ in 0..max_iters {
        let av = apply(&v);
        let new_lambda: f64 = v.iter().zip(av.iter()).map(|(a, b)| a * b).sum();
        let av_norm = norm(&av);
        if av_norm == 0.0 {
            return Ok(0.0);
        }
        // The Rayleigh quotient converges quadratically in the eigenvector
        // error; a stalled eigenvalue increment is the convergence signal.
        // An exactly zero residual (eigenvector hit) exits immediately.
        let residual: f64 = av
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - new_lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let delta = (new_lambda - lambda).abs();
        lambda = new_lambda;
        if residual <= tol * lambda.abs().max(1.0) || delta <= tol * lambda.abs().max(1.0) {
            return Ok(lambda);
        }
        for (x, a) in v.iter_mut().zip(av.iter()) {
            *x = a / av_norm;
        }
    }
    Err(DiagError::PowerIterationNoConvergence {
        iters: max_iters,
        last: lambda,
    })
}

/// Nonnegative least squares `min || A x - b ||, x >= 0` by Lawson-Hanson.
/// Returns the solution and the root-mean-square residual.
pub fn nnls(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64), DiagError> {
    let (m, p) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    let mut x = vec![0.0; p];
    let mut passive = vec![false; p];
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;

    // Least squares restricted to the passive set, via normal equations.
    let solve_passive = |passive: &[bool]| -> Result<Vec<f64>, DiagError> {
        let idx: Vec<usize> = (0..p).filter(|&j| passive[j]).collect();
        let k = idx.len();
        let mut normal = DenseMatrix::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for (ii, &ci) in idx.iter().enumerate() {
            for (jj, &cj) in idx.iter().enumerate() {
                let dot: f64 = (0..m).map(|r| a.get(r, ci) * a.get(r, cj)).sum();
                normal.set(ii, jj, dot);
            }
            rhs[ii] = (0..m).map(|r| a.get(r, ci) * b[r]).sum();
        }
        let z = normal.solve(&rhs)?;
        let mut full = vec![0.0; p];
        for (ii, &ci) in idx.iter().enumerate() {
            full[ci] = z[ii];
        }
        Ok(full)
    };

    for _outer in 0..(3 * p + 10) {
        // Gradient of the residual at the current point.
        let r: Vec<f64> = (0..m).map(|i| b[i] - a.row(i).iter().zip(&x).map(|(c, v)| c * v).sum::<f64>()).collect();
        let w = a.transpose_matvec(&r);
        let candidate = (0..p)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).expect("finite gradient"));
        let Some(j_star) = candidate else { break };
        passive[j_star] = true;

        loop {
            let z = match solve_passive(&passive) {
                Ok(z) => z,
                Err(_) => {
                    // Degenerate passive set; drop the newest column and stop
                    // growing in this direction.
                    passive[j_star] = false;
                    break;
                }
            };
            let feasible = (0..p).filter(|&j| passive[j]).all(|j| z[j] > 0.0);
            if feasible {
                x = z;
                break;
            }
            // Step toward z until the first passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for j in 0..p {
                if passive[j] && z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                passive[j_star] = false;
                break;
            }
            for j in 0..p {
                if passive[j] {
                    x[j] += alpha * (z[j] - x[j]);
                    if x[j] <= tol * 1e-3 {
                        x[j] = 0.0;
                        passive[j] = false;
                    }
                }
            }
        }
    }

    let rss: f64 = (0..m)
        .map(|i| {
            let fit: f64 = a.row(i).iter().zip(&x).map(|(c, v)| c * v).sum();
            (b[i] - fit).powi(2)
        })
        .sum();
    Ok((x, (rss / m as f64).sqrt()))
}
