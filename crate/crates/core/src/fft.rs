//! Radix-2 iterative FFT kernel, double precision.
//!
//! Forward transform is unnormalized, `X[k] = sum_i x[i] exp(-2*pi*i*k*i/n)`;
//! the inverse divides by `n`. Lengths must be powers of two.

use num_complex::Complex64;
use std::f64::consts::PI;

/// In-place radix-2 decimation-in-time transform. `sign` is -1.0 for the
/// forward transform and +1.0 for the (unscaled) inverse.
fn transform(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    // Butterflies. Twiddles are recomputed per stage from the angle step;
    // at desk sizes (n <= 4096) this is cheap and keeps the kernel stateless.
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= wlen;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Forward DFT of real samples.
pub fn forward_real(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, -1.0);
    buf
}

/// Inverse DFT returning complex samples (caller checks the imaginary residue).
pub fn inverse(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    transform(&mut buf, 1.0);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n^2) DFT used as the summation oracle.
    fn dft_naive(values: &[f64]) -> Vec<Complex64> {
        let n = values.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &v) in values.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                    acc += v * Complex64::new(ang.cos(), ang.sin());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let values: Vec<f64> = (0..32).map(|i| ((i * 7 + 3) % 13) as f64 - 6.0).collect();
        let fast = forward_real(&values);
        let slow = dft_naive(&values);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-10, "fft deviates from direct DFT");
        }
    }

    #[test]
    fn inverse_round_trip() {
        let values: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let spec = forward_real(&values);
        let back = inverse(&spec);
        for (v, b) in values.iter().zip(back.iter()) {
            assert!((v - b.re).abs() < 1e-12);
            assert!(b.im.abs() < 1e-12);
        }
    }
}
