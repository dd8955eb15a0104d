//! Temporary inspection harness (not part of the suite; run explicitly with
//! `cargo test --test scratch_probe -- --ignored --nocapture`).

use refinelab_core::diag::linalg::{jacobi_eigenvalues, power_iteration_largest};
use refinelab_core::diag::{self};
use refinelab_core::net::MlpParams;
use refinelab_core::data::Dataset;
use std::path::Path;

#[test]
#[ignore]
fn inspect_trained_jacobian() {
    let dir = std::env::var("PROBE_DIR").unwrap_or_else(|_| "/tmp/desk_flat".into());
    let params =
        MlpParams::from_json(&std::fs::read_to_string(Path::new(&dir).join("params.json")).unwrap())
            .unwrap();
    let test = Dataset::read_from(&Path::new(&dir).join("test.ds")).unwrap();

    let (x, y) = &test.pairs[0];
    let a = diag::jacobian_at(&params, x, y).unwrap();
    let sym = a.symmetric_part();
    let eigs = jacobi_eigenvalues(&sym);
    println!("sym(A) spectrum: bottom {:?}", &eigs[..6]);
    println!("sym(A) spectrum: top    {:?}", &eigs[eigs.len() - 6..]);
    let count_below = |t: f64| eigs.iter().filter(|e| **e < t).count();
    println!(
        "eigs < 0: {}, < 0.5: {}, < 1: {}, < 3: {}",
        count_below(0.0),
        count_below(0.5),
        count_below(1.0),
        count_below(3.0)
    );

    // Eigenvector of the smallest eigenvalue via shifted power iteration,
    // then its Fourier content.
    let c = sym.gershgorin_upper();
    let n = sym.rows();
    use rand::SeedableRng;
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..20000 {
        let sv = sym.matvec(&v);
        let mut w: Vec<f64> = v.iter().zip(sv.iter()).map(|(x, s)| c * x - s).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for wi in w.iter_mut() {
            *wi /= norm;
        }
        v = w;
    }
    let lam: f64 = {
        let sv = sym.matvec(&v);
        v.iter().zip(sv.iter()).map(|(a, b)| a * b).sum()
    };
    println!("lambda_min via power: {lam}");
    let grid = refinelab_core::Grid::new(n).unwrap();
    let vf = refinelab_core::Field::new(grid, v).unwrap();
    let mags = vf.fft().magnitudes();
    let mut idx: Vec<usize> = (0..=n / 2).collect();
    idx.sort_by(|&i, &j| mags[j].partial_cmp(&mags[i]).unwrap());
    println!("dominant folded modes of v_min: {:?}", &idx[..8]);
    println!(
        "their magnitudes: {:?}",
        idx[..8].iter().map(|&i| (mags[i] * 100.0).round() / 100.0).collect::<Vec<_>>()
    );

    let _ = power_iteration_largest(|w| sym.matvec(w), n, 10, 1e-6, 1);
}
