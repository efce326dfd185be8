use lpcomac::kron::{factor_asymmetry, kron_decompose, kron_decompose_symmetric, rearrange};
use lpcomac::linalg::{rel_frobenius_error, sorted_symmetric_eigen, trace_of_product, vec_of};
use lpcomac::moments::{build_m, SystemConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(n: usize, values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, &values[..n * n])
}

fn moment_matrix(k: usize, p: f64) -> DMatrix<f64> {
    build_m(&SystemConfig::new(k, 1, p, 1.0, 0.0).unwrap()).unwrap()
}

#[test]
fn moment_matrices_decompose_symmetrically() {
    for k in [2, 3, 6] {
        for p in [0.5, 2.0] {
            let m = moment_matrix(k, p);
            let fact = kron_decompose_symmetric(&m).unwrap();
            let factors = fact.symmetric_factors().unwrap();
            let mut recon = DMatrix::zeros(k * k, k * k);
            for f in factors {
                recon += f.kronecker(f);
            }
            assert!(rel_frobenius_error(&recon, &m) < 1e-10, "K={k} p={p}");
            assert!(rel_frobenius_error(&fact.reconstruct(), &m) < 1e-10);
            let top = factors[0].norm();
            assert!(factor_asymmetry(&fact) <= 1e-10 * top, "K={k} p={p}");
            // weights are the eigenvalues of M itself
            let (eig, _) = sorted_symmetric_eigen(&m);
            for (w, e) in fact.weights().iter().zip(&eig) {
                assert!((w - e.max(0.0)).abs() <= 1e-12 * eig[0], "K={k} p={p}: {w} vs {e}");
            }
        }
    }
}

#[test]
fn symmetric_and_general_paths_agree_on_weights() {
    let m = moment_matrix(3, 1.0);
    let general = kron_decompose(&m).unwrap();
    let symmetric = kron_decompose_symmetric(&m).unwrap();
    for (a, b) in general.weights().iter().zip(symmetric.weights()) {
        assert!((a - b).abs() <= 1e-10 * general.weights()[0]);
    }
}

#[test]
fn truncation_error_bound() {
    let k = 6;
    let m = moment_matrix(k, 2.0);
    let fact = kron_decompose_symmetric(&m).unwrap();
    let rel_tol = 1e-12;
    let cut = fact.truncate(rel_tol).unwrap();
    assert!(cut.len() <= fact.len());
    let err = (cut.reconstruct() - &m).norm();
    assert!(err <= (k * k) as f64 * rel_tol * fact.weights()[0], "error {err}");
}

#[test]
fn kron_trace_identity() {
    let m = moment_matrix(3, 1.5);
    let fact = kron_decompose_symmetric(&m).unwrap();
    let x = DMatrix::from_fn(3, 3, |i, j| ((i + 2 * j) as f64).sin() + ((j + 2 * i) as f64).sin());
    let y = DMatrix::from_fn(3, 3, |i, j| ((i * j) as f64 + 0.3).cos());
    for mk in fact.symmetric_factors().unwrap() {
        let dense = (mk.kronecker(mk) * x.kronecker(&y)).trace();
        let split = trace_of_product(mk, &x) * trace_of_product(mk, &y);
        assert!((dense - split).abs() <= 1e-12 * dense.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn rearranged_kron_is_rank_one(
        b_side in 2usize..=4,
        values in proptest::collection::vec(-2.0f64..2.0, 32),
    ) {
        let b = matrix(b_side, &values);
        let c = matrix(b_side, &values[16..]);
        let r = rearrange(&b.kronecker(&c)).unwrap();
        let expected = vec_of(&b) * vec_of(&c).transpose();
        prop_assert!((r - expected).norm() <= 1e-14);
    }

    #[test]
    fn decomposition_reconstructs(side in 1usize..=3, values in proptest::collection::vec(-3.0f64..3.0, 81)) {
        let n = side * side;
        let a = matrix(n, &values);
        let fact = kron_decompose(&a).unwrap();
        prop_assert!(fact.weights().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(fact.weights().iter().all(|&w| w >= 0.0));
        prop_assert!(rel_frobenius_error(&fact.reconstruct(), &a) < 1e-10);
        let sv = rearrange(&a).unwrap().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        for (w, e) in fact.weights().iter().zip(&s) {
            prop_assert!((w - e).abs() <= 1e-12 * s[0].max(1.0));
        }
    }
}
