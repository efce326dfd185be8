use lpcomac::frames::{optimal_scale, FrameSpec};
use lpcomac::kron::kron_decompose_symmetric;
use lpcomac::objective::{gradient, mse, mse_factorized, SequenceMatrix};
use lpcomac::simulator::{empirical_mse, McConfig};
use lpcomac::{MomentSet, SystemConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Central differences of the dense objective, entry by entry.
fn fd_gradient(s: &DMatrix<f64>, moments: &MomentSet, h: f64) -> DMatrix<f64> {
    let j = |m: &DMatrix<f64>| mse(&SequenceMatrix::new(m.clone()).unwrap(), moments).unwrap().total;
    DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| {
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus[(r, c)] += h;
        minus[(r, c)] -= h;
        (j(&plus) - j(&minus)) / (2.0 * h)
    })
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut draws = 0;
    for &k in &[3usize, 6] {
        for &m in &[2usize, 3] {
            for &p in &[0.25, 1.0, 2.0, 4.0] {
                for rep in 0..2 {
                    let sigma_n2 = if rep == 0 { 0.01 } else { 0.3 };
                    let moments = MomentSet::new(SystemConfig::new(k, m, p, 1.0, sigma_n2).unwrap()).unwrap();
                    let kron = kron_decompose_symmetric(moments.m()).unwrap();
                    let s = random_matrix(&mut rng, m, k, 0.6);
                    let seq = SequenceMatrix::new(s.clone()).unwrap();
                    let analytic = gradient(&seq, &moments, &kron).unwrap();
                    let numeric = fd_gradient(&s, &moments, 1e-5);
                    let rel = (&analytic - &numeric).norm() / numeric.norm();
                    assert!(rel < 1e-5, "K={k} L={m} p={p}: relative error {rel:e}");
                    draws += 1;
                }
            }
        }
    }
    assert!(draws >= 20);
}

#[test]
fn gradient_matches_fd_at_a_fixed_point() {
    let moments = MomentSet::new(SystemConfig::new(3, 2, 1.5, 1.0, 0.05).unwrap()).unwrap();
    let kron = kron_decompose_symmetric(moments.m()).unwrap();
    let s = DMatrix::from_row_slice(2, 3, &[0.4, -0.3, 0.8, 0.1, 0.9, -0.2]);
    let analytic = gradient(&SequenceMatrix::new(s.clone()).unwrap(), &moments, &kron).unwrap();
    let numeric = fd_gradient(&s, &moments, 1e-5);
    assert!((&analytic - &numeric).norm() / numeric.norm() < 1e-5);
}

#[test]
fn dense_and_factorized_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &(k, m, p) in &[(3usize, 2usize, 0.5), (6, 3, 2.0), (8, 4, 1.0), (16, 6, 3.0)] {
        let moments = MomentSet::new(SystemConfig::new(k, m, p, 1.2, 0.01).unwrap()).unwrap();
        let kron = kron_decompose_symmetric(moments.m()).unwrap();
        for _ in 0..3 {
            let s = SequenceMatrix::new(random_matrix(&mut rng, m, k, 1.0)).unwrap();
            let dense = mse(&s, &moments).unwrap();
            let fact = mse_factorized(&s, &moments, &kron).unwrap();
            assert!((dense.total - fact.total).abs() <= 1e-9 * dense.total.abs(), "K={k}");
            assert!((dense.e_a2 - fact.e_a2).abs() <= 1e-9 * dense.e_a2.abs().max(1.0));
        }
    }
}

#[test]
fn objective_depends_only_on_the_gram_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let moments = MomentSet::new(SystemConfig::new(5, 3, 1.0, 1.0, 0.1).unwrap()).unwrap();
    for _ in 0..10 {
        let s = random_matrix(&mut rng, 3, 5, 0.8);
        let q = random_matrix(&mut rng, 3, 3, 1.0).qr().q();
        let a = mse(&SequenceMatrix::new(s.clone()).unwrap(), &moments).unwrap().total;
        let b = mse(&SequenceMatrix::new(q * s).unwrap(), &moments).unwrap().total;
        assert!((a - b).abs() <= 1e-10 * a);
        assert!(a >= -1e-9);
    }
}

#[test]
fn objective_is_nonnegative_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &p in &[0.25, 1.0, 4.0] {
        let moments = MomentSet::new(SystemConfig::new(4, 2, p, 1.0, 0.0).unwrap()).unwrap();
        for _ in 0..50 {
            let scale = 0.05 + 3.0 * rng.random::<f64>();
            let s = SequenceMatrix::new(random_matrix(&mut rng, 2, 4, scale)).unwrap();
            assert!(mse(&s, &moments).unwrap().total >= -1e-9);
        }
    }
}

#[test]
fn analytic_objective_matches_simulation() {
    let cases = [
        (SystemConfig::new(1, 1, 2.0, 1.0, 0.1).unwrap(), None),
        (SystemConfig::new(6, 3, 1.0, 1.0, 1e-3).unwrap(), Some((3, 6))),
        (SystemConfig::new(4, 2, 0.5, 2.0, 0.1).unwrap(), None),
    ];
    for (i, (config, etf)) in cases.into_iter().enumerate() {
        let moments = MomentSet::new(config).unwrap();
        let s = match etf {
            Some((m, k)) => {
                let base = FrameSpec::builtin(m, k).unwrap().build().unwrap();
                optimal_scale(&base, &moments).unwrap().scaled
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
                SequenceMatrix::new(random_matrix(&mut rng, config.seq_len, config.num_nodes, 0.7)).unwrap()
            }
        };
        let s = if config.num_nodes == 1 { SequenceMatrix::from_rows(1, 1, &[1.0]).unwrap() } else { s };
        let analytic = mse(&s, &moments).unwrap().total;
        let est =
            empirical_mse(&s, &config, &McConfig { num_samples: 200_000, seed: 100 + i as u64, chunk_size: 4096 })
                .unwrap();
        assert!(
            (est.mean_sq_error - analytic).abs() <= 3.0 * est.std_error,
            "case {i}: mc {} ± {}, analytic {analytic}",
            est.mean_sq_error,
            est.std_error
        );
    }
}
