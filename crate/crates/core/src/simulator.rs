//! Monte Carlo estimate of the true MSE of the transmit/detect chain.
//!
//! Sample `j` draws its values from ChaCha stream `j` under the run seed, so
//! the sample set does not depend on how samples are grouped into chunks.
//! Sums are accumulated exactly, which makes the estimate bit-identical for
//! any chunk size and any thread count.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::SystemConfig;
use crate::objective::SequenceMatrix;
use crate::sum::ExactSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub num_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { num_samples: 100_000, seed: 0, chunk_size: 16_384 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean_sq_error: f64,
    /// Sample standard deviation of the squared errors over `√num_samples`.
    pub std_error: f64,
    pub num_samples: u64,
}

/// `φ(x) = [|x_1|^{p/2}, …]`, with `0 ↦ 0`.
pub fn preprocess(x: &[f64], p: f64) -> Vec<f64> {
    x.iter().map(|&v| preprocess_one(v, p / 2.0)).collect()
}

#[inline]
fn preprocess_one(v: f64, half_p: f64) -> f64 {
    let a = v.abs();
    if a == 0.0 {
        0.0
    } else {
        a.powf(half_p)
    }
}

/// Desired value `‖x‖_p^p = Σ |x_k|^p`.
pub fn lp_power(x: &[f64], p: f64) -> f64 {
    x.iter().map(|&v| preprocess_one(v, p)).sum()
}

/// Energy detector output `‖S φ(x) + n‖²`.
pub fn detect(s: &SequenceMatrix, x: &[f64], n: &[f64], p: f64) -> Result<f64> {
    if x.len() != s.num_nodes() || n.len() != s.seq_len() {
        return Err(Error::Dimension(format!(
            "detector for a {}x{} matrix got {} sensor values and {} noise samples",
            s.seq_len(),
            s.num_nodes(),
            x.len(),
            n.len()
        )));
    }
    let phi = DVector::from_vec(preprocess(x, p));
    let y = s.as_matrix() * phi + DVector::from_column_slice(n);
    Ok(y.norm_squared())
}

#[derive(Default)]
struct Accumulator {
    sum: ExactSum,
    sum_sq: ExactSum,
}

fn run_chunk(s: &SequenceMatrix, config: &SystemConfig, seed: u64, range: std::ops::Range<u64>) -> Accumulator {
    let (k, m) = (config.num_nodes, config.seq_len);
    let (sx, sn) = (config.sigma_x2.sqrt(), config.sigma_n2.sqrt());
    let half_p = config.p / 2.0;
    let mat = s.as_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = vec![0.0; k];
    let mut y = vec![0.0; m];
    let mut acc = Accumulator::default();
    for j in range {
        rng.set_stream(j);
        rng.set_word_pos(0);
        let mut f = 0.0;
        for slot in phi.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            let v = preprocess_one(sx * z, half_p);
            *slot = v;
            f += v * v;
        }
        for (r, out) in y.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let mut acc_row = sn * z;
            for (c, v) in phi.iter().enumerate() {
                acc_row += mat[(r, c)] * v;
            }
            *out = acc_row;
        }
        let f_hat: f64 = y.iter().map(|v| v * v).sum();
        let err = (f - f_hat) * (f - f_hat);
        acc.sum.add(err);
        acc.sum_sq.add(err * err);
    }
    acc
}

/// Averages `(f(x) − f̂)²` over `num_samples` independent draws of
/// `x ~ N(0, σx² I_K)` and `n ~ N(0, σn² I_L)`.
pub fn empirical_mse(s: &SequenceMatrix, config: &SystemConfig, mc: &McConfig) -> Result<McEstimate> {
    config.validate()?;
    if s.seq_len() != config.seq_len || s.num_nodes() != config.num_nodes {
        return Err(Error::Dimension(format!(
            "sequence matrix is {}x{}, config is seq_len={} K={}",
            s.seq_len(),
            s.num_nodes(),
            config.seq_len,
            config.num_nodes
        )));
    }
    if mc.num_samples < 2 || mc.chunk_size == 0 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least 2 samples and a positive chunk size".into()));
    }
    let chunks: Vec<std::ops::Range<u64>> = (0..mc.num_samples)
        .step_by(mc.chunk_size as usize)
        .map(|start| start..(start + mc.chunk_size).min(mc.num_samples))
        .collect();
    let partials: Vec<Accumulator> = chunks.into_par_iter().map(|range| run_chunk(s, config, mc.seed, range)).collect();
    let mut total = Accumulator::default();
    for part in &partials {
        total.sum.merge(&part.sum);
        total.sum_sq.merge(&part.sum_sq);
    }
    let n = mc.num_samples as f64;
    let sum = total.sum.value();
    let sum_sq = total.sum_sq.value();
    let mean = sum / n;
    let var = ((sum_sq - sum * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate { mean_sq_error: mean, std_error: (var / n).sqrt(), num_samples: mc.num_samples })
}
