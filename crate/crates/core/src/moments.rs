//! Closed-form Gaussian moment quantities.
//!
//! With `x ~ N(0, σx² I_K)` and `φ(x) = [|x_1|^{p/2}, …, |x_K|^{p/2}]ᵀ`, every
//! entry of `C = E[φφᵀ]` and `M = E[vec{φφᵀ} vec{φφᵀ}ᵀ]` is an absolute
//! monomial moment `E[Π |x_k|^{α_k}]`, which factorizes over the independent
//! coordinates into one-dimensional absolute moments. The noise term only
//! enters through `tr{N} = E[(nᵀn)²]`.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result, StructureCheck};
use crate::kron;
use crate::linalg::rel_frobenius_error;

/// Largest node count for which the dense `K² × K²` matrix is built.
pub const MAX_DENSE_NODES: usize = 32;

/// Admissible range of the norm exponent `p`.
pub const P_MIN: f64 = 1e-6;
pub const P_MAX: f64 = 64.0;

/// Relative Frobenius tolerance for the `R(M) = M` self-check.
pub const REARRANGEMENT_TOL: f64 = 1e-12;

const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;

/// Problem dimensions and signal/noise statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    /// Number of sensor nodes `K`.
    pub num_nodes: usize,
    /// Transmit sequence length.
    pub seq_len: usize,
    /// Norm exponent.
    pub p: f64,
    /// Sensor value variance `σx²`.
    pub sigma_x2: f64,
    /// Receiver noise variance `σn²`.
    pub sigma_n2: f64,
}

impl SystemConfig {
    pub fn new(num_nodes: usize, seq_len: usize, p: f64, sigma_x2: f64, sigma_n2: f64) -> Result<Self> {
        let config = Self { num_nodes, seq_len, p, sigma_x2, sigma_n2 };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_nodes == 0 {
            return Err(Error::InvalidConfig("number of nodes must be at least 1".into()));
        }
        if self.seq_len == 0 {
            return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
        }
        if !(self.p.is_finite() && (P_MIN..=P_MAX).contains(&self.p)) {
            return Err(Error::InvalidConfig(format!("p = {} outside the supported range [{P_MIN}, {P_MAX}]", self.p)));
        }
        if !(self.sigma_x2.is_finite() && self.sigma_x2 > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_x2 = {} must be positive", self.sigma_x2)));
        }
        if !(self.sigma_n2.is_finite() && self.sigma_n2 >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma_n2 = {} must be nonnegative", self.sigma_n2)));
        }
        Ok(())
    }
}

/// Absolute monomial moment `E[Π_k |x_k|^{α_k}]` for `x ~ N(0, σx² I)`:
///
/// `(2σx²)^{Σα_k/2} / √π^K · Π_k Γ((α_k + 1)/2)`
///
/// Evaluated in log space. Zero exponents contribute exactly a factor of one.
pub fn abs_moment(alpha: &[f64], sigma_x2: f64) -> Result<f64> {
    if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
        return Err(Error::Domain(format!("sigma_x2 = {sigma_x2} must be positive")));
    }
    let ln_two_var = (2.0 * sigma_x2).ln();
    let mut log_value = 0.0;
    for &a in alpha {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::Domain(format!("absolute moment exponent {a} must be finite and nonnegative")));
        }
        if a == 0.0 {
            continue;
        }
        log_value += 0.5 * a * ln_two_var + ln_gamma(0.5 * (a + 1.0)) - HALF_LN_PI;
    }
    Ok(log_value.exp())
}

/// Central monomial moment `E[Π_m n_m^{β_m}]` for `n ~ N(0, σn² I)`.
///
/// Zero whenever some `β_m` is odd; otherwise
/// `(2σn²)^{Σβ/2} / √π^M · Π Γ((β_m+1)/2)`, which for even integers reduces to
/// `Π σn^{β_m} (β_m − 1)!!` and is evaluated in that exact form.
pub fn central_moment(beta: &[f64], sigma_n2: f64) -> Result<f64> {
    if !(sigma_n2.is_finite() && sigma_n2 >= 0.0) {
        return Err(Error::Domain(format!("sigma_n2 = {sigma_n2} must be nonnegative")));
    }
    let mut orders = Vec::with_capacity(beta.len());
    for &b in beta {
        if !(b.is_finite() && b >= 0.0 && b.fract() == 0.0) {
            return Err(Error::Domain(format!("central moment exponent {b} must be a nonnegative integer")));
        }
        orders.push(b as u64);
    }
    if orders.iter().any(|b| b % 2 == 1) {
        return Ok(0.0);
    }
    let mut value = 1.0;
    for &b in &orders {
        // σ^b (b − 1)!! for even b
        let mut odd = b.saturating_sub(1);
        while odd > 1 {
            value *= odd as f64;
            odd -= 2;
        }
        value *= sigma_n2.powi((b / 2) as i32);
    }
    Ok(value)
}

/// One-dimensional moments `E[|x|^{c·p/2}]` for `c = 0..=4`.
fn single_node_moments(config: &SystemConfig) -> Result<[f64; 5]> {
    let mut q = [1.0; 5];
    for (c, slot) in q.iter_mut().enumerate().skip(1) {
        *slot = abs_moment(&[c as f64 * config.p / 2.0], config.sigma_x2)?;
    }
    Ok(q)
}

/// `C = E[φ(x) φ(x)ᵀ]`.
pub fn build_c(config: &SystemConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let q = single_node_moments(config)?;
    let k = config.num_nodes;
    let diag = q[2];
    let off = q[1] * q[1];
    Ok(DMatrix::from_fn(k, k, |i, j| if i == j { diag } else { off }))
}

/// Multiplicities of the distinct values among four indices.
fn multiplicities(idx: [usize; 4]) -> ([usize; 4], usize) {
    let mut s = idx;
    s.sort_unstable();
    let mut counts = [0usize; 4];
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = i;
        while j < 4 && s[j] == s[i] {
            j += 1;
        }
        counts[n] = j - i;
        n += 1;
        i = j;
    }
    (counts, n)
}

/// `M = E[vec{φφᵀ} vec{φφᵀ}ᵀ]`, a `K² × K²` matrix.
///
/// Row index `i + K·j` pairs with column index `k + K·l`; the entry is
/// `E[φ_i φ_j φ_k φ_l]`, i.e. the absolute moment with exponent `p/2` placed
/// on each of `i, j, k, l` with multiplicity.
pub fn build_m(config: &SystemConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let k = config.num_nodes;
    if k > MAX_DENSE_NODES {
        return Err(Error::Dimension(format!(
            "dense K²×K² moment matrix requested for K = {k}, supported up to K = {MAX_DENSE_NODES}"
        )));
    }
    let q = single_node_moments(config)?;
    let n = k * k;
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let (i, j) = (row % k, row / k);
        let (a, b) = (col % k, col / k);
        let (counts, distinct) = multiplicities([i, j, a, b]);
        counts[..distinct].iter().map(|&c| q[c]).product()
    }))
}

/// `tr{N} = E[(nᵀn)²] = M(M + 2)σn⁴` for sequence length `M`.
pub fn trace_n(config: &SystemConfig) -> f64 {
    let m = config.seq_len as f64;
    m * (m + 2.0) * config.sigma_n2 * config.sigma_n2
}

/// `N = E[vec{nnᵀ} vec{nnᵀ}ᵀ]` assembled entrywise from [`central_moment`].
///
/// Only used to cross-check [`trace_n`]; the optimization path never forms it.
pub fn build_n_dense(config: &SystemConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let m = config.seq_len;
    if m > MAX_DENSE_NODES {
        return Err(Error::Dimension(format!(
            "dense noise moment matrix requested for sequence length {m}, supported up to {MAX_DENSE_NODES}"
        )));
    }
    let n = m * m;
    let mut out = DMatrix::zeros(n, n);
    let mut beta = vec![0.0; m];
    for row in 0..n {
        for col in 0..n {
            beta.iter_mut().for_each(|b| *b = 0.0);
            for idx in [row % m, row / m, col % m, col / m] {
                beta[idx] += 1.0;
            }
            out[(row, col)] = central_moment(&beta, config.sigma_n2)?;
        }
    }
    Ok(out)
}

/// Closed-form moment matrices for one [`SystemConfig`].
#[derive(Debug, Clone)]
pub struct MomentSet {
    config: SystemConfig,
    c: DMatrix<f64>,
    m: DMatrix<f64>,
    trace_n: f64,
    trace_m: f64,
}

impl MomentSet {
    /// Builds `C`, `M` and `tr{N}`, and verifies `R(M) = M`.
    pub fn new(config: SystemConfig) -> Result<Self> {
        let c = build_c(&config)?;
        let m = build_m(&config)?;
        let rearranged = kron::rearrange(&m)?;
        let err = rel_frobenius_error(&rearranged, &m);
        if err > REARRANGEMENT_TOL {
            return Err(Error::Structure {
                check: StructureCheck::Rearrangement,
                detail: format!("moment matrix differs from its rearrangement by {err:.3e} (relative)"),
            });
        }
        let trace_m = m.trace();
        Ok(Self { config, c, m, trace_n: trace_n(&config), trace_m })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    /// `C`, `K × K`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// `M`, `K² × K²`.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace_n(&self) -> f64 {
        self.trace_n
    }

    pub fn trace_m(&self) -> f64 {
        self.trace_m
    }

    pub fn trace_c(&self) -> f64 {
        self.c.trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(k: usize, m: usize, p: f64, sx: f64, sn: f64) -> SystemConfig {
        SystemConfig::new(k, m, p, sx, sn).unwrap()
    }

    #[test]
    fn zero_exponents_give_one() {
        assert_eq!(abs_moment(&[0.0, 0.0, 0.0], 3.7).unwrap(), 1.0);
        assert_eq!(abs_moment(&[], 0.2).unwrap(), 1.0);
    }

    #[test]
    fn negative_exponent_is_rejected() {
        assert!(matches!(abs_moment(&[1.0, -0.5], 1.0), Err(Error::Domain(_))));
        assert!(matches!(central_moment(&[1.5], 1.0), Err(Error::Domain(_))));
        assert!(matches!(central_moment(&[-2.0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn odd_central_moment_vanishes() {
        assert_eq!(central_moment(&[1.0], 1.0).unwrap(), 0.0);
        assert_eq!(central_moment(&[2.0, 3.0], 0.4).unwrap(), 0.0);
        assert_eq!(central_moment(&[2.0, 2.0], 1.0).unwrap(), 1.0);
        assert_eq!(central_moment(&[4.0], 1.0).unwrap(), 3.0);
        assert_eq!(central_moment(&[0.0, 0.0], 0.0).unwrap(), 1.0);
        assert_eq!(central_moment(&[2.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn config_guards() {
        assert!(SystemConfig::new(0, 1, 1.0, 1.0, 0.0).is_err());
        assert!(SystemConfig::new(1, 0, 1.0, 1.0, 0.0).is_err());
        assert!(SystemConfig::new(1, 1, 1e-7, 1.0, 0.0).is_err());
        assert!(SystemConfig::new(1, 1, 65.0, 1.0, 0.0).is_err());
        assert!(SystemConfig::new(1, 1, 1.0, 0.0, 0.0).is_err());
        assert!(SystemConfig::new(1, 1, 1.0, 1.0, -1e-3).is_err());
        assert!(SystemConfig::new(1, 1, f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn c_for_two_nodes() {
        let c = build_c(&cfg(2, 1, 2.0, 1.0, 0.0)).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((c[(0, 1)] - 2.0 / PI).abs() < 1e-14);
        assert_eq!(c[(0, 1)], c[(1, 0)]);
    }

    #[test]
    fn c_tends_to_ones_as_p_vanishes() {
        let c = build_c(&cfg(2, 1, P_MIN, 1.0, 0.0)).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn m_spot_values() {
        let m1 = build_m(&cfg(1, 1, 2.0, 1.0, 0.0)).unwrap();
        assert!((m1[(0, 0)] - 3.0).abs() < 1e-13);
        let m2 = build_m(&cfg(2, 1, 2.0, 1.0, 0.0)).unwrap();
        // ((1,1),(2,2)) → row 0, col 3
        assert!((m2[(0, 3)] - 1.0).abs() < 1e-13);
        assert!((m2.trace() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn m_is_capped() {
        let c = cfg(MAX_DENSE_NODES + 1, 1, 1.0, 1.0, 0.0);
        assert!(matches!(build_m(&c), Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_n_values() {
        assert_eq!(trace_n(&cfg(1, 1, 1.0, 1.0, 1.0)), 3.0);
        assert!((trace_n(&cfg(1, 3, 1.0, 1.0, 0.1)) - 0.15).abs() < 1e-15);
        assert_eq!(trace_n(&cfg(1, 4, 1.0, 1.0, 0.0)), 0.0);
    }

    #[test]
    fn trace_n_matches_entrywise_assembly() {
        for (m, s) in [(1, 1.0), (3, 0.1), (5, 2.5), (6, 1e-3)] {
            let config = cfg(1, m, 1.0, 1.0, s);
            let dense = build_n_dense(&config).unwrap();
            let closed = trace_n(&config);
            assert!((dense.trace() - closed).abs() <= 1e-14 * closed.max(1e-300), "m={m}");
        }
    }

    #[test]
    fn moment_set_accepts_valid_config() {
        let set = MomentSet::new(cfg(3, 2, 1.5, 0.7, 0.2)).unwrap();
        assert_eq!(set.c().nrows(), 3);
        assert_eq!(set.m().nrows(), 9);
        assert!((set.trace_m() - set.m().trace()).abs() < 1e-15);
    }
}
