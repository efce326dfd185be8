//! Analytic mean squared error `J(S) = E[(f − f̂)²]` and its gradient.
//!
//! Writing `G = SᵀS`, the four nonvanishing expectation terms are
//!
//! ```text
//! E[a²]  = tr{M (G ⊗ G)} − 2 tr{M (I ⊗ G)} + tr{M}
//! E[b²]  = 4 σn² tr{C G}
//! E[c²]  = tr{N}
//! E[ac]  = L σn² tr{C (I − G)}          (L = sequence length)
//! J      = E[a²] + E[b²] + E[c²] − 2 E[ac]
//! ```
//!
//! The Kronecker traces are evaluated either densely against `M` or through
//! `M = Σ_k M_k ⊗ M_k`, where `tr{(M_k ⊗ M_k)(X ⊗ Y)} = tr{M_k X} tr{M_k Y}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kron::KronFactorization;
use crate::linalg::{trace_of_product, unvec_square};
use crate::moments::MomentSet;

/// Real `seq_len × K` transmit-sequence matrix; column `k` is node `k`'s
/// sequence. Entries are unconstrained, so powers are part of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMatrix(DMatrix<f64>);

impl SequenceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension("sequence matrix must be nonempty".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sequence matrix entries must be finite".into()));
        }
        Ok(Self(entries))
    }

    /// Row-major convenience constructor.
    pub fn from_rows(seq_len: usize, num_nodes: usize, values: &[f64]) -> Result<Self> {
        if values.len() != seq_len * num_nodes {
            return Err(Error::Dimension(format!("{} values for a {seq_len}x{num_nodes} matrix", values.len())));
        }
        Self::new(DMatrix::from_row_slice(seq_len, num_nodes, values))
    }

    pub fn zeros(seq_len: usize, num_nodes: usize) -> Self {
        Self(DMatrix::zeros(seq_len, num_nodes))
    }

    pub fn seq_len(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_nodes(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Gram matrix `SᵀS`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.0.tr_mul(&self.0)
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        Self(&self.0 * gamma)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Total transmit power `‖S‖_F²`.
    pub fn total_power(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Largest per-node power `max_k ‖s_k‖²`.
    pub fn max_column_power(&self) -> f64 {
        self.0.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
    }
}

/// The expectation terms of `J` and their combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBreakdown {
    pub e_a2: f64,
    pub e_b2: f64,
    pub e_c2: f64,
    pub e_ac: f64,
    pub total: f64,
}

impl MseBreakdown {
    fn assemble(t_gg: f64, t_ig: f64, tr_cg: f64, moments: &MomentSet) -> Self {
        let cfg = moments.config();
        let seq_len = cfg.seq_len as f64;
        let e_a2 = t_gg - 2.0 * t_ig + moments.trace_m();
        let e_b2 = 4.0 * cfg.sigma_n2 * tr_cg;
        let e_c2 = moments.trace_n();
        let e_ac = seq_len * cfg.sigma_n2 * (moments.trace_c() - tr_cg);
        Self { e_a2, e_b2, e_c2, e_ac, total: e_a2 + e_b2 + e_c2 - 2.0 * e_ac }
    }
}

/// `J(γ S0) = quartic γ⁴ + quadratic γ² + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleProfile {
    pub quartic: f64,
    pub quadratic: f64,
    pub constant: f64,
}

impl ScaleProfile {
    pub fn eval(&self, gamma: f64) -> f64 {
        let g2 = gamma * gamma;
        self.quartic * g2 * g2 + self.quadratic * g2 + self.constant
    }
}

fn check_dims(s: &SequenceMatrix, moments: &MomentSet) -> Result<()> {
    let cfg = moments.config();
    if s.seq_len() != cfg.seq_len || s.num_nodes() != cfg.num_nodes {
        return Err(Error::Dimension(format!(
            "sequence matrix is {}x{}, moments are for seq_len={} and K={}",
            s.seq_len(),
            s.num_nodes(),
            cfg.seq_len,
            cfg.num_nodes
        )));
    }
    Ok(())
}

/// `tr{M (X ⊗ Y)}` for symmetric `M`, without forming the Kronecker product.
fn dense_kron_trace(m: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let k = x.nrows();
    let n = k * k;
    let mut acc = 0.0;
    for col in 0..n {
        let (xc, yc) = (col / k, col % k);
        for row in 0..n {
            let (xr, yr) = (row / k, row % k);
            // tr{M Z} = Σ M[c, r] Z[r, c]
            acc += m[(col, row)] * x[(xr, xc)] * y[(yr, yc)];
        }
    }
    acc
}

/// `J(S)` with the Kronecker traces taken densely against `M`.
pub fn mse(s: &SequenceMatrix, moments: &MomentSet) -> Result<MseBreakdown> {
    check_dims(s, moments)?;
    let g = s.gram();
    let identity = DMatrix::identity(g.nrows(), g.ncols());
    let t_gg = dense_kron_trace(moments.m(), &g, &g);
    let t_ig = dense_kron_trace(moments.m(), &identity, &g);
    let tr_cg = trace_of_product(moments.c(), &g);
    Ok(MseBreakdown::assemble(t_gg, t_ig, tr_cg, moments))
}

/// `J(S)` through the Kronecker factors.
pub fn mse_factorized(s: &SequenceMatrix, moments: &MomentSet, kron: &KronFactorization) -> Result<MseBreakdown> {
    FactorizedObjective::new(moments, kron)?.breakdown(s)
}

/// `∇_S J(S) = Δ⁽¹⁾ − 2Δ⁽²⁾ + (2L + 4) σn² (S Cᵀ + S C)`.
pub fn gradient(s: &SequenceMatrix, moments: &MomentSet, kron: &KronFactorization) -> Result<DMatrix<f64>> {
    FactorizedObjective::new(moments, kron)?.gradient(s)
}

/// Coefficients of `J(γ S0)` as a polynomial in `γ`.
pub fn mse_scale_profile(s0: &SequenceMatrix, moments: &MomentSet) -> Result<ScaleProfile> {
    check_dims(s0, moments)?;
    if s0.is_zero() {
        return Err(Error::Domain("scale profile of the zero matrix is constant".into()));
    }
    let cfg = moments.config();
    let seq_len = cfg.seq_len as f64;
    let g = s0.gram();
    let identity = DMatrix::identity(g.nrows(), g.ncols());
    let quartic = dense_kron_trace(moments.m(), &g, &g);
    let t_ig = dense_kron_trace(moments.m(), &identity, &g);
    let tr_cg = trace_of_product(moments.c(), &g);
    let quadratic = -2.0 * t_ig + (2.0 * seq_len + 4.0) * cfg.sigma_n2 * tr_cg;
    let constant = moments.trace_m() + moments.trace_n() - 2.0 * seq_len * cfg.sigma_n2 * moments.trace_c();
    Ok(ScaleProfile { quartic, quadratic, constant })
}

/// Objective and gradient evaluator bound to one moment set and its
/// symmetric Kronecker factorization.
///
/// The factors `M_k` with nonzero weight are packed as rows `vec{M_k}ᵀ` of a
/// matrix `F`, so `t = F vec{G}` gives all `tr{M_kᵀ G}` at once.
#[derive(Debug, Clone)]
pub struct FactorizedObjective<'a> {
    moments: &'a MomentSet,
    factor_rows: DMatrix<f64>,
    factor_traces: DVector<f64>,
    c_sym: DMatrix<f64>,
}

impl<'a> FactorizedObjective<'a> {
    pub fn new(moments: &'a MomentSet, kron: &KronFactorization) -> Result<Self> {
        let k = moments.config().num_nodes;
        if kron.source_dim() != k {
            return Err(Error::Dimension(format!(
                "factorization has block size {}, moments have K = {k}",
                kron.source_dim()
            )));
        }
        let factors = kron.symmetric_factors().ok_or_else(|| {
            Error::InvalidConfig("gradient requires the symmetric factorization M = Σ M_k ⊗ M_k".into())
        })?;
        let active: Vec<&DMatrix<f64>> =
            factors.iter().zip(kron.weights()).filter(|(_, &w)| w > 0.0).map(|(f, _)| f).collect();
        let mut factor_rows = DMatrix::zeros(active.len(), k * k);
        for (r, f) in active.iter().enumerate() {
            for (c, v) in f.as_slice().iter().enumerate() {
                factor_rows[(r, c)] = *v;
            }
        }
        let factor_traces = DVector::from_iterator(active.len(), active.iter().map(|f| f.trace()));
        let c_sym = moments.c() + moments.c().transpose();
        Ok(Self { moments, factor_rows, factor_traces, c_sym })
    }

    pub fn moments(&self) -> &MomentSet {
        self.moments
    }

    /// Number of Kronecker terms actually used.
    pub fn num_terms(&self) -> usize {
        self.factor_rows.nrows()
    }

    /// `tr{M_k G}` for every retained factor (uses `G = Gᵀ`).
    fn factor_gram_traces(&self, g: &DMatrix<f64>) -> DVector<f64> {
        let vec_g = DVector::from_column_slice(g.as_slice());
        &self.factor_rows * vec_g
    }

    pub fn breakdown(&self, s: &SequenceMatrix) -> Result<MseBreakdown> {
        check_dims(s, self.moments)?;
        let g = s.gram();
        let t = self.factor_gram_traces(&g);
        let t_gg = t.dot(&t);
        let t_ig = self.factor_traces.dot(&t);
        let tr_cg = trace_of_product(self.moments.c(), &g);
        Ok(MseBreakdown::assemble(t_gg, t_ig, tr_cg, self.moments))
    }

    pub fn value(&self, s: &SequenceMatrix) -> Result<f64> {
        Ok(self.breakdown(s)?.total)
    }

    pub fn gradient(&self, s: &SequenceMatrix) -> Result<DMatrix<f64>> {
        check_dims(s, self.moments)?;
        let k = self.moments.config().num_nodes;
        let cfg = self.moments.config();
        let g = s.gram();
        let t = self.factor_gram_traces(&g);
        // Δ⁽¹⁾ − 2Δ⁽²⁾ = S · Σ_k 2 (tr{M_k G} − tr{M_k}) (M_k + M_kᵀ)
        let coeffs = (t - &self.factor_traces) * 2.0;
        let combined = self.factor_rows.tr_mul(&coeffs);
        let w = unvec_square(combined.as_slice(), k);
        let noise = (2.0 * cfg.seq_len as f64 + 4.0) * cfg.sigma_n2;
        let inner = &w + w.transpose() + &self.c_sym * noise;
        Ok(s.as_matrix() * inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kron::kron_decompose_symmetric;
    use crate::moments::SystemConfig;

    fn setup(k: usize, m: usize, p: f64, sn: f64) -> (MomentSet, KronFactorization) {
        let moments = MomentSet::new(SystemConfig::new(k, m, p, 1.0, sn).unwrap()).unwrap();
        let kron = kron_decompose_symmetric(moments.m()).unwrap();
        (moments, kron)
    }

    fn scalar_j(s: f64, sn: f64) -> f64 {
        let one_minus = 1.0 - s * s;
        3.0 * one_minus * one_minus + 4.0 * sn * s * s + 3.0 * sn * sn - 2.0 * sn * one_minus
    }

    #[test]
    fn scalar_closed_form() {
        let (moments, kron) = setup(1, 1, 2.0, 0.1);
        for s in [0.0, 0.3, 1.0, -1.7] {
            let seq = SequenceMatrix::from_rows(1, 1, &[s]).unwrap();
            let dense = mse(&seq, &moments).unwrap().total;
            let fact = mse_factorized(&seq, &moments, &kron).unwrap().total;
            assert!((dense - scalar_j(s, 0.1)).abs() < 1e-12, "s={s}");
            assert!((fact - scalar_j(s, 0.1)).abs() < 1e-12, "s={s}");
        }
        let at_one = mse(&SequenceMatrix::from_rows(1, 1, &[1.0]).unwrap(), &moments).unwrap();
        assert!((at_one.total - 0.43).abs() < 1e-12);
    }

    #[test]
    fn scalar_gradient_closed_form() {
        let sn = 0.1;
        let (moments, kron) = setup(1, 1, 2.0, sn);
        for s in [0.25, 0.9, -1.3] {
            let seq = SequenceMatrix::from_rows(1, 1, &[s]).unwrap();
            let g = gradient(&seq, &moments, &kron).unwrap()[(0, 0)];
            let expected = -12.0 * s * (1.0 - s * s) + 8.0 * sn * s + 4.0 * sn * s;
            assert!((g - expected).abs() < 1e-11, "s={s}: {g} vs {expected}");
        }
    }

    #[test]
    fn orthonormal_noiseless_is_exact() {
        let (moments, _) = setup(3, 3, 1.3, 0.0);
        let s = SequenceMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!(mse(&s, &moments).unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn zero_sequences_leave_constant_terms() {
        let (moments, _) = setup(3, 2, 1.0, 0.2);
        let b = mse(&SequenceMatrix::zeros(2, 3), &moments).unwrap();
        let expected = moments.trace_m() + moments.trace_n() - 2.0 * 2.0 * 0.2 * moments.trace_c();
        assert!((b.total - expected).abs() < 1e-12);
        assert_eq!(b.e_b2, 0.0);
    }

    #[test]
    fn zero_sequences_have_zero_gradient() {
        let (moments, kron) = setup(3, 2, 1.0, 0.2);
        let g = gradient(&SequenceMatrix::zeros(2, 3), &moments, &kron).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn breakdown_total_is_consistent() {
        let (moments, _) = setup(4, 2, 0.7, 0.05);
        let s = SequenceMatrix::from_rows(2, 4, &[0.3, -0.2, 0.9, 0.1, 0.5, 0.4, -0.6, 0.2]).unwrap();
        let b = mse(&s, &moments).unwrap();
        assert!((b.total - (b.e_a2 + b.e_b2 + b.e_c2 - 2.0 * b.e_ac)).abs() < 1e-14);
        assert!(b.total > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let (moments, kron) = setup(3, 2, 1.0, 0.1);
        let s = SequenceMatrix::zeros(3, 3);
        assert!(matches!(mse(&s, &moments), Err(Error::Dimension(_))));
        assert!(matches!(gradient(&s, &moments, &kron), Err(Error::Dimension(_))));
        let (_, other) = setup(2, 2, 1.0, 0.1);
        assert!(matches!(FactorizedObjective::new(&moments, &other), Err(Error::Dimension(_))));
    }

    #[test]
    fn general_factorization_is_rejected_for_gradients() {
        let (moments, _) = setup(2, 2, 1.0, 0.1);
        let general = crate::kron::kron_decompose(moments.m()).unwrap();
        assert!(FactorizedObjective::new(&moments, &general).is_err());
    }

    #[test]
    fn scale_profile_matches_mse() {
        let (moments, _) = setup(3, 2, 1.5, 0.3);
        let s = SequenceMatrix::from_rows(2, 3, &[0.4, -0.1, 0.8, 0.2, 0.7, -0.3]).unwrap();
        let prof = mse_scale_profile(&s, &moments).unwrap();
        assert!(prof.quartic >= 0.0);
        for gamma in [0.0, 0.5, 1.0, 2.0] {
            let direct = mse(&s.scaled(gamma), &moments).unwrap().total;
            assert!((prof.eval(gamma) - direct).abs() <= 1e-9 * direct.abs().max(1.0), "gamma={gamma}");
        }
        assert!(mse_scale_profile(&SequenceMatrix::zeros(2, 3), &moments).is_err());
    }

    #[test]
    fn powers() {
        let s = SequenceMatrix::from_rows(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.total_power(), 6.0);
        assert_eq!(s.max_column_power(), 5.0);
    }
}
