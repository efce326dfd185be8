//! Block rearrangement and Kronecker-sum decompositions.
//!
//! For a `K² × K²` matrix `A` partitioned into `K × K` blocks `A_{i,j}`, the
//! rearrangement `R(A)` stacks `vec{A_{i,j}}ᵀ` as rows in column-major block
//! order `(1,1), (2,1), …, (K,1), (1,2), …, (K,K)`. It maps `B ⊗ C` to the
//! rank-one matrix `vec{B} vec{C}ᵀ`, so an SVD of `R(A)` yields
//! `A = Σ σ_k U_k ⊗ V_k`.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result, StructureCheck};
use crate::linalg::{asymmetry, exact_sqrt, rel_frobenius_error, sorted_symmetric_eigen, unvec_square};

/// Relative tolerance for the `R(A) = A` precondition of the symmetric path.
pub const SYMMETRIC_PATH_TOL: f64 = 1e-8;

/// Eigenvalues below `−NEGATIVE_EIG_TOL · λ_max` are a PSD violation.
pub const NEGATIVE_EIG_TOL: f64 = 1e-10;

fn block_side(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    exact_sqrt(a.nrows())
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::Dimension(format!("side {} is not a positive perfect square", a.nrows())))
}

/// `R(A)`: row `i + K·j` holds `vec{A_{i,j}}ᵀ`.
pub fn rearrange(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = block_side(a)?;
    let n = k * k;
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let (bi, bj) = (row % k, row / k);
        let (r, c) = (col % k, col / k);
        a[(bi * k + r, bj * k + c)]
    }))
}

/// Inverse permutation of [`rearrange`].
pub fn rearrange_inverse(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = block_side(r)?;
    let n = k * k;
    Ok(DMatrix::from_fn(n, n, |row, col| {
        let (bi, r_in) = (row / k, row % k);
        let (bj, c_in) = (col / k, col % k);
        r[(bi + k * bj, r_in + k * c_in)]
    }))
}

/// Weights and Kronecker factors of `A = Σ_k σ_k U_k ⊗ V_k`.
///
/// Weights are nonnegative and sorted in descending order. On the symmetric
/// path `U_k = V_k` and the scaled factors `M_k = √σ_k U_k` satisfy
/// `A = Σ_k M_k ⊗ M_k`.
#[derive(Debug, Clone)]
pub struct KronFactorization {
    source_dim: usize,
    weights: Vec<f64>,
    left: Vec<DMatrix<f64>>,
    right: Vec<DMatrix<f64>>,
    scaled: Option<Vec<DMatrix<f64>>>,
}

impl KronFactorization {
    /// Block size `K` of the decomposed `K² × K²` matrix.
    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn left_factors(&self) -> &[DMatrix<f64>] {
        &self.left
    }

    pub fn right_factors(&self) -> &[DMatrix<f64>] {
        &self.right
    }

    /// Whether this came from [`kron_decompose_symmetric`].
    pub fn is_symmetric(&self) -> bool {
        self.scaled.is_some()
    }

    /// The scaled factors `M_k`, available on the symmetric path only.
    pub fn symmetric_factors(&self) -> Option<&[DMatrix<f64>]> {
        self.scaled.as_deref()
    }

    /// `Σ σ_k U_k ⊗ V_k`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.source_dim * self.source_dim;
        let mut out = DMatrix::zeros(n, n);
        for ((w, u), v) in self.weights.iter().zip(&self.left).zip(&self.right) {
            if *w != 0.0 {
                out += u.kronecker(v) * *w;
            }
        }
        out
    }

    /// Drops every term with `σ_k < rel_tol · σ_1`. `rel_tol = 0` keeps all.
    pub fn truncate(&self, rel_tol: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rel_tol) {
            return Err(Error::InvalidConfig(format!("truncation tolerance {rel_tol} outside [0, 1)")));
        }
        let Some(&top) = self.weights.first() else {
            return Ok(self.clone());
        };
        let keep = self.weights.iter().take_while(|&&w| w >= rel_tol * top).count();
        Ok(Self {
            source_dim: self.source_dim,
            weights: self.weights[..keep].to_vec(),
            left: self.left[..keep].to_vec(),
            right: self.right[..keep].to_vec(),
            scaled: self.scaled.as_ref().map(|s| s[..keep].to_vec()),
        })
    }
}

/// Flips the sign of `v` so that its first nonzero component is positive.
fn canonical_sign(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let threshold = scale * 1e-12;
    match v.iter().find(|x| x.abs() > threshold) {
        Some(&x) if x < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// General decomposition through an SVD of `R(A)`.
pub fn kron_decompose(a: &DMatrix<f64>) -> Result<KronFactorization> {
    let k = block_side(a)?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let r = rearrange(a)?;
    let svd = SVD::try_new(r, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD of the rearranged matrix did not converge".into()))?;
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD returned no left vectors".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD returned no right vectors".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut weights = Vec::with_capacity(order.len());
    let mut left = Vec::with_capacity(order.len());
    let mut right = Vec::with_capacity(order.len());
    for idx in order {
        let uk: Vec<f64> = u.column(idx).iter().copied().collect();
        let vk: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let sign = canonical_sign(&uk);
        weights.push(svd.singular_values[idx].max(0.0));
        left.push(unvec_square(&uk, k) * sign);
        right.push(unvec_square(&vk, k) * sign);
    }
    Ok(KronFactorization { source_dim: k, weights, left, right, scaled: None })
}

/// Decomposition `A = Σ M_k ⊗ M_k` through an eigendecomposition of `A`.
///
/// Requires `A` symmetric, PSD and invariant under [`rearrange`]; each failed
/// check is reported by [`StructureCheck`]. Eigenvalues in
/// `[−1e-10·λ_max, 0)` and those below the rounding floor `K²·ε·λ_max` are
/// set to zero.
pub fn kron_decompose_symmetric(a: &DMatrix<f64>) -> Result<KronFactorization> {
    let k = block_side(a)?;
    let n = k * k;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = a.norm();
    let skew = (a - a.transpose()).norm();
    if skew > SYMMETRIC_PATH_TOL * scale {
        return Err(Error::Structure {
            check: StructureCheck::Symmetry,
            detail: format!("‖A − Aᵀ‖_F = {skew:.3e} against ‖A‖_F = {scale:.3e}"),
        });
    }
    let rearranged = rearrange(a)?;
    let rel = rel_frobenius_error(&rearranged, a);
    if rel > SYMMETRIC_PATH_TOL {
        return Err(Error::Structure {
            check: StructureCheck::Rearrangement,
            detail: format!("R(A) differs from A by {rel:.3e} (relative Frobenius)"),
        });
    }

    let sym = (a + a.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(&sym);
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&lambda_min) = values.last() {
        if lambda_min < -NEGATIVE_EIG_TOL * lambda_max {
            return Err(Error::Structure {
                check: StructureCheck::PositiveSemidefinite,
                detail: format!("eigenvalue {lambda_min:.3e} below −1e-10·λ_max (λ_max = {lambda_max:.3e})"),
            });
        }
    }
    let floor = (n as f64) * f64::EPSILON * lambda_max;

    let mut weights = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut scaled = Vec::with_capacity(n);
    for (idx, &lambda) in values.iter().enumerate() {
        let lambda = if lambda <= floor { 0.0 } else { lambda };
        let col: Vec<f64> = vectors.column(idx).iter().copied().collect();
        let sign = canonical_sign(&col);
        let unit = unvec_square(&col, k) * sign;
        scaled.push(&unit * lambda.sqrt());
        weights.push(lambda);
        left.push(unit);
    }
    Ok(KronFactorization { source_dim: k, weights, right: left.clone(), left, scaled: Some(scaled) })
}

/// Largest asymmetry `max |M_k − M_kᵀ|` over the scaled symmetric factors.
pub fn factor_asymmetry(fact: &KronFactorization) -> f64 {
    fact.symmetric_factors().map(|fs| fs.iter().map(asymmetry).fold(0.0, f64::max)).unwrap_or(f64::INFINITY)
}
