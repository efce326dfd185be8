//! Baseline sequence matrices: equiangular tight frames, their optimal
//! scaling along the ray `γ·S0`, random starts and the matrix text format.
//!
//! Text format: the first line holds `seq_len K`; then `seq_len` lines with
//! `K` whitespace-separated decimals printed with 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::moments::MomentSet;
use crate::objective::{mse, mse_scale_profile, SequenceMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    Builtin3x6,
    Builtin6x16,
    File(PathBuf),
    Random { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub seq_len: usize,
    pub num_vectors: usize,
    pub source: FrameSource,
}

impl FrameSpec {
    /// The builtin ETF for `(seq_len, num_vectors)`, if there is one.
    pub fn builtin(seq_len: usize, num_vectors: usize) -> Result<Self> {
        let source = match (seq_len, num_vectors) {
            (3, 6) => FrameSource::Builtin3x6,
            (6, 16) => FrameSource::Builtin6x16,
            _ => return Err(Error::UnsupportedFrame { seq_len, num_vectors }),
        };
        Ok(Self { seq_len, num_vectors, source })
    }

    /// Materializes the frame from its source.
    pub fn build(&self) -> Result<SequenceMatrix> {
        let s = match &self.source {
            FrameSource::Builtin3x6 | FrameSource::Builtin6x16 => build_etf(self)?,
            FrameSource::File(path) => load_matrix(path)?,
            FrameSource::Random { seed, scale } => random_init(self.seq_len, self.num_vectors, *scale, *seed)?,
        };
        if s.seq_len() != self.seq_len || s.num_nodes() != self.num_vectors {
            return Err(Error::Dimension(format!(
                "frame is {}x{}, expected {}x{}",
                s.seq_len(),
                s.num_nodes(),
                self.seq_len,
                self.num_vectors
            )));
        }
        Ok(s)
    }
}

/// Welch bound `√((K − M) / (M (K − 1)))`, zero when `K ≤ M`.
pub fn welch_bound(seq_len: usize, num_vectors: usize) -> f64 {
    if num_vectors <= seq_len || num_vectors < 2 {
        return 0.0;
    }
    let (m, k) = (seq_len as f64, num_vectors as f64);
    ((k - m) / (m * (k - 1.0))).sqrt()
}

/// Builtin real ETFs: 3×6 from the six diagonals of the regular icosahedron
/// and 6×16 from the regular two-graph on 16 points (Seidel matrix of the
/// Clebsch graph).
pub fn build_etf(spec: &FrameSpec) -> Result<SequenceMatrix> {
    let raw = match (&spec.source, spec.seq_len, spec.num_vectors) {
        (FrameSource::Builtin3x6, 3, 6) => icosahedral_3x6(),
        (FrameSource::Builtin6x16, 6, 16) => clebsch_6x16()?,
        _ => {
            return Err(Error::UnsupportedFrame { seq_len: spec.seq_len, num_vectors: spec.num_vectors });
        }
    };
    SequenceMatrix::new(canonicalize_columns(&raw))
}

fn icosahedral_3x6() -> DMatrix<f64> {
    let phi = 0.5 * (1.0 + 5.0_f64.sqrt());
    let norm = (1.0 + phi * phi).sqrt();
    #[rustfmt::skip]
    let cols = [
        [0.0, 1.0, phi], [0.0, 1.0, -phi],
        [1.0, phi, 0.0], [1.0, -phi, 0.0],
        [phi, 0.0, 1.0], [-phi, 0.0, 1.0],
    ];
    DMatrix::from_fn(3, 6, |r, c| cols[c][r] / norm)
}

/// Clebsch graph: vertices `{0,1}⁴`, adjacent at Hamming distance 1 or 4.
/// Its Seidel matrix has spectrum {5⁶, (−3)¹⁰}, so `I + Σ/3` is the rank-6
/// Gram matrix of 16 equiangular unit vectors.
fn clebsch_6x16() -> Result<DMatrix<f64>> {
    let seidel = DMatrix::from_fn(16, 16, |i, j| {
        if i == j {
            return 0.0;
        }
        let d = ((i ^ j) as u32).count_ones();
        if d == 1 || d == 4 {
            -1.0
        } else {
            1.0
        }
    });
    let gram = DMatrix::identity(16, 16) + seidel / 3.0;
    let (values, vectors) = sorted_symmetric_eigen(&gram);
    let target = 16.0 / 6.0;
    if values[..6].iter().any(|v| (v - target).abs() > 1e-9) || values[6..].iter().any(|v| v.abs() > 1e-9) {
        return Err(Error::Numerical("two-graph Gram matrix has an unexpected spectrum".into()));
    }
    let frame = DMatrix::from_fn(6, 16, |r, c| target.sqrt() * vectors[(c, r)]);
    // Replace the eigen-solver basis by the triangular factor of a QR
    // decomposition so the result depends on the Gram matrix only.
    let qr = frame.qr();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
        }
    }
    Ok(r)
}

/// Makes each column's first nonzero entry positive and sorts columns
/// lexicographically.
pub fn canonicalize_columns(s: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut cols: Vec<Vec<f64>> = s
        .column_iter()
        .map(|c| {
            let mut col: Vec<f64> = c.iter().map(|&v| if v.abs() <= 1e-14 * scale { 0.0 } else { v }).collect();
            if col.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            col
        })
        .collect();
    cols.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| cols[c][r])
}

/// Frame quality figures for [`verify_etf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtfReport {
    pub max_norm_deviation: f64,
    pub max_coherence: f64,
    pub min_coherence: f64,
    pub welch_bound: f64,
    pub tightness_residual: f64,
    pub tol: f64,
}

impl EtfReport {
    pub fn passes(&self) -> bool {
        self.max_norm_deviation <= self.tol
            && (self.max_coherence - self.welch_bound).abs() <= self.tol
            && (self.min_coherence - self.welch_bound).abs() <= self.tol
            && self.tightness_residual <= self.tol
    }
}

/// Column norms, pairwise coherence against the Welch bound, and the
/// tightness residual `‖S Sᵀ − (K/M) I‖_F`.
pub fn verify_etf(s: &SequenceMatrix, tol: f64) -> EtfReport {
    let mat = s.as_matrix();
    let (m, k) = (s.seq_len(), s.num_nodes());
    let gram = s.gram();
    let max_norm_deviation = (0..k).map(|i| (gram[(i, i)].sqrt() - 1.0).abs()).fold(0.0, f64::max);
    let mut max_coherence = 0.0_f64;
    let mut min_coherence = if k > 1 { f64::INFINITY } else { 0.0 };
    for i in 0..k {
        for j in (i + 1)..k {
            let c = gram[(i, j)].abs() / (gram[(i, i)] * gram[(j, j)]).sqrt();
            max_coherence = max_coherence.max(c);
            min_coherence = min_coherence.min(c);
        }
    }
    let frame_op = mat * mat.transpose();
    let tightness_residual = (frame_op - DMatrix::identity(m, m) * (k as f64 / m as f64)).norm();
    EtfReport {
        max_norm_deviation,
        max_coherence,
        min_coherence,
        welch_bound: welch_bound(m, k),
        tightness_residual,
        tol,
    }
}

/// Optimal gain along the ray `γ·S0`, `γ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFrame {
    pub gamma: f64,
    pub scaled: SequenceMatrix,
    pub objective: f64,
}

/// Minimizes the exact quartic `J(γ S0) = T γ⁴ + B γ² + c₀` in closed form:
/// `γ* = √max(0, −B / (2T))`.
pub fn optimal_scale(s0: &SequenceMatrix, moments: &MomentSet) -> Result<ScaledFrame> {
    let profile = mse_scale_profile(s0, moments)?;
    let gamma = if profile.quartic > 0.0 {
        (-profile.quadratic / (2.0 * profile.quartic)).max(0.0).sqrt()
    } else if profile.quadratic < 0.0 {
        return Err(Error::Numerical(format!(
            "scale profile unbounded below (quartic {}, quadratic {})",
            profile.quartic, profile.quadratic
        )));
    } else {
        0.0
    };
    let scaled = s0.scaled(gamma);
    let objective = mse(&scaled, moments)?.total;
    Ok(ScaledFrame { gamma, scaled, objective })
}

/// I.i.d. `N(0, scale² / seq_len)` entries, so columns have expected squared
/// norm `scale²`.
pub fn random_init(seq_len: usize, num_nodes: usize, scale: f64, seed: u64) -> Result<SequenceMatrix> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!("random init scale {scale} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = scale / (seq_len as f64).sqrt();
    let values: Vec<f64> = (0..seq_len * num_nodes)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        })
        .collect();
    SequenceMatrix::from_rows(seq_len, num_nodes, &values)
}

/// Renders the matrix text format.
pub fn format_matrix(s: &SequenceMatrix) -> String {
    let mat = s.as_matrix();
    let mut out = format!("{} {}\n", mat.nrows(), mat.ncols());
    for r in 0..mat.nrows() {
        for c in 0..mat.ncols() {
            if c > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", mat[(r, c)]);
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<SequenceMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must hold two integers, got {header:?}")));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing row {}", r + 1)))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number {t:?} in row {}", r + 1))))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!("row {} has {} entries, expected {cols}", r + 1, row.len())));
        }
        values.extend(row);
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("more than {rows} data rows")));
    }
    SequenceMatrix::from_rows(rows, cols, &values)
}

pub fn load_matrix(path: &Path) -> Result<SequenceMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn save_matrix(path: &Path, s: &SequenceMatrix) -> std::io::Result<()> {
    std::fs::write(path, format_matrix(s))
}
