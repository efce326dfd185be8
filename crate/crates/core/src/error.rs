use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix structure check failed ({check}): {detail}")]
    Structure { check: StructureCheck, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported frame {seq_len}x{num_vectors}: only the builtin 3x6 and 6x16 ETFs are constructed, load other frames from a matrix file")]
    UnsupportedFrame { seq_len: usize, num_vectors: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

/// Which precondition of the symmetric Kronecker decomposition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureCheck {
    Symmetry,
    PositiveSemidefinite,
    Rearrangement,
}

impl std::fmt::Display for StructureCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StructureCheck::Symmetry => "symmetry",
            StructureCheck::PositiveSemidefinite => "positive semidefinite",
            StructureCheck::Rearrangement => "rearrangement invariance",
        };
        f.write_str(name)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
