//! Transmit-sequence design for computing ℓp-(pseudo)norms `Σ|x_k|^p` of
//! distributed sensor values over a real-valued multiple-access channel whose
//! receiver is a plain energy detector.
//!
//! Node `k` transmits `|x_k|^{p/2} · s_k`, the channel superimposes the
//! sequences and adds white Gaussian noise, and the sink outputs
//! `f̂ = ‖S φ(x) + n‖²`. Under i.i.d. Gaussian sensor values the mean squared
//! error `J(S) = E[(f − f̂)²]` has a closed form in terms of Gaussian absolute
//! moments, which is minimized here by Armijo gradient descent.
//!
//! Modules, bottom-up:
//! - [`moments`]: closed-form moment matrices `C`, `M` and `tr{N}`.
//! - [`kron`]: block rearrangement and Kronecker-sum decompositions.
//! - [`objective`]: analytic MSE and its gradient.
//! - [`optimizer`]: gradient descent with Armijo backtracking.
//! - [`frames`]: equiangular tight frame baselines, scaling, random starts.
//! - [`simulator`]: Monte Carlo estimation of the true MSE.

pub mod error;
pub mod frames;
pub mod kron;
pub mod linalg;
pub mod moments;
pub mod objective;
pub mod optimizer;
pub mod simulator;
pub mod sum;

pub use error::{Error, Result, StructureCheck};
pub use frames::{EtfReport, FrameSource, FrameSpec};
pub use kron::KronFactorization;
pub use moments::{MomentSet, SystemConfig};
pub use objective::{MseBreakdown, ScaleProfile, SequenceMatrix};
pub use optimizer::{OptimizerParams, OptimizerTrace, TerminationReason, TraceEntry};
pub use simulator::{McConfig, McEstimate};
