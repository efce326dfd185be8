//! Gradient descent with Armijo backtracking over unconstrained sequence
//! matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kron::KronFactorization;
use crate::moments::MomentSet;
use crate::objective::{FactorizedObjective, SequenceMatrix};

/// Objective values below this are treated as exact recovery.
pub const ZERO_OBJECTIVE: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerParams {
    /// Relative decrease threshold `ε`.
    pub rel_tol: f64,
    /// Sufficient-decrease constant `c` of the Armijo test.
    pub armijo_c: f64,
    /// Iteration cap `T`.
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            armijo_c: 0.5,
            max_iters: 100_000,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("rel_tol = {} must be positive", self.rel_tol)));
        }
        if !open_unit(self.armijo_c) {
            return Err(Error::InvalidConfig(format!("armijo_c = {} must lie in (0, 1)", self.armijo_c)));
        }
        if !open_unit(self.backtrack_factor) {
            return Err(Error::InvalidConfig(format!(
                "backtrack_factor = {} must lie in (0, 1)",
                self.backtrack_factor
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::InvalidConfig(format!("initial_step = {} must be positive", self.initial_step)));
        }
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidConfig("max_iters and max_backtracks must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIters,
    StalledLineSearch,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxIters => "max_iters",
            TerminationReason::StalledLineSearch => "stalled_line_search",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State at iterate `t`: objective, gradient norm, and the step accepted
/// when leaving it (`None` for the final iterate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub iterations: Vec<TraceEntry>,
    pub termination_reason: TerminationReason,
}

impl OptimizerTrace {
    /// Number of accepted gradient steps.
    pub fn steps(&self) -> usize {
        self.iterations.iter().filter(|e| e.step.is_some()).count()
    }

    pub fn initial_objective(&self) -> f64 {
        self.iterations.first().map(|e| e.objective).unwrap_or(f64::NAN)
    }

    pub fn final_objective(&self) -> f64 {
        self.iterations.last().map(|e| e.objective).unwrap_or(f64::NAN)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.iterations.windows(2).all(|w| w[1].objective <= w[0].objective)
    }

    /// Re-checks `J_{t+1} ≤ J_t − c μ_t ‖∇J_t‖²` for every accepted step.
    pub fn armijo_holds(&self, armijo_c: f64) -> bool {
        self.iterations.windows(2).all(|w| match w[0].step {
            Some(mu) => w[1].objective <= w[0].objective - armijo_c * mu * w[0].grad_norm * w[0].grad_norm,
            None => false,
        })
    }
}

/// Accepted Armijo step.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoStep {
    pub step: f64,
    pub next: SequenceMatrix,
    pub objective: f64,
}

/// Backtracks over `μ = initial_step · backtrack_factor^j`, `j = 0..=max_backtracks`,
/// and returns the first step satisfying
/// `J(S − μ∇J) ≤ J(S) − c μ ‖∇J‖_F²`. `Ok(None)` means no step on the
/// ladder qualified.
pub fn armijo_step<F>(
    s: &SequenceMatrix,
    grad: &DMatrix<f64>,
    current: f64,
    params: &OptimizerParams,
    mut eval: F,
) -> Result<Option<ArmijoStep>>
where
    F: FnMut(&SequenceMatrix) -> Result<f64>,
{
    if grad.shape() != s.as_matrix().shape() {
        return Err(Error::Dimension("gradient shape differs from the iterate".into()));
    }
    let grad_sq = grad.norm_squared();
    if grad_sq == 0.0 {
        return Err(Error::Domain("line search called with a zero gradient".into()));
    }
    let mut mu = params.initial_step;
    for _ in 0..=params.max_backtracks {
        let candidate = s.as_matrix() - grad * mu;
        if candidate.iter().all(|v| v.is_finite()) {
            let next = SequenceMatrix::new(candidate)?;
            let value = eval(&next)?;
            if value.is_finite() && value <= current - params.armijo_c * mu * grad_sq {
                return Ok(Some(ArmijoStep { step: mu, next, objective: value }));
            }
        }
        mu *= params.backtrack_factor;
    }
    Ok(None)
}

/// Minimizes `J` from `s0`. Continues while the relative decrease
/// `(J_{t−1} − J_t) ≥ ε J_t` and fewer than `max_iters` steps were taken.
pub fn gradient_descent(
    s0: &SequenceMatrix,
    moments: &MomentSet,
    kron: &KronFactorization,
    params: &OptimizerParams,
) -> Result<(SequenceMatrix, OptimizerTrace)> {
    params.validate()?;
    if s0.is_zero() {
        return Err(Error::Domain(
            "initial sequence matrix is zero, which is a stationary point of J; start elsewhere".into(),
        ));
    }
    let objective = FactorizedObjective::new(moments, kron)?;

    let mut s = s0.clone();
    let mut value = objective.value(&s)?;
    let mut grad = objective.gradient(&s)?;
    let mut iterations = vec![TraceEntry { iter: 0, objective: value, grad_norm: grad.norm(), step: None }];

    let reason = loop {
        let t = iterations.len() - 1;
        if value < ZERO_OBJECTIVE || iterations[t].grad_norm == 0.0 {
            break TerminationReason::Converged;
        }
        if t >= params.max_iters {
            break TerminationReason::MaxIters;
        }
        let Some(step) = armijo_step(&s, &grad, value, params, |x| objective.value(x))? else {
            break TerminationReason::StalledLineSearch;
        };
        iterations[t].step = Some(step.step);
        let previous = value;
        s = step.next;
        value = step.objective;
        grad = objective.gradient(&s)?;
        iterations.push(TraceEntry { iter: t + 1, objective: value, grad_norm: grad.norm(), step: None });
        if previous - value < params.rel_tol * value {
            break TerminationReason::Converged;
        }
    };

    Ok((s, OptimizerTrace { iterations, termination_reason: reason }))
}
