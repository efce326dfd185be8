//! Runs the experiment grid: moments, scaled baseline, descent and Monte
//! Carlo validation for every point.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use lpcomac::frames::{load_matrix, optimal_scale, random_init, FrameSpec};
use lpcomac::kron::kron_decompose_symmetric;
use lpcomac::objective::{mse, SequenceMatrix};
use lpcomac::optimizer::{gradient_descent, OptimizerTrace};
use lpcomac::simulator::empirical_mse;
use lpcomac::{MomentSet, SystemConfig};
use rayon::prelude::*;

use crate::spec::{Cell, ExperimentSpec, InitPolicy};

/// One row of the sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub p: f64,
    pub num_nodes: usize,
    pub seq_len: usize,
    pub sigma_x2: f64,
    pub sigma_n2: f64,
    pub j_analytic_init: f64,
    pub j_analytic_opt: f64,
    pub j_mc_init: f64,
    pub j_mc_opt: f64,
    pub mc_std_error_init: f64,
    pub mc_std_error_opt: f64,
    pub iterations: usize,
    pub termination_reason: String,
    pub init_total_power: f64,
    pub opt_total_power: f64,
    pub opt_max_column_power: f64,
}

impl SweepRecord {
    pub fn is_skipped(&self) -> bool {
        self.termination_reason.starts_with("skipped")
    }

    fn skipped(point: &GridPoint, reason: &str) -> Self {
        Self {
            p: point.p,
            num_nodes: point.cell.num_nodes,
            seq_len: point.cell.seq_len,
            sigma_x2: point.sigma_x2,
            sigma_n2: point.sigma_n2,
            j_analytic_init: f64::NAN,
            j_analytic_opt: f64::NAN,
            j_mc_init: f64::NAN,
            j_mc_opt: f64::NAN,
            mc_std_error_init: f64::NAN,
            mc_std_error_opt: f64::NAN,
            iterations: 0,
            termination_reason: format!("skipped: {reason}"),
            init_total_power: f64::NAN,
            opt_total_power: f64::NAN,
            opt_max_column_power: f64::NAN,
        }
    }

    fn sort_key(&self) -> (usize, usize, f64, f64, f64) {
        (self.num_nodes, self.seq_len, self.sigma_n2, self.p, self.sigma_x2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub cell: Cell,
    pub sigma_x2: f64,
    pub sigma_n2: f64,
    pub p: f64,
}

impl GridPoint {
    /// File stem shared by the saved matrices of this point.
    pub fn stem(&self) -> String {
        format!(
            "K{}_L{}_sx2_{}_sn2_{}_p_{}",
            self.cell.num_nodes, self.cell.seq_len, self.sigma_x2, self.sigma_n2, self.p
        )
    }
}

/// Per-point result: the record plus the matrices to be saved.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: GridPoint,
    pub record: SweepRecord,
    pub init: Option<SequenceMatrix>,
    pub optimized: Option<SequenceMatrix>,
    pub trace: Option<OptimizerTrace>,
    /// Index of the winning restart for random multi-start.
    pub winning_restart: Option<usize>,
}

/// Grid points in output order `(K, seq_len, σn², p, σx²)`.
pub fn grid_points(spec: &ExperimentSpec) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for &cell in &spec.cells {
        for &sigma_x2 in &spec.sigma_x2 {
            for &sigma_n2 in &spec.sigma_n2 {
                for &p in &spec.p_grid {
                    points.push(GridPoint { cell, sigma_x2, sigma_n2, p });
                }
            }
        }
    }
    points.sort_by(|a, b| {
        (a.cell, a.sigma_n2, a.p, a.sigma_x2)
            .partial_cmp(&(b.cell, b.sigma_n2, b.p, b.sigma_x2))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points
}

struct Candidate {
    init: SequenceMatrix,
    init_objective: f64,
    optimized: SequenceMatrix,
    optimized_objective: f64,
    trace: Option<OptimizerTrace>,
}

fn initial_matrices(spec: &ExperimentSpec, cell: Cell) -> Result<Vec<SequenceMatrix>> {
    let (m, k) = (cell.seq_len, cell.num_nodes);
    Ok(match &spec.init {
        InitPolicy::ScaledEtf => vec![FrameSpec::builtin(m, k)?.build()?],
        InitPolicy::Random { count, seed, scale } => (0..*count as u64)
            .map(|r| random_init(m, k, *scale, seed.wrapping_add(r)))
            .collect::<lpcomac::Result<_>>()?,
        InitPolicy::File { dir } => {
            let path: PathBuf = dir.join(format!("S_{m}x{k}.txt"));
            let s = load_matrix(&path)?;
            if s.seq_len() != m || s.num_nodes() != k {
                return Err(anyhow!("{} holds a {}x{} matrix", path.display(), s.seq_len(), s.num_nodes()));
            }
            vec![s]
        }
    })
}

fn optimize_from(
    start: &SequenceMatrix,
    moments: &MomentSet,
    kron: &lpcomac::KronFactorization,
    spec: &ExperimentSpec,
) -> Result<Candidate> {
    let scaled = optimal_scale(start, moments)?;
    if scaled.scaled.is_zero() {
        // the origin is stationary; nothing to descend from
        return Ok(Candidate {
            init: scaled.scaled.clone(),
            init_objective: scaled.objective,
            optimized: scaled.scaled,
            optimized_objective: scaled.objective,
            trace: None,
        });
    }
    let (s_opt, trace) = gradient_descent(&scaled.scaled, moments, kron, &spec.optimizer)?;
    let j_opt = mse(&s_opt, moments)?.total;
    // keep the better of start and end under the dense evaluation as well
    let (optimized, optimized_objective) =
        if j_opt <= scaled.objective { (s_opt, j_opt) } else { (scaled.scaled.clone(), scaled.objective) };
    Ok(Candidate {
        init: scaled.scaled,
        init_objective: scaled.objective,
        optimized,
        optimized_objective,
        trace: Some(trace),
    })
}

/// Evaluates a single grid point. Failures become skipped records.
pub fn run_point(spec: &ExperimentSpec, point: GridPoint) -> PointResult {
    match try_point(spec, point) {
        Ok(result) => result,
        Err(err) => {
            let reason = format!("{err:#}");
            log::warn!("grid point {} skipped: {reason}", point.stem());
            PointResult {
                point,
                record: SweepRecord::skipped(&point, &reason),
                init: None,
                optimized: None,
                trace: None,
                winning_restart: None,
            }
        }
    }
}

fn try_point(spec: &ExperimentSpec, point: GridPoint) -> Result<PointResult> {
    let config = SystemConfig::new(point.cell.num_nodes, point.cell.seq_len, point.p, point.sigma_x2, point.sigma_n2)?;
    let starts = initial_matrices(spec, point.cell)?;
    let moments = MomentSet::new(config)?;
    let kron = kron_decompose_symmetric(moments.m())?.truncate(spec.truncation)?;

    let mut best: Option<(usize, Candidate)> = None;
    for (idx, start) in starts.iter().enumerate() {
        let cand = optimize_from(start, &moments, &kron, spec)?;
        if best.as_ref().is_none_or(|(_, b)| cand.optimized_objective < b.optimized_objective) {
            best = Some((idx, cand));
        }
    }
    let (winner, cand) = best.ok_or_else(|| anyhow!("no initial matrix available"))?;

    let mc_init = empirical_mse(&cand.init, &config, &spec.mc)?;
    let mc_opt = empirical_mse(&cand.optimized, &config, &spec.mc)?;
    let (iterations, reason) = match &cand.trace {
        Some(t) => (t.steps(), t.termination_reason.as_str().to_string()),
        None => (0, "stationary_start".to_string()),
    };
    let record = SweepRecord {
        p: point.p,
        num_nodes: point.cell.num_nodes,
        seq_len: point.cell.seq_len,
        sigma_x2: point.sigma_x2,
        sigma_n2: point.sigma_n2,
        j_analytic_init: cand.init_objective,
        j_analytic_opt: cand.optimized_objective,
        j_mc_init: mc_init.mean_sq_error,
        j_mc_opt: mc_opt.mean_sq_error,
        mc_std_error_init: mc_init.std_error,
        mc_std_error_opt: mc_opt.std_error,
        iterations,
        termination_reason: reason,
        init_total_power: cand.init.total_power(),
        opt_total_power: cand.optimized.total_power(),
        opt_max_column_power: cand.optimized.max_column_power(),
    };
    let winning_restart = matches!(spec.init, InitPolicy::Random { .. }).then_some(winner);
    Ok(PointResult {
        point,
        record,
        init: Some(cand.init),
        optimized: Some(cand.optimized),
        trace: cand.trace,
        winning_restart,
    })
}

/// Runs every grid point (concurrently when a thread pool is available) and
/// returns the results in output order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<PointResult>> {
    spec.validate()?;
    let mut results: Vec<PointResult> = grid_points(spec).into_par_iter().map(|point| run_point(spec, point)).collect();
    results.sort_by(|a, b| a.record.sort_key().partial_cmp(&b.record.sort_key()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            cells: vec![Cell { num_nodes: 6, seq_len: 3 }],
            sigma_n2: vec![0.0],
            p_grid: vec![2.0],
            mc: lpcomac::McConfig { num_samples: 2_000, seed: 1, chunk_size: 512 },
            ..Default::default()
        }
    }

    #[test]
    fn single_point_improves_on_the_baseline() {
        let results = run_sweep(&small_spec()).unwrap();
        assert_eq!(results.len(), 1);
        let r = &results[0].record;
        assert!(!r.is_skipped());
        assert!(r.j_analytic_opt <= r.j_analytic_init);
        assert!(r.j_analytic_opt.is_finite() && r.j_mc_opt.is_finite());
        assert!(r.init_total_power > 0.0);
    }

    #[test]
    fn unsupported_cell_is_skipped() {
        let spec = ExperimentSpec { cells: vec![Cell { num_nodes: 5, seq_len: 2 }], ..small_spec() };
        let results = run_sweep(&spec).unwrap();
        assert!(results[0].record.is_skipped());
        assert!(results[0].record.termination_reason.contains("unsupported frame"));
    }

    #[test]
    fn random_multistart_records_winner() {
        let spec = ExperimentSpec {
            cells: vec![Cell { num_nodes: 5, seq_len: 2 }],
            init: InitPolicy::Random { count: 3, seed: 11, scale: 1.0 },
            ..small_spec()
        };
        let results = run_sweep(&spec).unwrap();
        assert!(!results[0].record.is_skipped());
        assert!(results[0].winning_restart.is_some_and(|w| w < 3));
    }

    #[test]
    fn grid_is_sorted() {
        let spec = ExperimentSpec {
            cells: vec![Cell { num_nodes: 16, seq_len: 6 }, Cell { num_nodes: 6, seq_len: 3 }],
            sigma_n2: vec![0.1, 1e-3],
            p_grid: vec![2.0, 0.5],
            ..Default::default()
        };
        let pts = grid_points(&spec);
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0].cell.num_nodes, 6);
        assert_eq!((pts[0].sigma_n2, pts[0].p), (1e-3, 0.5));
        assert_eq!((pts[1].sigma_n2, pts[1].p), (1e-3, 2.0));
        assert_eq!(pts[2].sigma_n2, 0.1);
    }
}
