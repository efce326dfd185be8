//! Experiment driver for `lpcomac`: sweeps the p grid over the configured
//! node counts and noise levels and writes CSV, plot data and matrices.

pub mod output;
pub mod spec;
pub mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use spec::{Cell, ExperimentSpec, InitPolicy};
pub use sweep::{run_sweep, PointResult, SweepRecord};

/// Paths produced by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
    pub matrices: Vec<PathBuf>,
}

/// Writes `sweep.csv`, `plots/`, `matrices/` (and `restarts.csv` for random
/// multi-start) under `dir`.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, results: &[PointResult]) -> Result<Artifacts> {
    let plot_dir = dir.join("plots");
    let matrix_dir = dir.join("matrices");
    for d in [dir, &plot_dir, &matrix_dir] {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let records: Vec<SweepRecord> = results.iter().map(|r| r.record.clone()).collect();
    let csv = dir.join("sweep.csv");
    output::emit_csv(&csv, &records)?;
    let plots = if records.iter().any(|r| !r.is_skipped()) {
        output::emit_plotdata(&plot_dir, &records, spec.init.label())?
    } else {
        Vec::new()
    };
    let matrices = output::save_matrices(&matrix_dir, results)?;
    if let InitPolicy::Random { seed, .. } = spec.init {
        output::emit_restarts(&dir.join("restarts.csv"), results, seed)?;
    }
    Ok(Artifacts { csv, plots, matrices })
}
