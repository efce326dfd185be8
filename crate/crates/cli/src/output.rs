//! Sweep artifacts: the CSV table, plot-data series and matrix files.
//!
//! CSV columns, in order:
//!
//! ```text
//! p, K, seq_len, sigma_x2, sigma_n2, J_analytic_init, J_analytic_opt,
//! J_mc_init, J_mc_opt, mc_std_error_init, mc_std_error_opt, iterations,
//! termination_reason, init_total_power, opt_total_power, opt_max_column_power
//! ```
//!
//! Floats are written as `{:.16e}` (17 significant digits, round-trips
//! exactly). Skipped points carry `NaN` values and a `skipped: …` reason.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lpcomac::frames::save_matrix;

use crate::sweep::{PointResult, SweepRecord};

pub const CSV_HEADER: &str = "p,K,seq_len,sigma_x2,sigma_n2,J_analytic_init,J_analytic_opt,J_mc_init,J_mc_opt,\
mc_std_error_init,mc_std_error_opt,iterations,termination_reason,init_total_power,opt_total_power,\
opt_max_column_power";

/// Written in place of `log₁₀ J` when `J ≤ 0` or is not finite.
pub const LOG_SENTINEL: f64 = f64::NAN;

fn float(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

/// Commas and newlines would break the positional format.
fn sanitize(reason: &str) -> String {
    reason.chars().map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c }).collect()
}

pub fn csv_row(r: &SweepRecord) -> String {
    let mut out = String::new();
    float(&mut out, r.p);
    let _ = write!(out, ",{},{},", r.num_nodes, r.seq_len);
    float(&mut out, r.sigma_x2);
    out.push(',');
    float(&mut out, r.sigma_n2);
    for v in [r.j_analytic_init, r.j_analytic_opt, r.j_mc_init, r.j_mc_opt, r.mc_std_error_init, r.mc_std_error_opt] {
        out.push(',');
        float(&mut out, v);
    }
    let _ = write!(out, ",{},{}", r.iterations, sanitize(&r.termination_reason));
    for v in [r.init_total_power, r.opt_total_power, r.opt_max_column_power] {
        out.push(',');
        float(&mut out, v);
    }
    out
}

pub fn format_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn emit_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    std::fs::write(path, format_csv(records)).with_context(|| format!("writing {}", path.display()))
}

/// `log₁₀ J`, or the sentinel (with a warning) when the log is undefined.
pub fn log10_or_sentinel(j: f64, what: &str) -> f64 {
    if j > 0.0 && j.is_finite() {
        j.log10()
    } else {
        log::warn!("{what}: J = {j} has no logarithm, writing sentinel");
        LOG_SENTINEL
    }
}

/// Key of one plot panel: `(K, seq_len, σx², σn²)`, floats as bit patterns
/// so the map orders deterministically.
type PanelKey = (usize, usize, u64, u64);

fn panel_name(key: &PanelKey) -> String {
    format!("K{}_L{}_sx2_{}_sn2_{}", key.0, key.1, f64::from_bits(key.2), f64::from_bits(key.3))
}

/// Writes one `p log10(J)` file per panel, method (`baseline` label or `opt`)
/// and variant (`analytic`, `mc`). Returns the written paths.
pub fn emit_plotdata(dir: &Path, records: &[SweepRecord], baseline: &str) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("no records to plot");
    }
    let mut panels: BTreeMap<PanelKey, Vec<&SweepRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_skipped()) {
        panels.entry((r.num_nodes, r.seq_len, r.sigma_x2.to_bits(), r.sigma_n2.to_bits())).or_default().push(r);
    }
    let mut written = Vec::new();
    for (key, mut rows) in panels {
        rows.sort_by(|a, b| a.p.total_cmp(&b.p));
        let panel = panel_name(&key);
        type Getter = fn(&SweepRecord) -> f64;
        let series: [(&str, &str, Getter); 4] = [
            (baseline, "analytic", |r| r.j_analytic_init),
            (baseline, "mc", |r| r.j_mc_init),
            ("opt", "analytic", |r| r.j_analytic_opt),
            ("opt", "mc", |r| r.j_mc_opt),
        ];
        for (method, variant, get) in series {
            let name = format!("{panel}_{method}_{variant}");
            let mut text = String::from("# p log10_J\n");
            for r in &rows {
                let y = log10_or_sentinel(get(r), &format!("{name} at p = {}", r.p));
                let _ = writeln!(text, "{:.16e} {:.16e}", r.p, y);
            }
            let path = dir.join(format!("{name}.dat"));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Saves `init` and `opt` matrices of every successful point under `dir`.
pub fn save_matrices(dir: &Path, results: &[PointResult]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for res in results {
        for (tag, mat) in [("init", &res.init), ("opt", &res.optimized)] {
            if let Some(s) = mat {
                let path = dir.join(format!("S_{}_{tag}.txt", res.point.stem()));
                save_matrix(&path, s).with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Winning restart of each random multi-start point, as
/// `K,seq_len,sigma_x2,sigma_n2,p,winning_seed`.
pub fn emit_restarts(path: &Path, results: &[PointResult], base_seed: u64) -> Result<()> {
    let mut text = String::from("K,seq_len,sigma_x2,sigma_n2,p,winning_seed\n");
    for res in results {
        if let Some(w) = res.winning_restart {
            let r = &res.record;
            let _ = writeln!(
                text,
                "{},{},{:.16e},{:.16e},{:.16e},{}",
                r.num_nodes,
                r.seq_len,
                r.sigma_x2,
                r.sigma_n2,
                r.p,
                base_seed.wrapping_add(w as u64)
            );
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
