//! Experiment description: the grid, the initialization policy and the
//! optimizer/Monte Carlo settings, read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lpcomac::{McConfig, OptimizerParams};
use serde::Deserialize;

/// One `(K, seq_len)` pair of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
pub struct Cell {
    #[serde(rename = "K")]
    pub num_nodes: usize,
    pub seq_len: usize,
}

/// Where the starting matrices come from. Every start is scaled optimally
/// along its ray before the descent.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitPolicy {
    /// Builtin equiangular tight frame (3×6 or 6×16).
    ScaledEtf,
    /// `count` Gaussian starts seeded `seed, seed + 1, …`; the best final
    /// objective wins.
    Random {
        count: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_random_scale")]
        scale: f64,
    },
    /// `dir/S_<seq_len>x<K>.txt` in the matrix text format.
    File { dir: PathBuf },
}

fn default_random_scale() -> f64 {
    1.0
}

impl InitPolicy {
    /// Series label of the baseline in plot files.
    pub fn label(&self) -> &'static str {
        match self {
            InitPolicy::ScaledEtf => "wbe",
            InitPolicy::Random { .. } => "random",
            InitPolicy::File { .. } => "file",
        }
    }
}

/// 10⁻³ followed by 19 evenly spaced points from 0.25 to 4.
pub fn default_p_grid() -> Vec<f64> {
    let mut grid = vec![1e-3];
    grid.extend((0..19).map(|i| 0.25 + 3.75 * i as f64 / 18.0));
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub cells: Vec<Cell>,
    pub sigma_x2: Vec<f64>,
    pub sigma_n2: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub init: InitPolicy,
    pub optimizer: OptimizerParams,
    /// Relative cut-off for the Kronecker sum; 0 keeps every term.
    pub truncation: f64,
    pub mc: McConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            cells: vec![Cell { num_nodes: 6, seq_len: 3 }, Cell { num_nodes: 16, seq_len: 6 }],
            sigma_x2: vec![1.0],
            sigma_n2: vec![1e-3, 0.1],
            p_grid: default_p_grid(),
            init: InitPolicy::ScaledEtf,
            optimizer: OptimizerParams::default(),
            truncation: 0.0,
            mc: McConfig::default(),
            output_dir: PathBuf::from("sweep_out"),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerFile {
    eps: Option<f64>,
    armijo_c: Option<f64>,
    max_iters: Option<usize>,
    initial_step: Option<f64>,
    backtrack_factor: Option<f64>,
    max_backtracks: Option<usize>,
    truncation: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct McFile {
    samples: Option<u64>,
    seed: Option<u64>,
    chunk_size: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    cells: Option<Vec<Cell>>,
    sigma_x2: Option<Vec<f64>>,
    sigma_n2: Option<Vec<f64>>,
    p_grid: Option<Vec<f64>>,
    init: Option<InitPolicy>,
    #[serde(default)]
    optimizer: OptimizerFile,
    #[serde(default)]
    mc: McFile,
    output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Parses a TOML description; missing fields keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).context("invalid experiment file")?;
        let mut spec = Self::default();
        if let Some(cells) = file.cells {
            spec.cells = cells;
        }
        if let Some(v) = file.sigma_x2 {
            spec.sigma_x2 = v;
        }
        if let Some(v) = file.sigma_n2 {
            spec.sigma_n2 = v;
        }
        if let Some(v) = file.p_grid {
            spec.p_grid = v;
        }
        if let Some(init) = file.init {
            spec.init = init;
        }
        let o = file.optimizer;
        let params = &mut spec.optimizer;
        params.rel_tol = o.eps.unwrap_or(params.rel_tol);
        params.armijo_c = o.armijo_c.unwrap_or(params.armijo_c);
        params.max_iters = o.max_iters.unwrap_or(params.max_iters);
        params.initial_step = o.initial_step.unwrap_or(params.initial_step);
        params.backtrack_factor = o.backtrack_factor.unwrap_or(params.backtrack_factor);
        params.max_backtracks = o.max_backtracks.unwrap_or(params.max_backtracks);
        spec.truncation = o.truncation.unwrap_or(spec.truncation);
        spec.mc.num_samples = file.mc.samples.unwrap_or(spec.mc.num_samples);
        spec.mc.seed = file.mc.seed.unwrap_or(spec.mc.seed);
        spec.mc.chunk_size = file.mc.chunk_size.unwrap_or(spec.mc.chunk_size);
        if let Some(dir) = file.output_dir {
            spec.output_dir = dir;
        }
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() || self.sigma_x2.is_empty() || self.sigma_n2.is_empty() || self.p_grid.is_empty() {
            bail!("experiment grid is empty");
        }
        if let Some(bad) = self.p_grid.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            bail!("p grid entry {bad} is not a positive number");
        }
        if let InitPolicy::Random { count: 0, .. } = self.init {
            bail!("random initialization needs at least one restart");
        }
        self.optimizer.validate()?;
        if !(0.0..1.0).contains(&self.truncation) {
            bail!("truncation {} outside [0, 1)", self.truncation);
        }
        if self.mc.num_samples < 2 || self.mc.chunk_size == 0 {
            bail!("Monte Carlo needs at least two samples and a positive chunk size");
        }
        Ok(())
    }
}
