use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use lpcomac_cli::{run_sweep, write_outputs, Cell, ExperimentSpec, InitPolicy};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    ScaledEtf,
    Random,
    File,
}

/// Sweeps p over the configured grid, optimizes the transmit sequences and
/// validates them by Monte Carlo.
#[derive(Debug, Parser)]
#[command(name = "lpcomac", version)]
struct Args {
    /// TOML experiment file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, alias = "output_dir")]
    output_dir: Option<PathBuf>,
    /// Node counts, paired positionally with --seq-len.
    #[arg(long = "K", value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, alias = "seq_len", value_delimiter = ',')]
    seq_len: Vec<usize>,
    #[arg(long, alias = "p_grid", value_delimiter = ',')]
    p_grid: Vec<f64>,
    #[arg(long, alias = "sigma_x2", value_delimiter = ',')]
    sigma_x2: Vec<f64>,
    #[arg(long, alias = "sigma_n2", value_delimiter = ',')]
    sigma_n2: Vec<f64>,
    #[arg(long, alias = "mc_samples")]
    mc_samples: Option<u64>,
    /// Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative-decrease stopping threshold.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, alias = "armijo_c")]
    armijo_c: Option<f64>,
    #[arg(long, alias = "max_iters")]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Directory holding `S_<seq_len>x<K>.txt` for `--init file`.
    #[arg(long, alias = "init_dir")]
    init_dir: Option<PathBuf>,
    /// Number of random starts for `--init random`.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, alias = "init_seed")]
    init_seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn build_spec(args: &Args) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::from_path(path)?,
        None => ExperimentSpec::default(),
    };
    match (args.k.is_empty(), args.seq_len.is_empty()) {
        (true, true) => {}
        (false, false) if args.k.len() == args.seq_len.len() => {
            spec.cells =
                args.k.iter().zip(&args.seq_len).map(|(&num_nodes, &seq_len)| Cell { num_nodes, seq_len }).collect();
        }
        _ => bail!("--K and --seq-len must be given together with the same number of values"),
    }
    if !args.p_grid.is_empty() {
        spec.p_grid = args.p_grid.clone();
    }
    if !args.sigma_x2.is_empty() {
        spec.sigma_x2 = args.sigma_x2.clone();
    }
    if !args.sigma_n2.is_empty() {
        spec.sigma_n2 = args.sigma_n2.clone();
    }
    if let Some(v) = args.mc_samples {
        spec.mc.num_samples = v;
    }
    if let Some(v) = args.seed {
        spec.mc.seed = v;
    }
    if let Some(v) = args.eps {
        spec.optimizer.rel_tol = v;
    }
    if let Some(v) = args.armijo_c {
        spec.optimizer.armijo_c = v;
    }
    if let Some(v) = args.max_iters {
        spec.optimizer.max_iters = v;
    }
    if let Some(dir) = &args.output_dir {
        spec.output_dir = dir.clone();
    }

    let (count, seed, scale, dir) = match &spec.init {
        InitPolicy::Random { count, seed, scale } => (*count, *seed, *scale, None),
        InitPolicy::File { dir } => (1, 0, 1.0, Some(dir.clone())),
        InitPolicy::ScaledEtf => (1, 0, 1.0, None),
    };
    let kind = args.init.unwrap_or(match spec.init {
        InitPolicy::ScaledEtf => InitArg::ScaledEtf,
        InitPolicy::Random { .. } => InitArg::Random,
        InitPolicy::File { .. } => InitArg::File,
    });
    spec.init = match kind {
        InitArg::ScaledEtf => InitPolicy::ScaledEtf,
        InitArg::Random => {
            InitPolicy::Random { count: args.restarts.unwrap_or(count), seed: args.init_seed.unwrap_or(seed), scale }
        }
        InitArg::File => {
            InitPolicy::File { dir: args.init_dir.clone().or(dir).context("--init file needs --init-dir")? }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn run(args: Args) -> Result<bool> {
    let spec = build_spec(&args)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    log::info!(
        "running {} grid points",
        spec.cells.len() * spec.sigma_x2.len() * spec.sigma_n2.len() * spec.p_grid.len()
    );
    let results = run_sweep(&spec)?;
    let artifacts = write_outputs(&spec.output_dir, &spec, &results)?;
    let failed = results.iter().filter(|r| r.record.is_skipped()).count();
    log::info!(
        "wrote {} ({} plot series, {} matrices)",
        artifacts.csv.display(),
        artifacts.plots.len(),
        artifacts.matrices.len()
    );
    if failed > 0 {
        log::error!("{failed} of {} grid points failed", results.len());
    }
    Ok(failed == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            log::error!("{err:#}");
            ExitCode::FAILURE
        }
    }
}
