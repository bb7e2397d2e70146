use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use srevol_cli::config::RunConfig;

/// Volatility-model simulation, filtering, constrained QLIK estimation, and
/// invertibility diagnostics for GARCH(1,1) and EGARCH(1,1).
#[derive(Parser)]
#[command(name = "srevol", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; unset values fall back to the config
/// file and then to documented defaults. The fully-resolved configuration is
/// echoed to `<out-dir>/config.json`.
#[derive(Args, Default)]
struct Common {
    /// Config file (TOML, or JSON as echoed into config.json)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model: garch11 | egarch11
    #[arg(long)]
    model: Option<String>,
    /// Parameters, comma-separated: alpha,beta,gamma[,delta]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Box bounds, comma-separated pairs `lo:hi` per coordinate
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    /// Innovation law: normal | t:NU (unit-variance Student-t)
    #[arg(long)]
    dist: Option<String>,
    /// Sample size
    #[arg(long)]
    n: Option<usize>,
    /// Replications (study)
    #[arg(long)]
    reps: Option<usize>,
    /// Root seed; replication r uses seed ^ (r + 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for config.json, outputs, and MANIFEST
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Truncation length of inner Monte Carlo series
    #[arg(long)]
    trunc: Option<usize>,
    /// Criterion burn: leading filter values excluded from QLIK
    #[arg(long)]
    burn: Option<usize>,
    /// Simulation burn-in (discarded warm-up steps)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Monte Carlo draws for diagnostics / B matrix
    #[arg(long)]
    m: Option<usize>,
    /// Multi-start count for the optimizer
    #[arg(long)]
    starts: Option<usize>,
    /// Input CSV with a column `x`
    #[arg(long)]
    input: Option<PathBuf>,
    /// Grid sizes per axis (region-scan) or point count (profile)
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Axis index for profile
    #[arg(long)]
    axis: Option<usize>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write `t,x,sigma2` CSV
    Simulate(Common),
    /// Fit by constrained QLIK; write fit.json, sigma2_hat.csv, forecast
    Fit(Common),
    /// Invertibility / stationarity / moment diagnostics at a parameter
    Diagnose(Common),
    /// Monte Carlo replication study with coverage summary
    Study(Common),
    /// Invertibility-region scan over a parameter grid
    RegionScan(Common),
    /// QLIK and constraint profile along one parameter axis
    Profile(Common),
}

fn parse_box(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for part in spec.split(',') {
        let (l, u) = part
            .split_once(':')
            .ok_or_else(|| anyhow::anyhow!("box coordinate `{part}` is not `lo:hi`"))?;
        lower.push(l.trim().parse::<f64>().map_err(|_| {
            anyhow::anyhow!("box bound `{l}` is not a number")
        })?);
        upper.push(u.trim().parse::<f64>().map_err(|_| {
            anyhow::anyhow!("box bound `{u}` is not a number")
        })?);
    }
    Ok((lower, upper))
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut over = RunConfig {
        model: common.model.clone(),
        theta: common.theta.clone(),
        dist: common.dist.clone(),
        n: common.n,
        reps: common.reps,
        seed: common.seed,
        out_dir: common.out_dir.clone(),
        trunc: common.trunc,
        burn: common.burn,
        burn_in: common.burn_in,
        m: common.m,
        starts: common.starts,
        input: common.input.clone(),
        grid: common.grid.clone(),
        axis: common.axis,
        workers: common.workers,
        ..Default::default()
    };
    if let Some(spec) = &common.box_spec {
        let (lower, upper) = parse_box(spec)?;
        over.lower = Some(lower);
        over.upper = Some(upper);
    }
    let cfg = match &common.config {
        Some(path) => RunConfig::load(path)?.merged(&over),
        None => over,
    };
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().ok();
    }
    Ok(cfg)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(c) => srevol_cli::cmd_simulate(&resolve(c)?),
        Command::Fit(c) => srevol_cli::cmd_fit(&resolve(c)?),
        Command::Diagnose(c) => srevol_cli::cmd_diagnose(&resolve(c)?),
        Command::Study(c) => srevol_cli::cmd_study(&resolve(c)?),
        Command::RegionScan(c) => srevol_cli::cmd_region_scan(&resolve(c)?),
        Command::Profile(c) => srevol_cli::cmd_profile(&resolve(c)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(srevol_cli::exit_code_for(&e))
        }
    }
}
