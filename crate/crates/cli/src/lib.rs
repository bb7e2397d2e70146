//! Command implementations for the `srevol` binary.
//!
//! Every command resolves a [`RunConfig`] (config file merged with flag
//! overrides and defaults), runs, and writes into one output directory:
//! `config.json` (the fully-resolved configuration, reloadable via
//! `--config`), the command outputs, and a `MANIFEST` of content hashes.

pub mod config;
pub mod manifest;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path as FsPath;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use config::RunConfig;
use srevol::{
    asymptotic_variance, b_matrix_mc, check_mm_prime, default_g_init, empirical_lyapunov_for,
    forecast, garch_sandwich_mc, model_implied_lyapunov, profile, region_scan, run_filter,
    simulate, stationarity_lyapunov, write_profile_csv, write_region_csv, FitOptions, FitResult,
    InnovationDist, ModelKind, ParamBox, ParamVector, Path,
};

/// Marker for conditions that map to exit code 2 (infeasible fit or failed
/// diagnostic) rather than 1 (usage/IO).
#[derive(Debug)]
pub struct Infeasible(pub String);

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Infeasible {}

/// Exit code for a top-level error per the documented contract:
/// 2 infeasible/diagnostic failure, 1 usage/IO/numeric.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Infeasible>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<srevol::Error>() {
            if matches!(e, srevol::Error::NoFeasiblePoint | srevol::Error::NonStationary { .. }) {
                return 2;
            }
        }
    }
    1
}

fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<std::path::PathBuf> {
    let dir = cfg.out_dir.clone().ok_or_else(|| anyhow!("--out-dir is required"))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn finish(dir: &FsPath, cfg: &RunConfig) -> Result<()> {
    write_json(&dir.join("config.json"), cfg)?;
    manifest::write_manifest(dir)?;
    Ok(())
}

/// Reads the `x` column of a CSV file; malformed rows are rejected with
/// their 1-based line number.
pub fn read_series(path: &FsPath) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "x")
        .ok_or_else(|| anyhow!("{}: no column named `x`", path.display()))?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header line
        let record = record.with_context(|| format!("{}: line {line}", path.display()))?;
        let field = record
            .get(col)
            .ok_or_else(|| anyhow!("{}: line {line}: missing `x` field", path.display()))?;
        let v: f64 = field.trim().parse().map_err(|_| {
            anyhow!("{}: line {line}: `{field}` is not a number", path.display())
        })?;
        out.push(v);
    }
    if out.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(out)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_simulate()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let theta = cfg.theta_vector(model)?;
    let dist = cfg.dist_kind()?;
    let path = simulate(
        model,
        &theta,
        &dist,
        cfg.n.unwrap(),
        cfg.burn_in.unwrap(),
        cfg.seed.unwrap(),
    )?;
    let mut w = BufWriter::new(File::create(dir.join("path.csv"))?);
    path.write_csv(&mut w)?;
    w.flush()?;
    finish(&dir, &cfg)
}

#[derive(Debug, Serialize)]
struct FitOutput {
    fit: FitResult,
    seed: u64,
    forecast: srevol::Forecast,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_fit()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let dist_box = cfg.param_box(model)?;
    let input = cfg.input.clone().ok_or_else(|| anyhow!("--input is required for fit"))?;
    let x = read_series(&input)?;
    let opts = FitOptions {
        starts: cfg.starts.unwrap(),
        burn: cfg.burn.unwrap(),
        seed: cfg.seed.unwrap(),
        ..Default::default()
    };
    let fit = srevol::fit_x(model, &x, &dist_box, &opts)
        .map_err(|e| match e {
            srevol::Error::NoFeasiblePoint => {
                anyhow::Error::new(Infeasible("no feasible point found by fit".into()))
            }
            other => anyhow::Error::new(other),
        })?;
    let path = Path::from_observations(model, x);
    let traj = run_filter(model, &fit.theta_hat, &path, default_g_init(&fit.theta_hat))?;
    let mut w = BufWriter::new(File::create(dir.join("sigma2_hat.csv"))?);
    writeln!(w, "t,sigma2_hat")?;
    for (t, s) in traj.sigma2_hat().iter().enumerate() {
        writeln!(w, "{t},{s:.16e}")?;
    }
    w.flush()?;
    let fc = forecast(model, &fit.theta_hat, &path)?;
    write_json(&dir.join("fit.json"), &FitOutput { seed: opts.seed, fit, forecast: fc })?;
    finish(&dir, &cfg)
}

#[derive(Debug, Serialize)]
struct DiagnoseOutput {
    model_implied: Option<srevol::LyapunovReport>,
    empirical: Option<srevol::LyapunovReport>,
    stationarity: Option<(f64, f64)>,
    mm_prime: Option<MmPrime>,
}

#[derive(Debug, Serialize)]
struct MmPrime {
    ok: bool,
    margin: f64,
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_diagnose()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let theta = cfg.theta_vector(model)?;
    let dist = cfg.dist_kind()?;
    let seed = cfg.seed.unwrap();

    let empirical = match &cfg.input {
        Some(p) => {
            let x = read_series(p)?;
            Some(empirical_lyapunov_for(model, &theta, &x)?)
        }
        None => None,
    };
    let (model_implied, stationarity, mm_prime) = match model {
        ModelKind::Egarch11 => {
            let mi = model_implied_lyapunov(&theta, &dist, cfg.m.unwrap(), cfg.trunc.unwrap(), seed)?;
            let (ok, margin) = check_mm_prime(&theta, &dist)?;
            (Some(mi), None, Some(MmPrime { ok, margin }))
        }
        ModelKind::Garch11 => {
            let st = stationarity_lyapunov(&theta, &dist, cfg.m.unwrap(), seed);
            (None, Some(st), None)
        }
    };
    let report = DiagnoseOutput { model_implied, empirical, stationarity, mm_prime };
    write_json(&dir.join("diagnose.json"), &report)?;
    finish(&dir, &cfg)?;

    let bad = report.empirical.as_ref().map(|r| r.value >= 0.0).unwrap_or(false)
        || report.model_implied.as_ref().map(|r| r.value >= 0.0).unwrap_or(false)
        || report.stationarity.map(|(v, _)| v >= 0.0).unwrap_or(false);
    if bad {
        bail!(Infeasible("diagnostic failed: Lyapunov exponent is non-negative".into()));
    }
    Ok(())
}

pub fn cmd_region_scan(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_region_scan()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let bx = cfg.param_box(model)?;
    let grid = cfg.grid.clone().ok_or_else(|| anyhow!("--grid is required for region-scan"))?;
    let dist = cfg.dist_kind()?;
    let pts = region_scan(
        model,
        &bx,
        &grid,
        &dist,
        cfg.m.unwrap(),
        cfg.trunc.unwrap(),
        cfg.seed.unwrap(),
    )?;
    let mut w = BufWriter::new(File::create(dir.join("region.csv"))?);
    write_region_csv(&pts, &mut w)?;
    w.flush()?;
    finish(&dir, &cfg)
}

pub fn cmd_profile(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_profile()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let bx = cfg.param_box(model)?;
    let theta = cfg.theta_vector(model)?;
    let input = cfg.input.clone().ok_or_else(|| anyhow!("--input is required for profile"))?;
    let x = read_series(&input)?;
    let path = Path::from_observations(model, x);
    let grid = cfg.grid.clone().unwrap_or_default();
    let grid_points = *grid.first().ok_or_else(|| anyhow!("--grid is required for profile"))?;
    let pts = profile(
        model,
        &path,
        &bx,
        cfg.axis.ok_or_else(|| anyhow!("--axis is required for profile"))?,
        grid_points,
        &theta,
        cfg.burn.unwrap(),
    )?;
    let mut w = BufWriter::new(File::create(dir.join("profile.csv"))?);
    write_profile_csv(&pts, &mut w)?;
    w.flush()?;
    finish(&dir, &cfg)
}

/// Per-coordinate summary of a replication study.
#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub model: String,
    pub theta0: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub completed: usize,
    pub infeasible: usize,
    pub seed: u64,
    /// Theoretical standard errors sqrt(V_ii / n) used for the CIs.
    pub se: Vec<f64>,
    pub bias: Vec<f64>,
    pub rmse: Vec<f64>,
    /// Fraction of completed replications whose 95% CI covers theta0.
    pub coverage: Vec<f64>,
    pub skew: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    pub median_abs_error: Vec<f64>,
}

/// One replication record of a study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRep {
    pub rep: usize,
    pub theta: Option<ParamVector>,
    pub qlik: f64,
    pub converged: bool,
}

/// Runs `reps` independent simulate-fit replications at `theta0` and
/// summarizes bias, RMSE, and 95% CI coverage against the theoretical
/// asymptotic standard errors. Replication `r` draws from the seed `seed ^
/// (r + 1)`; infeasible replications are counted, not dropped.
pub fn run_study(
    model: ModelKind,
    theta0: &ParamVector,
    dist: &InnovationDist,
    n: usize,
    reps: usize,
    burn_in: usize,
    trunc: usize,
    m: usize,
    seed: u64,
    opts_template: &FitOptions,
) -> Result<(Vec<StudyRep>, StudySummary)> {
    let dim = model.dim();

    // pre-check: theta0 must pass its own diagnostics
    match model {
        ModelKind::Egarch11 => {
            let mi = model_implied_lyapunov(theta0, dist, m, trunc, seed ^ 0x4449_4147)?;
            if mi.value >= 0.0 {
                bail!(Infeasible(format!(
                    "theta0 fails invertibility: model-implied Lyapunov {:.4} >= 0",
                    mi.value
                )));
            }
        }
        ModelKind::Garch11 => {
            let (v, _) = stationarity_lyapunov(theta0, dist, m, seed ^ 0x4449_4147);
            if v >= 0.0 {
                bail!(Infeasible(format!("theta0 fails stationarity: E log(beta + gamma Z^2) = {v:.4}")));
            }
        }
    }

    let se = study_se(model, theta0, dist, n, trunc, m, seed)?;

    let bx = ParamBox::default_for(model);
    let records: Vec<StudyRep> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed ^ (r as u64 + 1);
            let run = || -> srevol::Result<FitResult> {
                let path = simulate(model, theta0, dist, n, burn_in, rep_seed)?;
                let opts = FitOptions { seed: rep_seed, ..opts_template.clone() };
                srevol::fit(model, &path, &bx, &opts)
            };
            match run() {
                Ok(fit) => StudyRep {
                    rep: r,
                    theta: Some(fit.theta_hat),
                    qlik: fit.qlik,
                    converged: fit.converged,
                },
                Err(_) => StudyRep { rep: r, theta: None, qlik: f64::NAN, converged: false },
            }
        })
        .collect();

    let t0 = theta0.as_array();
    let done: Vec<&ParamVector> = records.iter().filter_map(|r| r.theta.as_ref()).collect();
    let completed = done.len();
    if completed == 0 {
        bail!(Infeasible("every replication was infeasible".into()));
    }
    let mut bias = vec![0.0; dim];
    let mut rmse = vec![0.0; dim];
    let mut coverage = vec![0.0; dim];
    let mut skew = vec![0.0; dim];
    let mut kurt = vec![0.0; dim];
    let mut medae = vec![0.0; dim];
    for i in 0..dim {
        let errs: Vec<f64> = done.iter().map(|t| t.as_array()[i] - t0[i]).collect();
        let cf = completed as f64;
        let mean = errs.iter().sum::<f64>() / cf;
        bias[i] = mean;
        rmse[i] = (errs.iter().map(|e| e * e).sum::<f64>() / cf).sqrt();
        coverage[i] =
            errs.iter().filter(|e| e.abs() <= 1.96 * se[i]).count() as f64 / cf;
        // moments of the standardized estimates (theta_hat - theta0) / se
        let std_errs: Vec<f64> = errs.iter().map(|e| e / se[i]).collect();
        let sm = std_errs.iter().sum::<f64>() / cf;
        let var = std_errs.iter().map(|e| (e - sm) * (e - sm)).sum::<f64>() / cf;
        let sd = var.sqrt();
        skew[i] = std_errs.iter().map(|e| ((e - sm) / sd).powi(3)).sum::<f64>() / cf;
        kurt[i] = std_errs.iter().map(|e| ((e - sm) / sd).powi(4)).sum::<f64>() / cf - 3.0;
        let mut abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
        abs.sort_by(f64::total_cmp);
        medae[i] = if completed % 2 == 1 {
            abs[completed / 2]
        } else {
            (abs[completed / 2 - 1] + abs[completed / 2]) / 2.0
        };
    }

    let summary = StudySummary {
        model: format!("{model:?}").to_lowercase(),
        theta0: t0[..dim].to_vec(),
        n,
        reps,
        completed,
        infeasible: reps - completed,
        seed,
        se,
        bias,
        rmse,
        coverage,
        skew,
        excess_kurtosis: kurt,
        median_abs_error: medae,
    };
    Ok((records, summary))
}

/// Theoretical per-coordinate standard errors sqrt(V_ii / n) at `theta0`.
fn study_se(
    model: ModelKind,
    theta0: &ParamVector,
    dist: &InnovationDist,
    n: usize,
    trunc: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    match model {
        ModelKind::Egarch11 => {
            let mc = b_matrix_mc(theta0, dist, m, trunc, seed ^ 0x5345_3131)?;
            let rep = asymptotic_variance(&mc.b, dist.e_z4()?, n)?;
            Ok(rep.se.to_vec())
        }
        ModelKind::Garch11 => {
            let s = garch_sandwich_mc(theta0, dist, 200_000, n, seed ^ 0x5345_3131)?;
            Ok(s.se.to_vec())
        }
    }
}

pub fn cmd_study(cfg: &RunConfig) -> Result<()> {
    let cfg = cfg.resolved_study()?;
    let dir = out_dir(&cfg)?;
    let model = cfg.model_kind()?;
    let theta0 = cfg.theta_vector(model)?;
    let dist = cfg.dist_kind()?;
    let opts = FitOptions {
        starts: cfg.starts.unwrap(),
        burn: cfg.burn.unwrap(),
        ..Default::default()
    };
    let (records, summary) = run_study(
        model,
        &theta0,
        &dist,
        cfg.n.unwrap(),
        cfg.reps.unwrap(),
        cfg.burn_in.unwrap(),
        cfg.trunc.unwrap(),
        cfg.m.unwrap(),
        cfg.seed.unwrap(),
        &opts,
    )?;
    let mut w = BufWriter::new(File::create(dir.join("study.csv"))?);
    writeln!(w, "rep,alpha,beta,gamma,delta,qlik,converged")?;
    for r in &records {
        match &r.theta {
            Some(t) => writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.rep, t.alpha, t.beta, t.gamma, t.delta, r.qlik, r.converged
            )?,
            None => writeln!(w, "{},,,,,,infeasible", r.rep)?,
        }
    }
    w.flush()?;
    write_json(&dir.join("summary.json"), &summary)?;
    finish(&dir, &cfg)
}
