//! Run configuration: config-file values merged with flag overrides, then
//! defaults, producing a fully-resolved record echoed to `config.json`.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use srevol::{InnovationDist, ModelKind, ParamBox, ParamVector};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Per-coordinate bounds `lower[i] <= theta[i] <= upper[i]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trunc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

macro_rules! take_over {
    ($base:ident, $over:ident, $($field:ident),*) => {
        $(if $over.$field.is_some() { $base.$field = $over.$field.clone(); })*
    };
}

impl RunConfig {
    /// Loads TOML (default) or JSON (by `.json` extension).
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    /// Field-wise merge; values in `over` win.
    pub fn merged(&self, over: &RunConfig) -> RunConfig {
        let mut base = self.clone();
        take_over!(
            base, over, command, model, theta, lower, upper, dist, n, burn_in, burn, reps, m,
            trunc, starts, seed, grid, axis, workers, input, out_dir
        );
        base
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.model.as_deref() {
            Some("garch11") => Ok(ModelKind::Garch11),
            Some("egarch11") => Ok(ModelKind::Egarch11),
            Some(other) => bail!("unknown model `{other}` (expected garch11 or egarch11)"),
            None => bail!("--model is required"),
        }
    }

    pub fn dist_kind(&self) -> Result<InnovationDist> {
        match self.dist.as_deref() {
            None | Some("normal") => Ok(InnovationDist::StdNormal),
            Some(s) => {
                if let Some(nu) = s.strip_prefix("t:") {
                    let nu: f64 = nu
                        .parse()
                        .map_err(|_| anyhow!("bad degrees of freedom in dist `{s}`"))?;
                    Ok(InnovationDist::std_student_t(nu)?)
                } else {
                    bail!("unknown dist `{s}` (expected `normal` or `t:NU`)")
                }
            }
        }
    }

    pub fn theta_vector(&self, model: ModelKind) -> Result<ParamVector> {
        let v = self.theta.as_ref().ok_or_else(|| anyhow!("--theta is required"))?;
        if v.len() != model.dim() {
            bail!("theta has {} coordinates, model {model:?} needs {}", v.len(), model.dim());
        }
        let theta = ParamVector::from_slice(model, v);
        theta.validate(model)?;
        Ok(theta)
    }

    pub fn param_box(&self, model: ModelKind) -> Result<ParamBox> {
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => {
                if l.len() != model.dim() || u.len() != model.dim() {
                    bail!("bounds need {} coordinates for {model:?}", model.dim());
                }
                Ok(ParamBox::new(l.clone(), u.clone())?)
            }
            (None, None) => Ok(ParamBox::default_for(model)),
            _ => bail!("--lower and --upper must be given together"),
        }
    }

    fn with_defaults(&self, command: &str) -> RunConfig {
        let mut cfg = self.clone();
        cfg.command = Some(command.to_string());
        cfg.seed = cfg.seed.or(Some(0));
        cfg
    }

    pub fn resolved_simulate(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("simulate");
        cfg.n = Some(cfg.n.ok_or_else(|| anyhow!("--n is required for simulate"))?);
        cfg.burn_in = cfg.burn_in.or(Some(srevol::DEFAULT_BURN_IN));
        cfg.dist = cfg.dist.or_else(|| Some("normal".into()));
        Ok(cfg)
    }

    pub fn resolved_fit(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("fit");
        cfg.burn = cfg.burn.or(Some(srevol::DEFAULT_BURN));
        cfg.starts = cfg.starts.or(Some(8));
        // echo the box actually used
        let model = cfg.model_kind()?;
        let bx = cfg.param_box(model)?;
        cfg.lower = Some(bx.lower.clone());
        cfg.upper = Some(bx.upper.clone());
        Ok(cfg)
    }

    pub fn resolved_diagnose(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("diagnose");
        cfg.m = cfg.m.or(Some(100_000));
        cfg.trunc = cfg.trunc.or(Some(200));
        cfg.dist = cfg.dist.or_else(|| Some("normal".into()));
        Ok(cfg)
    }

    pub fn resolved_region_scan(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("region-scan");
        cfg.m = cfg.m.or(Some(50_000));
        cfg.trunc = cfg.trunc.or(Some(200));
        cfg.dist = cfg.dist.or_else(|| Some("normal".into()));
        let model = cfg.model_kind()?;
        let bx = cfg.param_box(model)?;
        cfg.lower = Some(bx.lower.clone());
        cfg.upper = Some(bx.upper.clone());
        Ok(cfg)
    }

    pub fn resolved_profile(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("profile");
        cfg.burn = cfg.burn.or(Some(srevol::DEFAULT_BURN));
        let model = cfg.model_kind()?;
        let bx = cfg.param_box(model)?;
        cfg.lower = Some(bx.lower.clone());
        cfg.upper = Some(bx.upper.clone());
        Ok(cfg)
    }

    pub fn resolved_study(&self) -> Result<RunConfig> {
        let mut cfg = self.with_defaults("study");
        cfg.n = Some(cfg.n.ok_or_else(|| anyhow!("--n is required for study"))?);
        cfg.reps = Some(cfg.reps.ok_or_else(|| anyhow!("--reps is required for study"))?);
        cfg.burn_in = cfg.burn_in.or(Some(srevol::DEFAULT_BURN_IN));
        cfg.burn = cfg.burn.or(Some(srevol::DEFAULT_BURN));
        cfg.starts = cfg.starts.or(Some(8));
        cfg.m = cfg.m.or(Some(100_000));
        cfg.trunc = cfg.trunc.or(Some(400));
        cfg.dist = cfg.dist.or_else(|| Some("normal".into()));
        Ok(cfg)
    }
}
