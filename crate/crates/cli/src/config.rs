//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use nash_sir_core::{IntegratorConfig, ModelParams, Schedule, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub search: SearchConfig,
    /// Fixed distancing for `simulate`. Absent means no distancing.
    #[serde(default)]
    pub policy: Option<PolicyConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// Piecewise-constant distancing: `segments = [[t_start, d], ...]`, each
/// value holding until the next start (the last one until `T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub segments: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    /// Emit every `stride`-th sample (the last sample is always kept).
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json], stride: 1 }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "a0")]
    A0,
    #[serde(rename = "a1")]
    A1,
    #[serde(rename = "a2")]
    A2,
    #[serde(rename = "T")]
    VaccineTime,
    #[serde(rename = "delta_init")]
    DeltaInit,
    #[serde(rename = "sigma")]
    Sigma,
    #[serde(rename = "gamma")]
    Gamma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Beta => "beta",
            Self::Alpha => "alpha",
            Self::A0 => "a0",
            Self::A1 => "a1",
            Self::A2 => "a2",
            Self::VaccineTime => "T",
            Self::DeltaInit => "delta_init",
            Self::Sigma => "sigma",
            Self::Gamma => "gamma",
        }
    }

    pub fn apply(self, p: &ModelParams, value: f64) -> ModelParams {
        let mut q = *p;
        *match self {
            Self::Beta => &mut q.beta,
            Self::Alpha => &mut q.alpha,
            Self::A0 => &mut q.a0,
            Self::A1 => &mut q.a1,
            Self::A2 => &mut q.a2,
            Self::VaccineTime => &mut q.vaccine_time,
            Self::DeltaInit => &mut q.delta_init,
            Self::Sigma => &mut q.sigma,
            Self::Gamma => &mut q.gamma,
        } = value;
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl PolicyConfig {
    pub fn validate(&self, t_end: f64) -> Result<(), String> {
        let segs = &self.segments;
        let Some(first) = segs.first() else {
            return Err("policy has no segments".into());
        };
        if first.0 != 0.0 {
            return Err(format!("policy must start at t = 0, not {}", first.0));
        }
        for w in segs.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(format!("policy start times must increase ({} then {})", w[0].0, w[1].0));
            }
        }
        if let Some((t, _)) = segs.iter().find(|(t, _)| !(*t < t_end)) {
            return Err(format!("policy segment starts at {t}, not before T = {t_end}"));
        }
        if let Some((_, d)) = segs.iter().find(|(_, d)| !(0.0..=1.0).contains(d)) {
            return Err(format!("policy distancing {d} is outside [0, 1]"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::piecewise_constant(&self.segments).expect("validated policy")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| CliError::Config(m);
        self.model.validate().map_err(|e| bad(format!("[model] {e}")))?;
        self.integrator.validate().map_err(|e| bad(format!("[integrator] {e}")))?;
        self.search.validate().map_err(|e| bad(format!("[search] {e}")))?;
        if let Some(policy) = &self.policy {
            policy.validate(self.model.vaccine_time).map_err(|e| bad(format!("[policy] {e}")))?;
        }
        if self.output.stride == 0 {
            return Err(bad("[output] stride must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(bad("[sweep] values is empty".into()));
            }
            for v in &sweep.values {
                sweep
                    .param
                    .apply(&self.model, *v)
                    .validate()
                    .map_err(|e| bad(format!("[sweep] {} = {v}: {e}", sweep.param.name())))?;
            }
        }
        Ok(())
    }

    /// The `simulate` schedule: the configured policy, or no distancing.
    pub fn policy_schedule(&self) -> Schedule {
        self.policy.as_ref().map_or(Schedule::Constant(0.0), PolicyConfig::schedule)
    }
}
