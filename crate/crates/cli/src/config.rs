//! Experiment configuration: JSON file values overridden by flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use cookie_walk::coupling::MegaVertexConfig;
use cookie_walk::walk::{DistributionSpec, EnvironmentSpec};
use cookie_walk::{CookieEnvironment, JumpDistribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    /// Trajectory text record (`simulate` with one replica only).
    Record,
}

/// Everything a run needs. Unset fields take per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<EnvironmentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Per-command fallbacks for unset fields.
pub struct Defaults {
    pub replicas: usize,
    pub horizon: usize,
    pub format: Format,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Two-point family shorthand, e.g. `L=15,eps=0.01`
    #[arg(long, conflicts_with = "dist")]
    pub family: Option<String>,
    /// Jump law as inline JSON or a path to a JSON file
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub c: Option<u32>,
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cut-time guard window in steps
    #[arg(long)]
    pub guard: Option<usize>,
    /// Output format
    #[arg(long = "out", value_enum)]
    pub format: Option<Format>,
    /// Shorthand for `--out csv`
    #[arg(long, conflicts_with = "format")]
    pub emit_csv: bool,
    /// Output file (stdout if absent)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print the resolved config as JSON and exit
    #[arg(long)]
    pub dump_config: bool,
}

/// Parsed `--family`: the maximal jump and, unless sweeping, epsilon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyArg {
    pub max_jump: i64,
    pub epsilon: Option<f64>,
}

pub fn parse_family(text: &str) -> Result<FamilyArg> {
    let mut max_jump = None;
    let mut epsilon = None;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("--family: expected key=value, got {part:?}"))?;
        match key.trim() {
            "L" => max_jump = Some(value.trim().parse().with_context(|| format!("--family: bad L {value:?}"))?),
            "eps" | "epsilon" => {
                epsilon = Some(value.trim().parse().with_context(|| format!("--family: bad eps {value:?}"))?)
            }
            other => bail!("--family: unknown key {other:?} (expected L, eps)"),
        }
    }
    let max_jump = max_jump.ok_or_else(|| anyhow!("--family: L is required"))?;
    Ok(FamilyArg { max_jump, epsilon })
}

fn parse_dist(text: &str) -> Result<EnvironmentSpec> {
    let trimmed = text.trim_start();
    let json = if trimmed.starts_with('{') {
        text.to_owned()
    } else {
        std::fs::read_to_string(text).with_context(|| format!("--dist: cannot read {text}"))?
    };
    serde_json::from_str(&json).with_context(|| "--dist: not a valid distribution JSON")
}

pub fn read_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("config {}: invalid", path.display()))
}

impl CommonArgs {
    /// File values, then flags. `--family` without `eps` is returned
    /// separately for sweeps and leaves the distribution unset.
    pub fn merge(&self) -> Result<(ExperimentConfig, Option<FamilyArg>)> {
        let mut cfg = match &self.config {
            Some(p) => read_config_file(p)?,
            None => ExperimentConfig::default(),
        };
        let mut family = None;
        if let Some(f) = &self.family {
            let fam = parse_family(f)?;
            if let Some(eps) = fam.epsilon {
                cfg.distribution = Some(EnvironmentSpec::Single(DistributionSpec::Family {
                    max_jump: fam.max_jump,
                    epsilon: eps,
                }));
            }
            family = Some(fam);
        }
        if let Some(d) = &self.dist {
            cfg.distribution = Some(parse_dist(d)?);
        }
        cfg.c = self.c.or(cfg.c);
        cfg.ell = self.ell.or(cfg.ell);
        cfg.replicas = self.replicas.or(cfg.replicas);
        cfg.horizon = self.horizon.or(cfg.horizon);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.guard = self.guard.or(cfg.guard);
        cfg.output = self.output.clone().or(cfg.output);
        cfg.format = if self.emit_csv { Some(Format::Csv) } else { self.format.or(cfg.format) };
        Ok((cfg, family))
    }
}

/// A config with every field validated and filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub raw: ExperimentConfig,
    pub env: Arc<CookieEnvironment>,
    pub blocks: MegaVertexConfig,
    pub replicas: usize,
    pub horizon: usize,
    pub seed: u64,
    pub guard: Option<usize>,
    pub format: Format,
}

pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    pub fn resolve(mut self, d: &Defaults) -> Result<Resolved> {
        let spec = self.distribution.get_or_insert(EnvironmentSpec::Single(DistributionSpec::Family {
            max_jump: 15,
            epsilon: 0.01,
        }));
        let env = spec.build().map_err(|e| anyhow!("config field `distribution`: {e}"))?;
        let c = *self.c.get_or_insert(3);
        let ell = *self.ell.get_or_insert(13);
        let blocks = MegaVertexConfig::new(c, ell).map_err(|e| anyhow!("config fields `c`/`ell`: {e}"))?;
        let replicas = *self.replicas.get_or_insert(d.replicas);
        if replicas == 0 {
            bail!("config field `replicas`: must be at least 1");
        }
        let horizon = *self.horizon.get_or_insert(d.horizon);
        if horizon == 0 {
            bail!("config field `horizon`: must be at least 1");
        }
        let seed = *self.seed.get_or_insert(DEFAULT_SEED);
        if self.guard == Some(0) {
            bail!("config field `guard`: must be at least 1");
        }
        let format = *self.format.get_or_insert(d.format);
        Ok(Resolved {
            guard: self.guard,
            raw: self,
            env: Arc::new(env),
            blocks,
            replicas,
            horizon,
            seed,
            format,
        })
    }
}

impl Resolved {
    /// The single excited law, for commands defined for one cookie.
    pub fn single_law(&self) -> Result<&JumpDistribution> {
        match self.env.laws() {
            [q] => Ok(q),
            laws => bail!("config field `distribution`: expected one law, got {} cookies", laws.len()),
        }
    }

    /// Short hex digest of the resolved config, without the output location.
    pub fn digest(&self) -> String {
        let mut echo = self.raw.clone();
        echo.output = None;
        let bytes = serde_json::to_vec(&echo).expect("config serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        bail!("grid {text:?}: expected lo:hi:step");
    };
    let num = |s: &str| -> Result<f64> { s.trim().parse().with_context(|| format!("grid {text:?}: bad number {s:?}")) };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if step.is_nan() || step <= 0.0 || hi < lo || !lo.is_finite() || !hi.is_finite() {
        bail!("grid {text:?}: need lo <= hi and step > 0");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// `lo:hi` inclusive integer range.
pub fn parse_range(text: &str) -> Result<Vec<u32>> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("range {text:?}: expected lo:hi"))?;
    let lo: u32 = lo.trim().parse().with_context(|| format!("range {text:?}: bad lower end"))?;
    let hi: u32 = hi.trim().parse().with_context(|| format!("range {text:?}: bad upper end"))?;
    if hi < lo {
        bail!("range {text:?}: lower end above upper end");
    }
    Ok((lo..=hi).collect())
}
