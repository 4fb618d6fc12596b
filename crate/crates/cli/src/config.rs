use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use pat_core::forward::{FullOptions, PlanOptions};
use pat_core::recon::ReconOptions;
use pat_core::PhantomSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

macro_rules! bail {
    ($($t:tt)*) => {
        return Err(CliError::Validation(format!($($t)*)))
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Phantom,
    Forward2d,
    Forward3d,
    ForwardFull,
    Recon2d,
    Recon3d,
    FixedPoint,
    Metrics,
    Plot,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Phantom => "phantom",
            Mode::Forward2d => "forward2d",
            Mode::Forward3d => "forward3d",
            Mode::ForwardFull => "forward-full",
            Mode::Recon2d => "recon2d",
            Mode::Recon3d => "recon3d",
            Mode::FixedPoint => "fixed-point",
            Mode::Metrics => "metrics",
            Mode::Plot => "plot",
        }
    }
}

/// Output locations, relative to `--out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub phantom: String,
    pub data: String,
    pub recon: String,
    pub fixed_point: String,
    pub plots: String,
    pub metrics: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            phantom: "phantom".into(),
            data: "data".into(),
            recon: "recon".into(),
            fixed_point: "fixed_point".into(),
            plots: "plots".into(),
            metrics: "metrics.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Illumination {
    pub nr: usize,
    pub ntheta: usize,
    /// Largest plane offset; defaults to the extent of `supp f`.
    pub r_max: Option<f64>,
    pub slab_width: f64,
}

impl Default for Illumination {
    fn default() -> Self {
        Self { nr: 32, ntheta: 32, r_max: None, slab_width: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FullConfig {
    pub illumination: Illumination,
    pub options: FullOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub margin_steps: f64,
    pub stride: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { max_iters: 20, tol: 1e-6, margin_steps: 5.0, stride: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub plan: PlanOptions,
    #[serde(default)]
    pub recon: ReconOptions,
    #[serde(default)]
    pub full: FullConfig,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub paths: Paths,
    /// Fields to render in plot mode, relative to `--out`; every field
    /// artifact found when empty.
    #[serde(default)]
    pub plot_inputs: Vec<String>,
    /// Standard deviation of additive Gaussian noise, relative to the
    /// largest forward sample.
    #[serde(default)]
    pub noise: f64,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Reads `path`, applies `key=value` overrides (dotted keys, JSON or
    /// bare-string values) and deserializes, rejecting unknown keys.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("parsing {}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.paths;
        let all = [&p.phantom, &p.data, &p.recon, &p.fixed_point, &p.plots, &p.metrics];
        if all.iter().any(|s| s.is_empty() || Path::new(s.as_str()).is_absolute()) {
            bail!("paths must be non-empty and relative to --out");
        }
        if all.iter().collect::<BTreeSet<_>>().len() != all.len() {
            bail!("paths must be distinct");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail!("noise must be a nonnegative number");
        }
        if self.threads > 1024 {
            bail!("threads must be at most 1024");
        }
        let fp = &self.fixed_point;
        if fp.max_iters == 0 || !(fp.tol >= 0.0) || fp.stride == 0 || !(fp.margin_steps >= 0.0) {
            bail!("fixed_point needs max_iters ≥ 1, stride ≥ 1 and nonnegative tol and margin_steps");
        }
        let il = &self.full.illumination;
        if il.nr < 2 || il.ntheta < 1 || !(il.slab_width > 0.0) || il.r_max.is_some_and(|r| !(r > 0.0)) {
            bail!("illumination needs nr ≥ 2, ntheta ≥ 1, positive slab_width and r_max");
        }
        if !(self.full.options.cost_cap > 0.0) {
            bail!("cost_cap must be positive");
        }
        Ok(())
    }

    /// Hash of everything that affects results; `threads` and `mode` are
    /// excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializable config");
        if let Value::Object(m) = &mut v {
            m.remove("threads");
            m.remove("mode");
        }
        pat_core::persist::content_hash(&v)
    }
}

fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override {spec:?} is not key=value");
    };
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} is malformed");
    }
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            bail!("override key {key:?} descends into a non-object");
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> Value {
        serde_json::json!({"phantom": serde_json::to_value(PhantomSpec::basic(2, 8, 8)).unwrap()})
    }

    #[test]
    fn nested_override_creates_keys() {
        let mut d = doc();
        apply_override(&mut d, "plan.dt=0.05").unwrap();
        apply_override(&mut d, "mode=recon2d").unwrap();
        let c: RunConfig = serde_json::from_value(d).unwrap();
        assert_eq!(c.plan.dt, Some(0.05));
        assert_eq!(c.mode, Some(Mode::Recon2d));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut d = doc();
        apply_override(&mut d, "plan.bogus=1").unwrap();
        assert!(serde_json::from_value::<RunConfig>(d).is_err());
        let mut d = doc();
        apply_override(&mut d, "extra=1").unwrap();
        assert!(serde_json::from_value::<RunConfig>(d).is_err());
    }

    #[test]
    fn duplicate_paths_fail_validation() {
        let mut d = doc();
        apply_override(&mut d, "paths.recon=data").unwrap();
        let c: RunConfig = serde_json::from_value(d).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_threads() {
        let c: RunConfig = serde_json::from_value(doc()).unwrap();
        let d = RunConfig { threads: 7, ..c.clone() };
        assert_eq!(c.hash(), d.hash());
        let e = RunConfig { seed: 1, ..c.clone() };
        assert_ne!(c.hash(), e.hash());
    }
}
