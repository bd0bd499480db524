//! Experiment configuration in TOML.
//!
//! ```toml
//! format_version = 1
//! seed = 7
//! output_dir = "out"
//!
//! [data]
//! agent_archive = "agents"      # directory with manifest.json
//! realized = "y.csv"
//! exogenous = "indicators.csv"  # optional
//!
//! [synthesis]
//! kind = "rt"
//! modifier_spec = "features"
//! n_trees = 1
//!
//! [synthesis.mcmc]
//! n_total = 2000
//! n_burn = 500
//! thin = 1
//! n_chains = 1
//!
//! [evaluation]
//! first_origin = "2010Q1"
//! last_origin = "2019Q4"
//! window = "rolling"
//! window_length = 80
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::period::{detect_frequency, parse_period};
use super::{hash_json, FORMAT_VERSION};
use crate::error::{BpsError, Result};
use crate::modifiers::ModifierSpec;
use crate::synthesis::{AgentDensityMode, EstimationWindow, SynthesisKind, SynthesisSpec};
use crate::types::McmcConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Origins fitted in parallel; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    pub data: DataPaths,
    pub synthesis: SynthesisConfig,
    pub evaluation: EvaluationConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub agent_archive: PathBuf,
    pub realized: PathBuf,
    #[serde(default)]
    pub exogenous: Option<PathBuf>,
}

/// Synthesis settings; unset fields keep the defaults of `kind` (or of the
/// threshold-example preset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub kind: SynthesisKind,
    /// `"toy"` starts from the threshold-example settings.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub modifier_spec: Option<ModifierSpec>,
    #[serde(default)]
    pub n_trees: Option<usize>,
    #[serde(default)]
    pub sv: Option<bool>,
    #[serde(default)]
    pub agent_density: Option<AgentDensityMode>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub fix_gamma_zero: Option<bool>,
    #[serde(default)]
    pub pinned_tau_gamma: Option<f64>,
    #[serde(default)]
    pub pinned_tau_beta: Option<f64>,
    #[serde(default)]
    pub mcmc: Option<McmcConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    Expanding,
    Rolling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// First and last forecast origins, as period labels.
    pub first_origin: String,
    pub last_origin: String,
    pub window: WindowMode,
    /// First estimation target in expanding mode; the archive's first target when absent.
    #[serde(default)]
    pub first_target: Option<String>,
    /// Estimation targets per origin in rolling mode.
    #[serde(default)]
    pub window_length: Option<usize>,
}

fn field_err(path: &serde_path_to_error::Path, e: impl std::fmt::Display) -> BpsError {
    let p = path.to_string();
    BpsError::config(if p == "." { String::new() } else { p }, e.to_string())
}

/// Deserializes TOML, reporting failures as config errors at the offending
/// field path.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let value: toml::Value = toml::from_str(text).map_err(|e| BpsError::config("", e.to_string()))?;
    serde_path_to_error::deserialize(value).map_err(|e| field_err(e.path(), e.inner()))
}

impl ExperimentConfig {
    /// Parses and validates; relative paths become relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BpsError::config("", e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.data.agent_archive);
        fix(&mut self.data.realized);
        if let Some(p) = self.data.exogenous.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(BpsError::config(
                "format_version",
                format!("{} is not supported (expected {FORMAT_VERSION})", self.format_version),
            ));
        }
        if self.workers == Some(0) {
            return Err(BpsError::config("workers", "must be at least 1"));
        }
        let spec = self.synthesis.to_spec().map_err(|e| prefix("synthesis", e))?;
        spec.validate().map_err(|e| prefix("synthesis", e))?;
        match (spec.kind, spec.modifier_spec) {
            (SynthesisKind::Rt, None) => {
                return Err(BpsError::config("synthesis.modifier_spec", "required for kind = \"rt\""))
            }
            (SynthesisKind::Rw, Some(_)) | (SynthesisKind::Const, Some(_)) => {
                return Err(BpsError::config("synthesis.modifier_spec", "only tree weights take modifiers"))
            }
            _ => {}
        }
        if spec.modifier_spec == Some(ModifierSpec::ExoInd) || spec.modifier_spec == Some(ModifierSpec::All) {
            if self.data.exogenous.is_none() {
                return Err(BpsError::config("data.exogenous", "required by the chosen modifier_spec"));
            }
        }
        let (first, last) = self.origins()?;
        if first > last {
            return Err(BpsError::config("evaluation.last_origin", "precedes first_origin"));
        }
        self.window(first)?;
        Ok(())
    }

    pub fn spec(&self) -> Result<SynthesisSpec> {
        self.synthesis.to_spec()
    }

    pub fn frequency(&self) -> &'static str {
        detect_frequency(&self.evaluation.first_origin)
    }

    pub fn origins(&self) -> Result<(i64, i64)> {
        let f = self.frequency();
        let e = &self.evaluation;
        let first = parse_period(&e.first_origin, f).map_err(|x| BpsError::config("evaluation.first_origin", x.to_string()))?;
        let last = parse_period(&e.last_origin, f).map_err(|x| BpsError::config("evaluation.last_origin", x.to_string()))?;
        Ok((first, last))
    }

    /// Estimation window; `default_first` is used in expanding mode when no
    /// first target is configured.
    pub fn window(&self, default_first: i64) -> Result<EstimationWindow> {
        let e = &self.evaluation;
        match e.window {
            WindowMode::Expanding => {
                if e.window_length.is_some() {
                    return Err(BpsError::config("evaluation.window_length", "only used in rolling mode"));
                }
                let first = match &e.first_target {
                    Some(s) => parse_period(s, self.frequency())
                        .map_err(|x| BpsError::config("evaluation.first_target", x.to_string()))?,
                    None => default_first,
                };
                Ok(EstimationWindow::Expanding { first })
            }
            WindowMode::Rolling => {
                if e.first_target.is_some() {
                    return Err(BpsError::config("evaluation.first_target", "only used in expanding mode"));
                }
                match e.window_length {
                    Some(length) if length >= 2 => Ok(EstimationWindow::Rolling { length }),
                    Some(_) => Err(BpsError::config("evaluation.window_length", "must be at least 2")),
                    None => Err(BpsError::config("evaluation.window_length", "required in rolling mode")),
                }
            }
        }
    }

    /// Hash of the settings that determine results, embedded in every
    /// output. Paths and the worker count are left out: inputs are covered
    /// by their own digest, and outputs must not depend on where or how
    /// widely a run executes.
    pub fn hash(&self) -> Result<String> {
        hash_json(&(self.format_version, self.seed, &self.synthesis, &self.evaluation))
    }
}

fn prefix(section: &str, e: BpsError) -> BpsError {
    match e {
        BpsError::Config { field, message } => BpsError::config(format!("{section}.{field}"), message),
        other => other,
    }
}

impl SynthesisConfig {
    pub fn to_spec(&self) -> Result<SynthesisSpec> {
        let mcmc = self.mcmc.unwrap_or_default();
        let mut spec = match self.preset.as_deref() {
            None => SynthesisSpec {
                mcmc,
                ..SynthesisSpec::new(self.kind)
            },
            Some("toy") if self.kind == SynthesisKind::Rt => SynthesisSpec::toy_rt(mcmc),
            Some("toy") => {
                return Err(BpsError::config("preset", "the toy preset needs kind = \"rt\""));
            }
            Some(other) => return Err(BpsError::config("preset", format!("unknown preset {other:?}"))),
        };
        if let Some(m) = self.modifier_spec {
            spec.modifier_spec = Some(m);
        }
        if let Some(n) = self.n_trees {
            spec.n_trees = n;
        }
        if let Some(v) = self.sv {
            spec.sv = v;
        }
        if let Some(d) = self.agent_density {
            spec.agent_density = d;
        }
        if let Some(k) = self.kappa {
            spec.kappa = k;
        }
        if let Some(f) = self.fix_gamma_zero {
            spec.fix_gamma_zero = f;
        }
        if self.pinned_tau_gamma.is_some() {
            spec.pinned_tau_gamma = self.pinned_tau_gamma;
        }
        if self.pinned_tau_beta.is_some() {
            spec.pinned_tau_beta = self.pinned_tau_beta;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
format_version = 1
seed = 7
output_dir = "out"

[data]
agent_archive = "agents"
realized = "y.csv"

[synthesis]
kind = "rt"
modifier_spec = "features"

[synthesis.mcmc]
n_total = 2000
n_burn = 500
thin = 1
n_chains = 1

[evaluation]
first_origin = "2010Q1"
last_origin = "2012Q4"
window = "rolling"
window_length = 80
"#;

    #[test]
    fn parses_and_builds_spec() {
        let c = ExperimentConfig::parse(GOOD).unwrap();
        let s = c.spec().unwrap();
        assert_eq!(s.kind, SynthesisKind::Rt);
        assert_eq!(s.modifier_spec, Some(ModifierSpec::Features));
        assert_eq!(s.mcmc.n_total, 2000);
        assert_eq!(c.origins().unwrap(), (2010 * 4, 2012 * 4 + 3));
        assert_eq!(c.window(0).unwrap(), EstimationWindow::Rolling { length: 80 });
        let again = ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_field_reports_path() {
        let bad = GOOD.replace("thin = 1", "thin = 1\nthinning = 2");
        match ExperimentConfig::parse(&bad) {
            Err(BpsError::Config { field, .. }) => assert_eq!(field, "synthesis.mcmc.thinning"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_reports_path() {
        let bad = GOOD.replace("n_burn = 500", "n_burn = \"many\"");
        match ExperimentConfig::parse(&bad) {
            Err(BpsError::Config { field, .. }) => assert_eq!(field, "synthesis.mcmc.n_burn"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_checks() {
        let no_mod = GOOD.replace("modifier_spec = \"features\"", "");
        assert!(matches!(
            ExperimentConfig::parse(&no_mod),
            Err(BpsError::Config { field, .. }) if field == "synthesis.modifier_spec"
        ));
        let burn = GOOD.replace("n_burn = 500", "n_burn = 2000");
        assert!(matches!(
            ExperimentConfig::parse(&burn),
            Err(BpsError::Config { field, .. }) if field == "synthesis.mcmc.n_burn"
        ));
        let exo = GOOD.replace("\"features\"", "\"exo_ind\"");
        assert!(matches!(
            ExperimentConfig::parse(&exo),
            Err(BpsError::Config { field, .. }) if field == "data.exogenous"
        ));
    }
}
