//! Experiment configuration documents.

use crate::error::{invalid, Error, Result};
use crate::phasespace::GridSpec;
use crate::schemes::{SchemeConfig, StateSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// States and efficiency entering a propensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityConfig {
    #[serde(default)]
    pub signal: StateSpec,
    #[serde(default)]
    pub probe: StateSpec,
    #[serde(default = "one")]
    pub eta: f64,
}

/// Grid geometry; a missing half extent is chosen from the centroid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub half_extent: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_extent: None,
            points: default_points(),
        }
    }
}

/// Loss-model comparison inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossCheckConfig {
    /// Signals to test; empty runs the stock battery.
    #[serde(default)]
    pub signals: Vec<StateSpec>,
    #[serde(default = "default_loss_etas")]
    pub eta: Vec<f64>,
    /// Fock cutoff used for coherent and vacuum signals.
    #[serde(default = "default_loss_cutoff")]
    pub cutoff: usize,
}

impl Default for LossCheckConfig {
    fn default() -> Self {
        Self {
            signals: Vec::new(),
            eta: default_loss_etas(),
            cutoff: default_loss_cutoff(),
        }
    }
}

/// One experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    #[serde(default)]
    pub schemes: Option<[SchemeConfig; 2]>,
    #[serde(default)]
    pub propensity: Option<PropensityConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_significance")]
    pub significance: f64,
    /// Overrides the seeds of every scheme.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub loss_check: Option<LossCheckConfig>,
}

fn one() -> f64 {
    1.0
}
fn default_points() -> usize {
    256
}
fn default_significance() -> f64 {
    0.01
}
fn default_loss_etas() -> Vec<f64> {
    vec![0.3, 0.6, 0.9]
}
fn default_loss_cutoff() -> usize {
    16
}

/// A rejected configuration, with the JSON path of the offending field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, e: impl std::fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Field-level checks first, so the path names the field; then the
/// scheme's own validation for cross-field constraints.
fn check_scheme(prefix: &str, s: &SchemeConfig) -> std::result::Result<(), ConfigError> {
    let at = |field: &str| format!("{prefix}.{field}");
    if !(s.eta > 0.0 && s.eta <= 1.0) {
        return Err(ConfigError::new(at("eta"), format!("efficiency {} outside (0, 1]", s.eta)));
    }
    if !(s.lo_amplitude > 0.0 && s.lo_amplitude.is_finite()) {
        return Err(ConfigError::new(at("lo_amplitude"), "must be positive and finite"));
    }
    if s.sample_count == 0 {
        return Err(ConfigError::new(at("sample_count"), "must be positive"));
    }
    if s.scheme == crate::schemes::SchemeKind::Heterodyne
        && !(s.mixing() > 0.0 && s.mixing() < s.lo_amplitude)
    {
        return Err(ConfigError::new(at("heterodyne_mixing"), "must lie in (0, lo_amplitude)"));
    }
    s.validate().map_err(|e| ConfigError::new(prefix, e))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(".", e))?;
        Self::from_json(&text)
    }

    /// Checks every field before any compute.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if let Some(s) = &self.scheme {
            check_scheme("scheme", s)?;
        }
        if let Some(pair) = &self.schemes {
            for (i, s) in pair.iter().enumerate() {
                check_scheme(&format!("schemes[{i}]"), s)?;
            }
            let [a, b] = pair;
            if a.signal != b.signal {
                return Err(ConfigError::new("schemes[1].signal", "differs from schemes[0].signal"));
            }
            if a.idler != b.idler {
                return Err(ConfigError::new("schemes[1].idler", "differs from schemes[0].idler"));
            }
            if a.eta != b.eta {
                return Err(ConfigError::new(
                    "schemes[1].eta",
                    format!("efficiency {} differs from schemes[0].eta = {}", b.eta, a.eta),
                ));
            }
        }
        if let Some(p) = &self.propensity {
            if !(p.eta > 0.0 && p.eta <= 1.0) {
                return Err(ConfigError::new("propensity.eta", "must lie in (0, 1]"));
            }
        }
        if let Some(l) = self.grid.half_extent {
            GridSpec::new(l, self.grid.points).map_err(|e| ConfigError::new("grid", e))?;
        } else {
            GridSpec::new(1.0, self.grid.points).map_err(|e| ConfigError::new("grid.points", e))?;
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(ConfigError::new("significance", "must lie in (0, 1)"));
        }
        if let Some(l) = &self.loss_check {
            if l.eta.is_empty() {
                return Err(ConfigError::new("loss_check.eta", "needs at least one efficiency"));
            }
            for (i, &e) in l.eta.iter().enumerate() {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(ConfigError::new(format!("loss_check.eta[{i}]"), "must lie in (0, 1]"));
                }
            }
            if l.cutoff < 2 {
                return Err(ConfigError::new("loss_check.cutoff", "must be at least 2"));
            }
        }
        Ok(())
    }

    /// Single-scheme config with the seed override applied.
    pub fn single_scheme(&self) -> Result<SchemeConfig> {
        let mut s = self
            .scheme
            .clone()
            .ok_or_else(|| invalid("config needs a `scheme` section"))?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }

    /// Scheme pair with the seed override applied; the second scheme draws
    /// from `seed + 1` so the two sample sets are independent.
    pub fn scheme_pair(&self) -> Result<[SchemeConfig; 2]> {
        let mut pair = self
            .schemes
            .clone()
            .ok_or_else(|| invalid("config needs a `schemes` pair"))?;
        if let Some(seed) = self.seed {
            pair[0].seed = seed;
            pair[1].seed = seed.wrapping_add(1);
        }
        Ok(pair)
    }

    /// Propensity inputs, falling back to the scheme's signal, idler and η.
    pub fn propensity_inputs(&self) -> Result<PropensityConfig> {
        if let Some(p) = &self.propensity {
            return Ok(p.clone());
        }
        let s = self
            .scheme
            .as_ref()
            .or(self.schemes.as_ref().map(|p| &p[0]))
            .ok_or_else(|| invalid("config needs a `propensity` or `scheme` section"))?;
        Ok(PropensityConfig {
            signal: s.signal.clone(),
            probe: s.idler.clone(),
            eta: s.eta,
        })
    }
}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        Error::InvalidArgument(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_reports_path() {
        let e = ExperimentConfig::from_json(r#"{"scheme": {"scheme": "eight_port", "etta": 1}}"#)
            .unwrap_err();
        assert_eq!(e.path, "scheme.etta");
        let e = ExperimentConfig::from_json(r#"{"scheme": {"scheme": "eight_port", "eta": "x"}}"#)
            .unwrap_err();
        assert_eq!(e.path, "scheme.eta");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let e = ExperimentConfig::from_json(r#"{"scheme": {"scheme": "six_port", "eta": 1.5}}"#)
            .unwrap_err();
        assert_eq!(e.path, "scheme.eta");
        let e = ExperimentConfig::from_json(
            r#"{"scheme": {"scheme": "six_port", "signal": {"kind": "fock", "n": 1}}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "scheme");
        let e = ExperimentConfig::from_json(
            r#"{"schemes": [{"scheme": "eight_port"}, {"scheme": "six_port", "eta": 0.5}]}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "schemes[1].eta");
        let e = ExperimentConfig::from_json(r#"{"grid": {"points": 100}}"#).unwrap_err();
        assert_eq!(e.path, "grid.points");
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c.significance, 0.01);
        assert_eq!(c.grid.points, 256);
        assert!(c.single_scheme().is_err());
    }
}
