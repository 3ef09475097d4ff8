//! Run configuration: one JSON document, every section optional at parse
//! time and required by the subcommands that use it.

use std::path::{Path, PathBuf};

use pollinet::kinetic::DensityProfile;
use pollinet::network::CommunitySpec;
use pollinet::rates::{Kernels, RateParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<CommunitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Kernels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairSection>,
    #[serde(default)]
    pub scale: ScaleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub fluctuations: FluctuationSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Constants of the 1×1 system; each defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PairSection {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub h: f64,
}

impl Default for PairSection {
    fn default() -> Self {
        Self { c: 1.0, k: 1.0, h: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScaleSection {
    /// Carrying capacity of the individual-based model.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Trait-grid resolution `N` of the kinetic scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Schedule {
    pub t_end: f64,
    /// Explicit record times; overrides `recordEvery`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<f64>,
    #[serde(default = "one_usize")]
    pub replicas: usize,
    #[serde(default = "default_event_cap")]
    pub event_cap: u64,
}

fn one_usize() -> usize {
    1
}

fn default_event_cap() -> u64 {
    100_000_000
}

impl Schedule {
    pub fn new(t_end: f64) -> Self {
        Self { t_end, record_times: None, record_every: None, replicas: 1, event_cap: default_event_cap() }
    }

    /// Record times: explicit list, else a uniform grid (100 intervals by default).
    pub fn times(&self) -> Vec<f64> {
        if let Some(t) = &self.record_times {
            return t.clone();
        }
        let every = self.record_every.unwrap_or(self.t_end / 100.0);
        let count = (self.t_end / every).round().max(1.0) as usize;
        (0..=count).map(|i| self.t_end * i as f64 / count as f64).collect()
    }
}

/// Initial abundances. Per-species lists take precedence over profiles,
/// which are evaluated at the species traits; the default profile is 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plants: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pollinators: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_density: Option<DensityProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pollinator_density: Option<DensityProfile>,
    /// Kinetic runs without profiles draw `scale·U[0.5, 1.5]` per gridpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FluctuationSection {
    #[serde(default = "default_ou_paths")]
    pub ou_paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_ou_paths() -> usize {
    2000
}

fn default_dt() -> f64 {
    pollinet::fluctuations::DEFAULT_DT
}

impl Default for FluctuationSection {
    fn default() -> Self {
        Self { ou_paths: default_ou_paths(), dt: default_dt() }
    }
}

/// Ladders for the cross-scale studies.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(rename = "Ks", default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
}

/// Parse JSON text; `origin` prefixes diagnostics (usually the file name).
pub fn parse_config(text: &str, origin: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner();
        let (line, column) = (inner.line(), inner.column());
        let full = inner.to_string();
        let message = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m);
        let detail = match message.strip_prefix("missing field `").and_then(|m| m.strip_suffix('`')) {
            Some(field) if path == "." => format!("missing required field `{field}`"),
            Some(field) => format!("missing required field `{path}.{field}`"),
            None if path == "." => message.to_string(),
            None => format!("`{path}`: {message}"),
        };
        CliError::Config(format!("{origin}:{line}:{column}: {detail}"))
    })
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing required field `{section}`"))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn community(&self) -> CliResult<&CommunitySpec> {
        let c = self.community.as_ref().ok_or_else(|| missing("community"))?;
        c.validate()?;
        Ok(c)
    }

    pub fn rates(&self) -> CliResult<&RateParams> {
        let r = self.rates.as_ref().ok_or_else(|| missing("rates"))?;
        r.validate()?;
        Ok(r)
    }

    pub fn kernels(&self) -> CliResult<&Kernels> {
        let k = self.kernels.as_ref().ok_or_else(|| missing("kernels"))?;
        k.validate()?;
        Ok(k)
    }

    pub fn schedule(&self) -> CliResult<&Schedule> {
        let s = self.schedule.as_ref().ok_or_else(|| missing("schedule"))?;
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(invalid(format!("schedule.tEnd = {} must be positive", s.t_end)));
        }
        if let Some(e) = s.record_every {
            if !(e > 0.0 && e <= s.t_end) {
                return Err(invalid(format!("schedule.recordEvery = {e} must lie in (0, tEnd]")));
            }
        }
        if let Some(t) = &s.record_times {
            if t.is_empty() || !t.windows(2).all(|w| w[0] < w[1]) || t[0] < 0.0 || *t.last().unwrap() > s.t_end {
                return Err(invalid("schedule.recordTimes must be strictly increasing within [0, tEnd]"));
            }
        }
        if s.replicas == 0 {
            return Err(invalid("schedule.replicas must be at least 1"));
        }
        Ok(s)
    }

    pub fn carrying_capacity(&self) -> CliResult<u64> {
        match self.scale.k {
            Some(0) => Err(invalid("scale.K must be at least 1")),
            Some(k) => Ok(k),
            None => Err(missing("scale.K")),
        }
    }

    pub fn grid_n(&self) -> CliResult<usize> {
        match self.scale.grid_n {
            Some(0) => Err(invalid("scale.gridN must be at least 1")),
            Some(n) => Ok(n),
            None => Err(missing("scale.gridN")),
        }
    }

    /// Initial abundances at the given traits, checked for length and sign.
    pub fn initial_abundances(&self, x: &[f64], y: &[f64]) -> CliResult<(Vec<f64>, Vec<f64>)> {
        let pick = |list: &Option<Vec<f64>>, profile: &Option<DensityProfile>, traits: &[f64], name: &str| {
            let values = match (list, profile) {
                (Some(v), _) => {
                    if v.len() != traits.len() {
                        return Err(invalid(format!("initial.{name} has {} entries, expected {}", v.len(), traits.len())));
                    }
                    v.clone()
                }
                (None, Some(p)) => {
                    p.validate()?;
                    traits.iter().map(|&t| p.eval(t)).collect()
                }
                (None, None) => vec![1.0; traits.len()],
            };
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid(format!("initial.{name} must be finite and nonnegative")));
            }
            Ok(values)
        };
        Ok((
            pick(&self.initial.plants, &self.initial.plant_density, x, "plants")?,
            pick(&self.initial.pollinators, &self.initial.pollinator_density, y, "pollinators")?,
        ))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("pollinet-out"))
    }
}
