//! Experiment configuration (TOML). Paths are relative to the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::census::DEFAULT_CYCLE_BUDGET;
use crate::error::{LabError, Result};
use crate::instance::{Instance, ObservableSpec};
use crate::schedule::{Quantity, ScheduleTemplate};
use crate::stats::engine::EngineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mme,
    Equilibrium,
    Array,
}

/// One explicit schedule row; k may be omitted to use the auto rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRow {
    pub l: usize,
    pub t: f64,
    #[serde(default)]
    pub k: Option<u64>,
    pub delta: f64,
    pub c: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSource {
    Rows { rows: Vec<ScheduleRow> },
    File { file: PathBuf },
    Template(ScheduleTemplate),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusConfig {
    pub budget: f64,
    /// Separation scale for base points; defaults to 4ε.
    pub scale: Option<f64>,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_CYCLE_BUDGET, scale: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Pairs for the Hölder audit of every observable.
    pub holder_pairs: usize,
    pub variation_pairs: usize,
    pub variation_delta0: f64,
    /// Glued points per level checked for tracking.
    pub tracking_samples: usize,
    /// Block length of the Markov reference measure (at least the observable depths).
    pub reference_depth: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { holder_pairs: 10_000, variation_pairs: 200, variation_delta0: 0.1, tracking_samples: 2, reference_depth: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub instance: PathBuf,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub eta: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    pub schedule: ScheduleSource,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub census: CensusConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Per-l observables f_l for array mode.
    #[serde(default)]
    pub array_observables: Vec<ObservableSpec>,
    /// Keep going when the schedule fails validation.
    #[serde(default)]
    pub allow_invalid_schedule: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source_text: String,
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_m() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.source_text = text.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path.display().to_string(), e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn instance_path(&self) -> PathBuf {
        self.resolve(&self.instance)
    }

    pub fn load_instance(&self) -> Result<Instance> {
        Instance::load(&self.instance_path())
    }

    /// Checks that need the instance but no computation.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if !(self.eta > 0.0) || self.eta > inst.lambda.lambda_max {
            return Err(LabError::EtaTooLarge { eta: self.eta, lambda_max: inst.lambda.lambda_max });
        }
        if !(self.epsilon > 0.0) {
            return Err(LabError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        match self.mode {
            Mode::Equilibrium if inst.potential.is_none() => {
                return Err(LabError::Config("equilibrium mode needs a [potential] in the instance".into()))
            }
            Mode::Array if self.array_observables.is_empty() => {
                return Err(LabError::Config("array mode needs array_observables, one per level".into()))
            }
            Mode::Mme | Mode::Equilibrium if !self.array_observables.is_empty() => {
                return Err(LabError::Config("array_observables only apply in array mode".into()))
            }
            _ => {}
        }
        if let ScheduleSource::Template(t) = &self.schedule {
            for q in [&t.t, &t.delta, &t.c] {
                if let Quantity::Values(v) = q {
                    if v.len() < t.l_max {
                        return Err(LabError::Config(format!("schedule lists {} values but l_max = {}", v.len(), t.l_max)));
                    }
                }
            }
        }
        Ok(())
    }
}
