//! Experiment orchestration: configs, the per-level pipeline, reports, and
//! acceptance checks.

pub mod config;
pub mod criteria;
pub mod outputs;
pub mod run;

pub use config::{ExperimentConfig, Mode};
pub use criteria::{check_acceptance, AcceptanceReport, Criteria};
pub use outputs::{emit_plot_data, write_outputs, PlotKind, RunManifest};
pub use run::{prepare, run_experiment, ExperimentResult, Prepared};

use std::path::Path;

use crate::error::{LabError, Result};

/// Environment fallback for the master seed.
pub const SEED_ENV: &str = "LINDEBERG_LAB_SEED";

/// Flag, then environment, then config, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        return v.trim().parse().map_err(|_| LabError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")));
    }
    Ok(cfg.seed.unwrap_or(0))
}

/// Loads, runs, and writes one experiment.
pub fn run_to_dir(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<(ExperimentResult, RunManifest)> {
    let inst = cfg.load_instance()?;
    let res = run_experiment(cfg, &inst, seed)?;
    let inst_text = std::fs::read_to_string(cfg.instance_path()).map_err(|e| LabError::io(cfg.instance_path().display().to_string(), e))?;
    let hash = outputs::config_hash(&cfg.source_text, &inst_text);
    let manifest = write_outputs(&res, out, &hash)?;
    Ok((res, manifest))
}
