//! Instance files: the system, roof, λ, observables, and an optional
//! potential, all in one TOML document.
//!
//! ```toml
//! alphabet = 2
//! transitions = ["11", "11"]
//!
//! [roof]
//! depth = 1
//! default = 1.0
//!
//! [lambda]
//! depth = 1
//! values = { "0" = 0.0, "1" = 1.0 }
//!
//! [observable]
//! name = "one"
//! depth = 1
//! default = [0.0]
//! coefficients = { "1" = [1.0] }
//! holder_l = 0.0
//! holder_alpha = 1.0
//! ```
//!
//! `[[tests]]` and `[potential]` use the observable layout. Words are digit
//! strings over the alphabet; coefficients are polynomial coefficients in
//! the normalized fiber height u, lowest degree first.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::regularity::RegularityFunction;
use crate::system::{parse_word, validate_system, CylinderTable, Observable, RoofFunction, SymbolicSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub depth: usize,
    #[serde(default)]
    pub default: Option<f64>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    pub depth: usize,
    #[serde(default)]
    pub default: Option<Vec<f64>>,
    #[serde(default)]
    pub coefficients: BTreeMap<String, Vec<f64>>,
    pub holder_l: f64,
    #[serde(default = "one")]
    pub holder_alpha: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub alphabet: usize,
    pub transitions: Vec<String>,
    pub roof: TableSpec,
    pub lambda: TableSpec,
    pub observable: ObservableSpec,
    #[serde(default)]
    pub tests: Vec<ObservableSpec>,
    #[serde(default)]
    pub potential: Option<ObservableSpec>,
}

/// A loaded, validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub system: SymbolicSystem,
    pub roof: RoofFunction,
    pub lambda: RegularityFunction,
    pub f: Observable,
    pub tests: Vec<Observable>,
    pub potential: Option<Observable>,
}

fn parse_transitions(rows: &[String], alphabet: usize) -> Result<Vec<Vec<bool>>> {
    rows.iter()
        .map(|r| {
            r.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(LabError::Parse(format!("transition rows use 0/1, got {c:?} in {r:?}"))),
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|m| if m.len() == alphabet { Ok(m) } else { Err(LabError::BadShape(alphabet)) })
}

pub fn build_table(name: &str, system: &SymbolicSystem, spec: &TableSpec) -> Result<CylinderTable> {
    let entries = spec
        .values
        .iter()
        .map(|(w, v)| Ok((parse_word(w, system.alphabet_size)?, *v)))
        .collect::<Result<Vec<_>>>()?;
    CylinderTable::build(name, system, spec.depth, &entries, spec.default)
}

pub fn build_observable(system: &SymbolicSystem, spec: &ObservableSpec) -> Result<Observable> {
    let entries = spec
        .coefficients
        .iter()
        .map(|(w, c)| Ok((parse_word(w, system.alphabet_size)?, c.clone())))
        .collect::<Result<Vec<_>>>()?;
    Observable::build(&spec.name, system, spec.depth, &entries, spec.default.clone(), spec.holder_l, spec.holder_alpha)
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance> {
        let system = validate_system(self.alphabet, parse_transitions(&self.transitions, self.alphabet)?)?;
        let roof = RoofFunction::new(build_table("roof", &system, &self.roof)?)?;
        let lambda = RegularityFunction::new(&system, build_table("lambda", &system, &self.lambda)?)?;
        let f = build_observable(&system, &self.observable)?;
        let tests = self.tests.iter().map(|t| build_observable(&system, t)).collect::<Result<Vec<_>>>()?;
        let potential = self.potential.as_ref().map(|p| build_observable(&system, p)).transpose()?;
        Ok(Instance { name: self.name.clone().unwrap_or_else(|| "instance".into()), system, roof, lambda, f, tests, potential })
    }
}

impl Instance {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: InstanceSpec = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        spec.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }
}
