//! Threshold checks of a finished run against a criteria file.
//!
//! ```toml
//! [per_p_ratio]   # max_p |σ²(F_p)/(Q²σ²) − 1|
//! tail = 4
//! final_max = 0.2
//! [normalizers]   # |s'²/s² − 1| and |s''²/s² − 1|
//! tail = 4
//! final_max = 0.2
//! [clt]           # KS under s''; strictly decreasing over all l
//! final_max = 0.1
//! min_k = 100
//! [mu_clt]        # fitted C = KS·√k finite at every l
//! [mme]           # reference deviations of the test observables
//! final_max = 0.05
//! [lindeberg_m]
//! tail = 4
//! final_max = 0.1
//! gammas = [0.25, 0.5, 1.0, 2.0]
//! ```
//!
//! Every section is optional; `tail` trends are nonincreasing with relative
//! slack `rel_tol` (default 1e-9) plus absolute slack `abs_tol` (default
//! 1e-12) for series that vanish up to roundoff.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::outputs::{load_manifest, load_series, SeriesRow};
use crate::error::{LabError, Result};
use crate::stats::trend::{is_nonincreasing, is_strictly_decreasing, last_n};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailRule {
    #[serde(default)]
    pub tail: Option<usize>,
    pub final_max: f64,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltRule {
    pub final_max: f64,
    #[serde(default)]
    pub min_k: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuRule {}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmeRule {
    pub final_max: f64,
    /// Require strict decrease instead of nonincreasing.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindebergRule {
    #[serde(default)]
    pub tail: Option<usize>,
    pub final_max: f64,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criteria {
    pub per_p_ratio: Option<TailRule>,
    pub normalizers: Option<TailRule>,
    pub clt: Option<CltRule>,
    pub mu_clt: Option<MuRule>,
    pub mme: Option<MmeRule>,
    pub lindeberg_m: Option<LindebergRule>,
}

impl Criteria {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.per_p_ratio.is_none()
            && self.normalizers.is_none()
            && self.clt.is_none()
            && self.mu_clt.is_none()
            && self.mme.is_none()
            && self.lindeberg_m.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceReport {
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
}

fn series<'a>(rows: &'a [SeriesRow], q: &str) -> Vec<&'a SeriesRow> {
    rows.iter().filter(|r| r.quantity == q).collect()
}

fn values(rows: &[&SeriesRow]) -> Vec<f64> {
    rows.iter().map(|r| r.value).collect()
}

fn tail_check(name: &str, rows: &[SeriesRow], q: &str, rule: &TailRule, levels: usize) -> Verdict {
    let s = series(rows, q);
    if s.len() < levels || s.is_empty() {
        return Verdict {
            criterion: name.into(),
            passed: false,
            measured: None,
            threshold: Some(rule.final_max),
            detail: format!("series {q} has {} of {levels} levels", s.len()),
        };
    }
    let v = values(&s);
    let tail = last_n(&v, rule.tail.unwrap_or(v.len()));
    let mono = is_nonincreasing(tail, rule.rel_tol.unwrap_or(1e-9), rule.abs_tol.unwrap_or(1e-12));
    let last = *v.last().expect("nonempty");
    Verdict {
        criterion: name.into(),
        passed: mono && last < rule.final_max,
        measured: Some(last),
        threshold: Some(rule.final_max),
        detail: format!("{q}: tail {tail:?}, nonincreasing = {mono}"),
    }
}

/// Evaluates rules against the series of a finished run directory.
pub fn check_acceptance(dir: &Path, criteria: &Criteria) -> Result<AcceptanceReport> {
    let manifest = load_manifest(dir)?;
    let rows = load_series(dir)?;
    let n = manifest.levels.len();
    let mut verdicts = Vec::new();
    let mut warnings = Vec::new();
    if criteria.is_empty() {
        warnings.push("criteria file is empty; nothing to check".to_string());
    }
    if let Some(r) = &criteria.per_p_ratio {
        verdicts.push(tail_check("per_p_ratio", &rows, "max_ratio_dev", r, n));
    }
    if let Some(r) = &criteria.normalizers {
        verdicts.push(tail_check("normalizers.s_prime", &rows, "ratio_prime_dev", r, n));
        verdicts.push(tail_check("normalizers.s_doubleprime", &rows, "ratio_doubleprime_dev", r, n));
    }
    if let Some(r) = &criteria.clt {
        let v = values(&series(&rows, "ks_s_doubleprime"));
        let k = series(&rows, "k").last().map(|r| r.value as u64).unwrap_or(0);
        let dec = v.len() == n && is_strictly_decreasing(&v);
        let last = v.last().copied();
        let k_ok = r.min_k.is_none_or(|m| k >= m);
        verdicts.push(Verdict {
            criterion: "clt".into(),
            passed: dec && k_ok && last.is_some_and(|x| x < r.final_max),
            measured: last,
            threshold: Some(r.final_max),
            detail: format!("ks_s_doubleprime {v:?}, strictly decreasing = {dec}, final k = {k}"),
        });
    }
    if criteria.mu_clt.is_some() {
        let c = values(&series(&rows, "fitted_c_mu"));
        let ok = c.len() == n && c.iter().all(|x| x.is_finite());
        verdicts.push(Verdict {
            criterion: "mu_clt".into(),
            passed: ok,
            measured: c.iter().copied().reduce(f64::max),
            threshold: None,
            detail: format!("fitted C per l {c:?}"),
        });
    }
    if let Some(r) = &criteria.mme {
        let mut by_obs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in rows.iter().filter(|r| r.quantity.starts_with("deviation_") && r.quantity != "deviation_max") {
            by_obs.entry(&row.quantity["deviation_".len()..]).or_default().push(row.value);
        }
        if by_obs.is_empty() {
            verdicts.push(Verdict {
                criterion: "mme".into(),
                passed: false,
                measured: None,
                threshold: Some(r.final_max),
                detail: "no deviation series".into(),
            });
        }
        for (obs, v) in by_obs {
            let mono = if r.strict { is_strictly_decreasing(&v) } else { is_nonincreasing(&v, 1e-9, 1e-12) };
            let last = *v.last().expect("nonempty");
            verdicts.push(Verdict {
                criterion: format!("mme.{obs}"),
                passed: v.len() == n && mono && last < r.final_max,
                measured: Some(last),
                threshold: Some(r.final_max),
                detail: format!("{v:?}, decreasing = {mono}"),
            });
        }
    }
    if let Some(r) = &criteria.lindeberg_m {
        let gammas = r.gammas.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]);
        for g in gammas {
            let rule = TailRule { tail: r.tail, final_max: r.final_max, rel_tol: r.rel_tol, abs_tol: r.abs_tol };
            verdicts.push(tail_check(&format!("lindeberg_m.{g}"), &rows, &format!("lindeberg_m_{g}"), &rule, n));
        }
    }
    Ok(AcceptanceReport { passed: verdicts.iter().all(|v| v.passed), verdicts, warnings })
}
