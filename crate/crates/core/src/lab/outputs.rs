//! Report files, the run manifest, and plot-data emission.
//!
//! Layout of an output directory:
//!
//! | file | contents |
//! |---|---|
//! | `schedule.csv` | l, T_l, k_l, δ_l, C_l, Q_l, S_l |
//! | `census_l{l}.csv` | the window members with their base points |
//! | `level_l{l}.json` | every statistic of one level |
//! | `cdf_l{l}.csv` | a, empirical, normal (s'' normalizer) |
//! | `statistics.json` | schedule report, cross-l trends, all levels |
//! | `series.csv` | l, quantity, value, stderr |
//! | `manifest.json` | config hash, seed, artifacts |
//! | `timings.json` | wall-clock per stage (not part of the determinism contract) |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::ExperimentResult;
use crate::census::census_csv;
use crate::error::{LabError, Result};
use crate::fmt17;
use crate::schedule::schedule_to_csv;
use crate::stats::Flagged;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesRow {
    pub l: usize,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

fn row(l: usize, q: impl Into<String>, v: f64, se: Option<f64>) -> SeriesRow {
    // + 0.0 folds −0 into 0 so the CSV never shows a signed zero.
    SeriesRow { l, quantity: q.into(), value: v + 0.0, stderr: se }
}

fn push_flag(rows: &mut Vec<SeriesRow>, l: usize, q: String, f: Flagged) {
    if let Some(v) = f.value() {
        rows.push(row(l, q, v, None));
    }
}

/// The cross-l series; quantities whose normalizer vanished are omitted.
pub fn trend_series(res: &ExperimentResult) -> Vec<SeriesRow> {
    let mut rows = Vec::new();
    for (lv, dv) in res.levels.iter().zip(&res.dyn_variance.values) {
        let l = lv.l;
        rows.push(row(l, "cycles", lv.census.cycles as f64, None));
        rows.push(row(l, "k", lv.entry.k as f64, None));
        rows.push(row(l, "dyn_variance", *dv, None));
        if let Some(s) = &lv.stats {
            let v = &s.variance;
            rows.push(row(l, "sigma_sq", v.sigma_l_sq, None));
            rows.push(row(l, "s_sq", v.s_l_sq.value, v.s_l_sq.stderr));
            rows.push(row(l, "s_prime_sq", v.s_prime_sq.value, v.s_prime_sq.stderr));
            rows.push(row(l, "s_doubleprime_sq", v.s_doubleprime_sq.value, v.s_doubleprime_sq.stderr));
            push_flag(&mut rows, l, "max_ratio_dev".into(), v.max_ratio_dev);
            if let Some(x) = v.ratio_prime.value() {
                rows.push(row(l, "ratio_prime_dev", x.abs(), None));
            }
            if let Some(x) = v.ratio_doubleprime.value() {
                rows.push(row(l, "ratio_doubleprime_dev", x.abs(), None));
            }
            for ks in &s.clt.ks {
                rows.push(row(l, format!("ks_{}", ks.normalizer), ks.ks, None));
            }
            if let (Some(ks), Some(c)) = (s.mu.ks, s.mu.fitted_c) {
                rows.push(row(l, "ks_mu", ks, None));
                rows.push(row(l, "fitted_c_mu", c, None));
            }
            for g in &s.mu.lindeberg {
                push_flag(&mut rows, l, format!("lindeberg_m_{}", g.gamma), g.ratio);
            }
            for g in &s.clt.lindeberg_nu {
                push_flag(&mut rows, l, format!("lindeberg_nu_{}", g.gamma), g.ratio);
            }
            rows.push(row(l, "delta_sup", s.deviation.delta_sup, None));
            rows.push(row(l, "delta_bound", s.deviation.delta_bound, None));
            if let Some(ab) = s.deviation.ab_mass {
                rows.push(row(l, "ab_mass", ab.value, ab.stderr));
            }
            rows.push(row(l, "max_residual", s.max_residual, None));
        }
        for d in &lv.deviations {
            rows.push(row(l, format!("deviation_{}", d.observable), d.deviation, d.stderr));
        }
        if !lv.deviations.is_empty() {
            let m = lv.deviations.iter().map(|d| d.deviation).fold(0.0, f64::max);
            rows.push(row(l, "deviation_max", m, None));
        }
        if let Some(v) = &lv.variation {
            if !v.no_data {
                rows.push(row(l, "variation_lower_bound", v.lower_bound, None));
            }
        }
        if !lv.tracking.is_empty() {
            let w = lv.tracking.iter().map(|t| t.worst).fold(0.0, f64::max);
            rows.push(row(l, "tracking_worst", w, None));
        }
    }
    rows
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = String::from("l,quantity,value,stderr\n");
    for r in rows {
        let se = r.stderr.map(fmt17).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.l, r.quantity, fmt17(r.value), se));
    }
    s
}

pub fn parse_series_csv(text: &str) -> Result<Vec<SeriesRow>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 4 {
                return Err(LabError::Parse(format!("series row needs 4 columns: {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| LabError::Parse(format!("bad number {s:?}")));
            Ok(SeriesRow {
                l: c[0].parse().map_err(|_| LabError::Parse(format!("bad l {:?}", c[0])))?,
                quantity: c[1].to_string(),
                value: num(c[2])?,
                stderr: if c[3].is_empty() { None } else { Some(num(c[3])?) },
            })
        })
        .collect()
}

pub fn cdf_csv(curve: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("a,empirical,normal\n");
    for (a, e, n) in curve {
        s.push_str(&format!("{},{},{}\n", fmt17(*a), fmt17(*e), fmt17(*n)));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelArtifacts {
    pub l: usize,
    pub files: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub mode: String,
    pub schedule_passed: bool,
    pub levels: Vec<LevelArtifacts>,
    pub files: Vec<String>,
}

pub fn config_hash(config_text: &str, instance_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update([0u8]);
    h.update(instance_text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> Result<String> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| LabError::io(p.display().to_string(), e))?;
    Ok(name.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

#[derive(Serialize)]
struct StatisticsReport<'a> {
    name: &'a str,
    schedule_report: &'a crate::schedule::ScheduleReport,
    precheck: &'a crate::schedule::PrecheckVerdict,
    dyn_variance: &'a crate::stats::trend::DynVariance,
    reference: &'a super::run::ReferenceSummary,
    holder: &'a [(String, crate::stats::audit::HolderAudit)],
    series: BTreeMap<String, Vec<(usize, f64)>>,
    levels: &'a [super::run::LevelOutcome],
}

/// Writes every artifact; the manifest itself is written last.
pub fn write_outputs(res: &ExperimentResult, dir: &Path, config_hash: &str) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir.display().to_string(), e))?;
    let mut files = vec![write(dir, "schedule.csv", &schedule_to_csv(&res.schedule))?];
    let mut levels = Vec::new();
    for (lv, w) in res.levels.iter().zip(&res.windows) {
        let mut lf = vec![write(dir, &format!("census_l{}.csv", lv.l), &census_csv(w, &w.cycles))?];
        lf.push(write(dir, &format!("level_l{}.json", lv.l), &json(lv))?);
        if let Some(s) = &lv.stats {
            if !s.cdf_curve.is_empty() {
                lf.push(write(dir, &format!("cdf_l{}.csv", lv.l), &cdf_csv(&s.cdf_curve))?);
            }
        }
        levels.push(LevelArtifacts { l: lv.l, files: lf, error: lv.error.clone() });
    }
    let rows = trend_series(res);
    let mut series: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in &rows {
        series.entry(r.quantity.clone()).or_default().push((r.l, r.value));
    }
    files.push(write(dir, "series.csv", &series_csv(&rows))?);
    let report = StatisticsReport {
        name: &res.name,
        schedule_report: &res.schedule_report,
        precheck: &res.precheck,
        dyn_variance: &res.dyn_variance,
        reference: &res.reference,
        holder: &res.holder,
        series,
        levels: &res.levels,
    };
    files.push(write(dir, "statistics.json", &json(&report))?);
    let timings: BTreeMap<&str, f64> = res.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    write(dir, "timings.json", &json(&timings))?;
    let manifest = RunManifest {
        name: res.name.clone(),
        config_hash: config_hash.to_string(),
        seed: res.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: format!("{:?}", res.mode).to_lowercase(),
        schedule_passed: res.schedule_report.passed,
        levels,
        files,
    };
    write(dir, "manifest.json", &json(&manifest))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest> {
    let p = dir.join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| LabError::io(p.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Parse(e.to_string()))
}

pub fn load_series(dir: &Path) -> Result<Vec<SeriesRow>> {
    let p = dir.join("series.csv");
    let text = fs::read_to_string(&p).map_err(|e| LabError::io(p.display().to_string(), e))?;
    parse_series_csv(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Ks,
    Ratios,
    Cdf,
    Lindeberg,
    Deviation,
}

fn require_levels(rows: &[SeriesRow], manifest: &RunManifest, prefix: &str) -> Result<()> {
    let missing: Vec<String> = manifest
        .levels
        .iter()
        .filter(|lv| !rows.iter().any(|r| r.l == lv.l && r.quantity.starts_with(prefix)))
        .map(|lv| lv.l.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(LabError::MissingSeries(format!("{prefix}* has no rows for l = {}", missing.join(", "))))
    }
}

/// Writes `plot_<which>.csv` into the run directory and returns its path.
pub fn emit_plot_data(dir: &Path, which: PlotKind) -> Result<PathBuf> {
    let manifest = load_manifest(dir)?;
    let rows = load_series(dir)?;
    let (name, text) = match which {
        PlotKind::Ks => {
            require_levels(&rows, &manifest, "ks_s")?;
            let mut s = String::from("l,normalizer,KS\n");
            for r in rows.iter().filter(|r| r.quantity.starts_with("ks_")) {
                s.push_str(&format!("{},{},{}\n", r.l, &r.quantity[3..], fmt17(r.value)));
            }
            ("plot_ks.csv", s)
        }
        PlotKind::Ratios => {
            require_levels(&rows, &manifest, "max_ratio_dev")?;
            let mut s = String::from("l,quantity,value\n");
            for r in rows.iter().filter(|r| r.quantity.ends_with("_dev")) {
                s.push_str(&format!("{},{},{}\n", r.l, r.quantity, fmt17(r.value)));
            }
            ("plot_ratios.csv", s)
        }
        PlotKind::Cdf => {
            let last = manifest.levels.last().ok_or_else(|| LabError::MissingSeries("run has no levels".into()))?;
            let file = format!("cdf_l{}.csv", last.l);
            if !last.files.contains(&file) {
                return Err(LabError::MissingSeries(format!("no CDF curve at final l = {}", last.l)));
            }
            let p = dir.join(&file);
            ("plot_cdf.csv", fs::read_to_string(&p).map_err(|e| LabError::io(p.display().to_string(), e))?)
        }
        PlotKind::Lindeberg => {
            require_levels(&rows, &manifest, "lindeberg_")?;
            let mut s = String::from("l,side,gamma,value\n");
            for r in rows.iter().filter(|r| r.quantity.starts_with("lindeberg_")) {
                let rest = &r.quantity["lindeberg_".len()..];
                let (side, gamma) = rest.split_once('_').unwrap_or((rest, ""));
                s.push_str(&format!("{},{},{},{}\n", r.l, side, gamma, fmt17(r.value)));
            }
            ("plot_lindeberg.csv", s)
        }
        PlotKind::Deviation => {
            require_levels(&rows, &manifest, "deviation_")?;
            let mut s = String::from("l,observable,deviation,stderr\n");
            for r in rows.iter().filter(|r| r.quantity.starts_with("deviation_") && r.quantity != "deviation_max") {
                let se = r.stderr.map(fmt17).unwrap_or_default();
                s.push_str(&format!("{},{},{},{}\n", r.l, &r.quantity["deviation_".len()..], fmt17(r.value), se));
            }
            ("plot_deviation.csv", s)
        }
    };
    let out = dir.join(name);
    fs::write(&out, text).map_err(|e| LabError::io(out.display().to_string(), e))?;
    Ok(out)
}
