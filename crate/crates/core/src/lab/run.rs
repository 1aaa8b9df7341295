//! The per-level pipeline: census → E_l → gluing → ν_l → statistics.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, Mode, ScheduleSource};
use crate::census::{census_window, enumerate_cycles, CensusWindow, Cycle};
use crate::error::{LabError, Result};
use crate::gluing::{verify_tracking, Gluer, TrackingReport};
use crate::instance::{build_observable, Instance};
use crate::measures::{
    compare_to_reference, gibbs_weighted_measure, reference_measure, stream_rng, uniform_measure, DeviationRow, DiscreteMeasure,
    ReferenceMeasure,
};
use crate::schedule::{
    array_k_const, auto_k, lindeberg_precheck, schedule_from_csv, validate_schedule, ArrayData, PrecheckVerdict, ScheduleEntry,
    ScheduleReport, ValidationMode,
};
use crate::stats::audit::{holder_audit, variation_estimate, HolderAudit, VariationEstimate};
use crate::stats::engine::{level_stats, LevelInput, LevelStats};
use crate::stats::trend::{dyn_variance_series, DynVariance};
use crate::stats::weighted_variance;
use crate::system::Observable;
use crate::timeline::Timeline;

use rand::Rng;

#[derive(Debug, Clone, Serialize)]
pub struct CensusSummary {
    pub t: f64,
    pub delta: f64,
    pub cycles: usize,
    pub separated: bool,
    pub pairs_checked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelOutcome {
    pub l: usize,
    pub entry: ScheduleEntry,
    pub census: CensusSummary,
    pub stats: Option<LevelStats>,
    pub tracking: Vec<TrackingReport>,
    pub variation: Option<VariationEstimate>,
    pub deviations: Vec<DeviationRow>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSummary {
    pub kind: String,
    pub pressure: f64,
    pub flow_entropy: f64,
    pub block_len: usize,
}

/// Everything one run produces, in memory.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    pub schedule: Vec<ScheduleEntry>,
    pub schedule_report: ScheduleReport,
    pub precheck: PrecheckVerdict,
    pub dyn_variance: DynVariance,
    pub reference: ReferenceSummary,
    pub holder: Vec<(String, HolderAudit)>,
    pub levels: Vec<LevelOutcome>,
    #[serde(skip)]
    pub windows: Vec<CensusWindow>,
    #[serde(skip)]
    pub all_cycles: Vec<Arc<Vec<Cycle>>>,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// Seed for level l, independent of how levels are scheduled.
pub fn level_seed(master: u64, l: usize) -> u64 {
    stream_rng(master, 0x1e7e1, l as u64).gen()
}

struct RawLevel {
    l: usize,
    t: f64,
    k: Option<u64>,
    delta: f64,
    c: u64,
}

fn raw_levels(cfg: &ExperimentConfig) -> Result<Vec<RawLevel>> {
    Ok(match &cfg.schedule {
        ScheduleSource::Rows { rows } => {
            rows.iter().map(|r| RawLevel { l: r.l, t: r.t, k: r.k, delta: r.delta, c: r.c }).collect()
        }
        ScheduleSource::File { file } => {
            let path = cfg.resolve(file);
            let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(path.display().to_string(), e))?;
            schedule_from_csv(&text, (cfg.epsilon, cfg.eta, cfg.m))?
                .into_iter()
                .map(|e| RawLevel { l: e.l, t: e.t, k: Some(e.k), delta: e.delta, c: e.c })
                .collect()
        }
        ScheduleSource::Template(t) => {
            t.tuples()?.into_iter().map(|r| RawLevel { l: r.l, t: r.t, k: r.k, delta: r.delta, c: r.c }).collect()
        }
    })
}

/// Census window at (T, δ) over freshly enumerated cycles.
pub fn level_window(inst: &Instance, t: f64, delta: f64, eta: f64, scale: f64, budget: f64) -> Result<(CensusWindow, Vec<Cycle>)> {
    let lo = ((t - delta) / inst.roof.r_max).floor().max(1.0) as usize;
    let hi = (t / inst.roof.r_min).floor() as usize;
    let cycles = enumerate_cycles(&inst.system, &inst.roof, &inst.lambda, lo, hi.max(lo), budget)?;
    let window = census_window(&cycles, &inst.roof, &inst.lambda, t, delta, eta, scale)?;
    Ok((window, cycles))
}

pub fn base_measure(inst: &Instance, mode: Mode, window: &CensusWindow) -> Result<DiscreteMeasure> {
    match (mode, &inst.potential) {
        (Mode::Equilibrium, Some(phi)) => gibbs_weighted_measure(window, &inst.roof, phi, window.t),
        _ => uniform_measure(window),
    }
}

/// σ_l² = Var_{m_l} F(·, T_l).
pub fn sigma_sq(inst: &Instance, f: &Observable, window: &CensusWindow, base: &DiscreteMeasure) -> f64 {
    let vals: Vec<f64> =
        window.cycles.iter().map(|c| Timeline::for_cycle(c.base_word(), &inst.roof, f).cumulative(window.t)).collect();
    weighted_variance(&vals, &base.weights)
}

fn reference_for(inst: &Instance, cfg: &ExperimentConfig) -> Result<ReferenceMeasure> {
    let depth = inst
        .tests
        .iter()
        .map(|g| g.depth)
        .chain([inst.f.depth, cfg.diagnostics.reference_depth])
        .chain(inst.potential.iter().map(|p| p.depth + 1))
        .max()
        .unwrap_or(2);
    let phi = if cfg.mode == Mode::Equilibrium { inst.potential.as_ref() } else { None };
    reference_measure(&inst.system, &inst.roof, phi, depth)
}

fn per_level_observables(inst: &Instance, cfg: &ExperimentConfig, n: usize) -> Result<Vec<Observable>> {
    if cfg.mode != Mode::Array {
        return Ok(vec![inst.f.clone(); n]);
    }
    if cfg.array_observables.len() < n {
        return Err(LabError::Config(format!("array mode needs {n} observables, got {}", cfg.array_observables.len())));
    }
    cfg.array_observables[..n].iter().map(|s| build_observable(&inst.system, s)).collect()
}

fn timed<T>(timings: &mut Vec<(String, f64)>, label: String, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push((label, start.elapsed().as_secs_f64()));
    out
}

/// Census, measures, and k_l for every level, plus the schedule verdict.
pub struct Prepared {
    pub observables: Vec<Observable>,
    pub windows: Vec<CensusWindow>,
    pub bases: Vec<DiscreteMeasure>,
    pub entries: Vec<ScheduleEntry>,
    pub sigmas: Vec<f64>,
    pub all_cycles: Vec<Arc<Vec<Cycle>>>,
    pub array: Vec<ArrayData>,
    pub report: ScheduleReport,
    pub timings: Vec<(String, f64)>,
}

/// Everything before the per-level statistics. Auto k needs σ_l², and
/// validation needs every row, so the census runs for all levels first.
pub fn prepare(cfg: &ExperimentConfig, inst: &Instance) -> Result<Prepared> {
    cfg.validate(inst)?;
    let mut timings = Vec::new();
    let raws = raw_levels(cfg)?;
    if raws.is_empty() {
        return Err(LabError::Config("schedule is empty".into()));
    }
    let scale = cfg.census.scale.unwrap_or(4.0 * cfg.epsilon);
    let fs = per_level_observables(inst, cfg, raws.len())?;

    let mut windows = Vec::with_capacity(raws.len());
    let mut bases = Vec::with_capacity(raws.len());
    let mut entries = Vec::with_capacity(raws.len());
    let mut sigmas = Vec::with_capacity(raws.len());
    let mut all_cycles = Vec::with_capacity(raws.len());
    for (r, f) in raws.iter().zip(&fs) {
        let (window, _) = timed(&mut timings, format!("census_l{}", r.l), || {
            level_window(inst, r.t, r.delta, cfg.eta, scale, cfg.census.budget)
        })?;
        let base = base_measure(inst, cfg.mode, &window)?;
        let s2 = sigma_sq(inst, f, &window, &base);
        let k = match r.k {
            Some(k) => k,
            None => auto_k(s2, r.delta)?,
        };
        entries.push(ScheduleEntry::new(r.l, r.t, k, r.delta, r.c, cfg.m, cfg.epsilon, cfg.eta)?);
        sigmas.push(s2);
        all_cycles.push(Arc::new(window.cycles.clone()));
        windows.push(window);
        bases.push(base);
    }
    let array: Vec<ArrayData> = fs
        .iter()
        .map(|f| ArrayData {
            sup_norm: f.sup_norm(),
            k_const: array_k_const(f.holder_l, f.holder_alpha, cfg.engine.kappa_eps.unwrap_or(cfg.epsilon), cfg.eta),
        })
        .collect();
    let vmode = if cfg.mode == Mode::Array { ValidationMode::Array(array.clone()) } else { ValidationMode::Plain };
    let report = if entries.len() < 2 {
        ScheduleReport {
            mode: "single".into(),
            passed: true,
            checks: Vec::new(),
            caveat: "one level: there is no trend to check".into(),
        }
    } else {
        validate_schedule(&entries, &vmode)?
    };
    Ok(Prepared { observables: fs, windows, bases, entries, sigmas, all_cycles, array, report, timings })
}

/// Runs every level, recording per-level failures without stopping.
pub fn run_experiment(cfg: &ExperimentConfig, inst: &Instance, seed: u64) -> Result<ExperimentResult> {
    let Prepared { observables: fs, windows, bases, entries, sigmas, all_cycles, array, report: schedule_report, mut timings } =
        prepare(cfg, inst)?;
    if !schedule_report.passed && !cfg.allow_invalid_schedule {
        return Err(LabError::ScheduleRejected(schedule_report.violated_items().join(", ")));
    }
    let ts: Vec<f64> = entries.iter().map(|e| e.t).collect();
    let ks: Vec<f64> = entries.iter().map(|e| e.k as f64).collect();
    let sds: Vec<f64> = sigmas.iter().map(|s| s.sqrt()).collect();
    let precheck = lindeberg_precheck(&sds, &ts, &ks)?;
    let dyn_variance = dyn_variance_series(&sigmas, &ts);

    let reference = reference_for(inst, cfg)?;
    let holder = std::iter::once(&inst.f)
        .chain(&inst.tests)
        .map(|g| (g.name.clone(), holder_audit(&inst.system, &inst.roof, g, cfg.diagnostics.holder_pairs, 12, seed ^ 0x401d)))
        .collect();

    let mut levels = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let lseed = level_seed(seed, entry.l);
        let out = timed(&mut timings, format!("level_l{}", entry.l), || {
            run_level(cfg, inst, &fs[i], array[i].k_const, entry, &windows[i], &bases[i], all_cycles[i].clone(), &reference, lseed)
        });
        levels.push(out);
    }

    Ok(ExperimentResult {
        name: cfg.name.clone(),
        mode: cfg.mode,
        seed,
        schedule: entries,
        schedule_report,
        precheck,
        dyn_variance,
        reference: ReferenceSummary {
            kind: format!("{:?}", reference.kind),
            pressure: reference.pressure,
            flow_entropy: reference.flow_entropy,
            block_len: reference.block_len,
        },
        holder,
        levels,
        windows,
        all_cycles,
        timings,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_level(
    cfg: &ExperimentConfig,
    inst: &Instance,
    f: &Observable,
    k_const: f64,
    entry: &ScheduleEntry,
    window: &CensusWindow,
    base: &DiscreteMeasure,
    cycles: Arc<Vec<Cycle>>,
    reference: &ReferenceMeasure,
    seed: u64,
) -> LevelOutcome {
    let census = CensusSummary {
        t: window.t,
        delta: window.delta,
        cycles: window.len(),
        separated: window.separation.separated,
        pairs_checked: window.separation.pairs_checked,
    };
    let mut out = LevelOutcome {
        l: entry.l,
        entry: entry.clone(),
        census,
        stats: None,
        tracking: Vec::new(),
        variation: None,
        deviations: Vec::new(),
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut engine = cfg.engine.clone();
        engine.seed = seed;
        let input = LevelInput {
            system: &inst.system,
            roof: &inst.roof,
            f,
            tests: &inst.tests,
            cycles: cycles.clone(),
            base,
            entry,
            k_const,
        };
        let stats = level_stats(&input, &engine)?;
        let nu: Vec<_> = stats.test_integrals.iter().map(|t| t.estimate).collect();
        out.deviations = compare_to_reference(&nu, reference, &inst.roof, &inst.tests)?;
        out.stats = Some(stats);
        let gluer = Gluer::new(&inst.system, &inst.roof, entry.t, entry.c as usize, entry.m)?;
        for j in 0..cfg.diagnostics.tracking_samples {
            let mut rng = stream_rng(seed, 0x7ac, j as u64);
            let idx: Vec<usize> = (0..entry.k).map(|_| rng.gen_range(0..cycles.len())).collect();
            let cs: Vec<&Cycle> = idx.iter().map(|&i| &cycles[i]).collect();
            let g = gluer.glue(&cs, &idx)?;
            out.tracking.push(verify_tracking(&g, &inst.roof, entry.epsilon));
        }
        out.variation = Some(variation_estimate(
            &inst.system,
            &inst.roof,
            &inst.lambda,
            f,
            entry.eta,
            entry.t,
            cfg.diagnostics.variation_delta0,
            cfg.diagnostics.variation_pairs,
            seed ^ 0x5a,
        ));
        Ok(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out
}
