//! Per-level statistics: the m_l side over single cycles and the ν_l side
//! over glued atoms, with three interchangeable ν_l backends.
//!
//! * `Enumerate` / `Sample`: fold over glued atoms, exact or seeded.
//! * `Factorized`: when every bridge lands exactly on schedule and each
//!   F_p^l window stays inside the steady part of its own loop block, F_p^l
//!   depends only on x_p and F(·, S_l) splits into 2-local block sums, so
//!   every variance is a finite sum over E_l or E_l².

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lindeberg_ratio_m, weighted_variance, Distribution, Flagged, KsRecord};
use crate::census::Cycle;
use crate::error::{LabError, Result};
use crate::gluing::Gluer;
use crate::measures::{DiscreteMeasure, Estimate, OrbitSegmentMeasure, ProductSampler, SamplerMode};
use crate::piecewise::PiecewisePoly;
use crate::poly;
use crate::schedule::ScheduleEntry;
use crate::system::{Observable, RoofFunction, SymbolicSystem};
use crate::timeline::{sum_functionals, weighted_sum, Timeline, TimelineBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Auto,
    Factorized,
    Enumerate,
    Sample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub backend: Backend,
    /// Largest (#E)^k enumerated exactly.
    pub exact_cap: f64,
    /// Tuples drawn whenever sampling is needed.
    pub samples: usize,
    pub seed: u64,
    pub gammas: Vec<f64>,
    /// The a in ν_l{|A_l − B_l| > a}.
    pub ab_threshold: f64,
    /// Support cap for exact convolutions.
    pub conv_cap: usize,
    pub curve_points: usize,
    /// κε' in the Δ_p bound; unset means ε.
    pub kappa_eps: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            exact_cap: crate::measures::DEFAULT_EXACT_CAP,
            samples: 10_000,
            seed: 0,
            gammas: vec![0.25, 0.5, 1.0, 2.0],
            ab_threshold: 0.5,
            conv_cap: 200_000,
            curve_points: 400,
            kappa_eps: None,
        }
    }
}

pub struct LevelInput<'a> {
    pub system: &'a SymbolicSystem,
    pub roof: &'a RoofFunction,
    pub f: &'a Observable,
    pub tests: &'a [Observable],
    pub cycles: Arc<Vec<Cycle>>,
    pub base: &'a DiscreteMeasure,
    pub entry: &'a ScheduleEntry,
    /// K in the Δ_p bound (K_l in array mode).
    pub k_const: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct GammaValue {
    pub gamma: f64,
    pub ratio: Flagged,
}

#[derive(Debug, Clone, Serialize)]
pub struct MuSide {
    pub sigma_sq: f64,
    pub mean: f64,
    pub lindeberg: Vec<GammaValue>,
    /// KS of the normalized k-fold sum (None when σ_l = 0).
    pub ks: Option<f64>,
    pub method: String,
    /// ks·√k.
    pub fitted_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceBundle {
    pub sigma_l_sq: f64,
    pub s_l_sq: Estimate,
    pub s_prime_sq: Estimate,
    pub s_doubleprime_sq: Estimate,
    /// σ²_ν(F_p)/(Q²σ_l²) for each p.
    pub per_p_ratio: Vec<f64>,
    pub max_ratio_dev: Flagged,
    pub ratio_prime: Flagged,
    pub ratio_doubleprime: Flagged,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationSummary {
    pub k_const: f64,
    pub delta_sup: f64,
    /// 2(2KT + κε'‖f‖ + 2δQ‖f‖).
    pub delta_bound: f64,
    pub bound_ok: bool,
    pub ab_threshold: f64,
    pub ab_mass: Option<Estimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub mean_s: f64,
    pub ks: Vec<KsRecord>,
    pub lindeberg_nu: Vec<GammaValue>,
    pub method: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedEstimate {
    pub name: String,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStats {
    pub l: usize,
    pub t: f64,
    pub k: u64,
    pub c: u64,
    pub q: i64,
    pub delta: f64,
    pub s: f64,
    pub cycles: usize,
    pub backend: Backend,
    pub atoms: usize,
    pub max_residual: f64,
    pub mu: MuSide,
    pub variance: VarianceBundle,
    pub clt: CltReport,
    pub deviation: DeviationSummary,
    pub main_integral: Estimate,
    pub test_integrals: Vec<NamedEstimate>,
    /// (a, CDF, N(a)) under the s'' normalizer.
    #[serde(skip)]
    pub cdf_curve: Vec<(f64, f64, f64)>,
}

/// Mean and i.i.d. standard error of weighted per-atom values.
fn estimate(vals: &[f64], weights: &[f64], exact: bool) -> Estimate {
    let value: f64 = vals.iter().zip(weights).map(|(v, w)| v * w).sum();
    if exact || vals.len() < 2 {
        return Estimate { value, stderr: None };
    }
    let n = vals.len() as f64;
    let var = vals.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { value, stderr: Some((var / n).sqrt()) }
}

fn ks_records(dist: &Distribution, mean: f64, norms: [(&str, f64); 3]) -> Vec<KsRecord> {
    norms
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|&(name, s)| KsRecord { normalizer: name.into(), scale: s, ks: dist.normalized(mean, s).ks_normal() })
        .collect()
}

fn delta_bound(k_const: f64, t: f64, kappa_eps: f64, sup: f64, delta: f64, q: f64) -> f64 {
    2.0 * (2.0 * k_const * t + kappa_eps * sup + 2.0 * delta * q * sup)
}

struct CycleData {
    /// F(x, T) for each cycle.
    values: Vec<f64>,
    weights: Vec<f64>,
    mean: f64,
    sigma_sq: f64,
    timelines: Vec<Timeline>,
}

fn cycle_data(input: &LevelInput) -> CycleData {
    let t = input.entry.t;
    let timelines: Vec<Timeline> =
        input.cycles.par_iter().map(|c| Timeline::for_cycle(c.base_word(), input.roof, input.f)).collect();
    let values: Vec<f64> = timelines.iter().map(|tl| tl.cumulative(t)).collect();
    let weights = input.base.weights.clone();
    let mean = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
    let sigma_sq = weighted_variance(&values, &weights);
    CycleData { values, weights, mean, sigma_sq, timelines }
}

fn mu_side(cd: &CycleData, base: &DiscreteMeasure, k: u64, cfg: &EngineConfig) -> MuSide {
    let lindeberg =
        cfg.gammas.iter().map(|&g| GammaValue { gamma: g, ratio: lindeberg_ratio_m(&cd.values, &cd.weights, k, g) }).collect();
    let mut out = MuSide { sigma_sq: cd.sigma_sq, mean: cd.mean, lindeberg, ks: None, method: "none".into(), fitted_c: None };
    if !(cd.sigma_sq > 0.0) {
        return out;
    }
    let (shift, scale) = (k as f64 * cd.mean, (k as f64 * cd.sigma_sq).sqrt());
    let atoms = Distribution::from_atoms(&cd.values, &cd.weights);
    let dist = match atoms.convolve_power(k as usize, cfg.conv_cap) {
        Some(d) => {
            out.method = "convolution".into();
            d
        }
        None => {
            out.method = "sampled".into();
            let mode = SamplerMode::Sampled { samples: cfg.samples, seed: cfg.seed ^ 0x6d75 };
            let sampler = ProductSampler::with_mode(base.clone(), k as usize, mode);
            let sums: Vec<f64> =
                (0..cfg.samples).into_par_iter().map(|i| sampler.tuple(i).iter().map(|&j| cd.values[j]).sum()).collect();
            Distribution::from_atoms(&sums, &vec![1.0 / cfg.samples as f64; cfg.samples])
        }
    };
    let ks = dist.normalized(shift, scale).ks_normal();
    out.ks = Some(ks);
    out.fitted_c = Some(ks * (k as f64).sqrt());
    out
}

fn variance_bundle(sigma_sq: f64, q: f64, per_p: &[f64], s2: Estimate, sp2: Estimate, spp2: Estimate) -> VarianceBundle {
    let per_p_ratio: Vec<f64> = per_p.iter().map(|v| v / (q * q * sigma_sq)).collect();
    let max_ratio_dev = if sigma_sq > 0.0 {
        Flagged::Value(per_p_ratio.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max))
    } else {
        Flagged::ZeroVariance("zero_variance")
    };
    let rel = |x: f64| match Flagged::ratio(x, s2.value) {
        Flagged::Value(v) => Flagged::Value(v - 1.0),
        z => z,
    };
    VarianceBundle {
        sigma_l_sq: sigma_sq,
        per_p_ratio: if sigma_sq > 0.0 { per_p_ratio } else { Vec::new() },
        max_ratio_dev,
        ratio_prime: rel(sp2.value),
        ratio_doubleprime: rel(spp2.value),
        s_l_sq: s2,
        s_prime_sq: sp2,
        s_doubleprime_sq: spp2,
    }
}

fn lindeberg_flags(gammas: &[f64], sums: &[f64], s2: f64) -> Vec<GammaValue> {
    gammas.iter().zip(sums).map(|(&g, &v)| GammaValue { gamma: g, ratio: Flagged::ratio(v, s2) }).collect()
}

/// Statistics of one schedule level.
pub fn level_stats(input: &LevelInput, cfg: &EngineConfig) -> Result<LevelStats> {
    let e = input.entry;
    if input.cycles.is_empty() {
        return Err(LabError::EmptyWindow);
    }
    let gluer = Gluer::new(input.system, input.roof, e.t, e.c as usize, e.m)?;
    let cd = cycle_data(input);
    let mu = mu_side(&cd, input.base, e.k, cfg);
    let n = input.cycles.len() as f64;
    let atoms = n.powi(e.k as i32);
    let factor = match cfg.backend {
        Backend::Auto | Backend::Factorized => Factorized::try_new(input, &gluer, &cd)?,
        _ => None,
    };
    let mut stats = match (cfg.backend, factor) {
        (_, Some(fz)) => fz.run(input, &cd, cfg)?,
        (Backend::Factorized, None) => {
            return Err(LabError::Precondition("factorized backend needs exact bridges and steady windows".into()))
        }
        (Backend::Enumerate, _) if atoms > cfg.exact_cap => {
            return Err(LabError::BudgetExceeded(format!("{atoms:.3e} atoms above cap {:.3e}", cfg.exact_cap)))
        }
        (Backend::Sample, _) => {
            let mode = SamplerMode::Sampled { samples: cfg.samples, seed: cfg.seed };
            general(input, gluer, &cd, cfg, ProductSampler::with_mode(input.base.clone(), e.k as usize, mode))?
        }
        _ => {
            let p = ProductSampler::new(input.base.clone(), e.k as usize, cfg.exact_cap, cfg.samples, cfg.seed)?;
            general(input, gluer, &cd, cfg, p)?
        }
    };
    stats.mu = mu;
    Ok(stats)
}

fn shell(input: &LevelInput, backend: Backend, atoms: usize) -> LevelStats {
    let e = input.entry;
    LevelStats {
        l: e.l,
        t: e.t,
        k: e.k,
        c: e.c,
        q: e.q,
        delta: e.delta,
        s: e.s,
        cycles: input.cycles.len(),
        backend,
        atoms,
        max_residual: 0.0,
        mu: MuSide { sigma_sq: 0.0, mean: 0.0, lindeberg: vec![], ks: None, method: String::new(), fitted_c: None },
        variance: variance_bundle(0.0, 1.0, &[], Estimate { value: 0.0, stderr: None }, Estimate { value: 0.0, stderr: None }, Estimate { value: 0.0, stderr: None }),
        clt: CltReport { mean_s: 0.0, ks: vec![], lindeberg_nu: vec![], method: String::new() },
        deviation: DeviationSummary {
            k_const: input.k_const,
            delta_sup: 0.0,
            delta_bound: 0.0,
            bound_ok: true,
            ab_threshold: 0.0,
            ab_mass: None,
        },
        main_integral: Estimate { value: 0.0, stderr: None },
        test_integrals: vec![],
        cdf_curve: vec![],
    }
}

struct AtomMoments {
    w: f64,
    m_p: Vec<f64>,
    q_p: Vec<f64>,
    m_sum: f64,
    q_sum: f64,
    m_z: f64,
    q_z: f64,
    main: f64,
    tests: Vec<f64>,
    residual: f64,
}

struct AtomTail {
    lind: Vec<f64>,
    delta_sup: f64,
    ab: f64,
    z: PiecewisePoly,
}

/// Block functionals of one glued atom: (H_p for each p, Z).
fn atom_functionals(tl: &Timeline, e: &ScheduleEntry, starts: &[f64]) -> (Vec<PiecewisePoly>, PiecewisePoly) {
    let qt = e.q as f64 * e.t;
    let h = starts.iter().map(|&tp| tl.window_functional(tp, tp + qt, e.t)).collect();
    (h, tl.window_functional(0.0, e.s, e.t))
}

fn general(input: &LevelInput, gluer: Gluer, cd: &CycleData, cfg: &EngineConfig, product: ProductSampler) -> Result<LevelStats> {
    let e = input.entry;
    let t = e.t;
    let k = e.k as usize;
    let q = e.q as f64;
    let exact = product.is_exact();
    let backend = if exact { Backend::Enumerate } else { Backend::Sample };
    let nu = OrbitSegmentMeasure { cycles: input.cycles.clone(), product, gluer, segment_length: t };
    let builder = TimelineBuilder::new(input.roof, input.f);
    let test_builders: Vec<TimelineBuilder> = input.tests.iter().map(|g| TimelineBuilder::new(input.roof, g)).collect();
    let starts: Vec<f64> = (0..k).map(|p| p as f64 * (e.c as f64 * t + e.m)).collect();

    // Shifts for the raw second moments, taken from atom 0.
    let (shift_p, shift_sum, shift_z) = {
        let (g, _) = nu.atom(0)?;
        let (h, z) = atom_functionals(&builder.build(&g), e, &starts);
        let sp: Vec<f64> = h.iter().map(PiecewisePoly::mean).collect();
        let ss = sp.iter().sum::<f64>();
        (sp, ss, z.mean())
    };

    let pass1: Vec<AtomMoments> = (0..nu.len())
        .into_par_iter()
        .map(|i| {
            let (g, w) = nu.atom(i)?;
            let tl = builder.build(&g);
            let (h, z) = atom_functionals(&tl, e, &starts);
            let m_p: Vec<f64> = h.iter().map(PiecewisePoly::mean).collect();
            let q_p: Vec<f64> = h.iter().zip(&shift_p).map(|(h, c)| h.sq_dev_integral(*c) / t).collect();
            let sum = sum_functionals(&h, t);
            let tests = test_builders.iter().map(|b| b.build(&g).integral(0.0, t) / t).collect();
            Ok(AtomMoments {
                w,
                m_sum: sum.mean(),
                q_sum: sum.sq_dev_integral(shift_sum) / t,
                m_z: z.mean(),
                q_z: z.sq_dev_integral(shift_z) / t,
                main: tl.integral(0.0, t) / t,
                m_p,
                q_p,
                tests,
                residual: g.max_abs_residual(),
            })
        })
        .collect::<Result<_>>()?;

    let weights: Vec<f64> = pass1.iter().map(|a| a.w).collect();
    let wsum = |f: &dyn Fn(&AtomMoments) -> f64| pass1.iter().map(|a| a.w * f(a)).sum::<f64>();
    let m_p: Vec<f64> = (0..k).map(|p| wsum(&|a| a.m_p[p])).collect();
    let var_p: Vec<f64> = (0..k).map(|p| wsum(&|a| a.q_p[p]) - (m_p[p] - shift_p[p]).powi(2)).collect();
    let m_sum = wsum(&|a| a.m_sum);
    let m_z = wsum(&|a| a.m_z);
    let s2 = var_p.iter().sum::<f64>();
    let sp2 = wsum(&|a| a.q_sum) - (m_sum - shift_sum).powi(2);
    let spp2 = wsum(&|a| a.q_z) - (m_z - shift_z).powi(2);
    let se = |vals: Vec<f64>| estimate(&vals, &weights, exact).stderr;
    let s2_est = Estimate { value: s2, stderr: se(pass1.iter().map(|a| a.q_p.iter().sum()).collect()) };
    let sp2_est = Estimate { value: sp2, stderr: se(pass1.iter().map(|a| a.q_sum).collect()) };
    let spp2_est = Estimate { value: spp2, stderr: se(pass1.iter().map(|a| a.q_z).collect()) };
    let s = s2.max(0.0).sqrt();

    let pass2: Vec<AtomTail> = (0..nu.len())
        .into_par_iter()
        .map(|i| {
            let (g, _) = nu.atom(i)?;
            let tl = builder.build(&g);
            let (h, z) = atom_functionals(&tl, e, &starts);
            let lind = cfg
                .gammas
                .iter()
                .map(|&gm| h.iter().zip(&m_p).map(|(h, m)| h.lindeberg_integral(*m, gm * s) / t).sum())
                .collect();
            let delta_sup = h
                .iter()
                .zip(&m_p)
                .zip(&g.components)
                .map(|((h, m), c)| h.sup_abs_dev(m + q * (cd.values[c.index] - cd.mean)))
                .fold(0.0, f64::max);
            let sum = sum_functionals(&h, t);
            let d = sum.sub(&z).add_const(m_z - m_p.iter().sum::<f64>());
            let ab = if s > 0.0 { abs_exceed_mass(&d, cfg.ab_threshold * s) / t } else { 0.0 };
            Ok(AtomTail { lind, delta_sup, ab, z })
        })
        .collect::<Result<_>>()?;

    let mut out = shell(input, backend, nu.len());
    out.max_residual = pass1.iter().map(|a| a.residual).fold(0.0, f64::max);
    out.variance = variance_bundle(cd.sigma_sq, q, &var_p, s2_est, sp2_est, spp2_est);
    let lind_sums: Vec<f64> =
        (0..cfg.gammas.len()).map(|j| pass2.iter().zip(&weights).map(|(a, w)| w * a.lind[j]).sum()).collect();
    let mut dist = Distribution::default();
    for (a, w) in pass2.iter().zip(&weights) {
        dist.add_functional(&a.z, *w);
    }
    let dist = dist.finish();
    let norms = [("s", s), ("s_prime", sp2.max(0.0).sqrt()), ("s_doubleprime", spp2.max(0.0).sqrt())];
    out.clt = CltReport {
        mean_s: m_z,
        ks: ks_records(&dist, m_z, norms),
        lindeberg_nu: lindeberg_flags(&cfg.gammas, &lind_sums, s2),
        method: if exact { "exact".into() } else { "sampled".into() },
    };
    if norms[2].1 > 0.0 {
        out.cdf_curve = dist.normalized(m_z, norms[2].1).curve(cfg.curve_points);
    }
    let sup = input.f.sup_norm();
    let delta_sup = pass2.iter().map(|a| a.delta_sup).fold(0.0, f64::max);
    let bound = delta_bound(input.k_const, t, cfg.kappa_eps.unwrap_or(e.epsilon), sup, e.delta, q);
    out.deviation = DeviationSummary {
        k_const: input.k_const,
        delta_sup,
        delta_bound: bound,
        bound_ok: delta_sup <= bound,
        ab_threshold: cfg.ab_threshold,
        ab_mass: (s > 0.0).then(|| estimate(&pass2.iter().map(|a| a.ab).collect::<Vec<_>>(), &weights, exact)),
    };
    out.main_integral = estimate(&pass1.iter().map(|a| a.main).collect::<Vec<_>>(), &weights, exact);
    out.test_integrals = input
        .tests
        .iter()
        .enumerate()
        .map(|(j, g)| NamedEstimate {
            name: g.name.clone(),
            estimate: estimate(&pass1.iter().map(|a| a.tests[j]).collect::<Vec<_>>(), &weights, exact),
        })
        .collect();
    Ok(out)
}

/// Lebesgue measure of {t : |D(t)| > c}.
fn abs_exceed_mass(d: &PiecewisePoly, c: f64) -> f64 {
    let above = d.span() - d.measure_le(c);
    // {D < −c} = {−D > c}.
    let neg = PiecewisePoly { breaks: d.breaks.clone(), polys: d.polys.iter().map(|p| p.iter().map(|x| -x).collect()).collect() };
    above + neg.span() - neg.measure_le(c)
}

/// Σ of the fiber integrals of f over positions [from, to) of `seq`.
fn fiber_sum(seq: &dyn Fn(i64) -> u8, from: usize, to: usize, roof: &RoofFunction, f: &Observable) -> f64 {
    (from as i64..to as i64)
        .map(|j| roof.at(seq, j) * poly::eval(&poly::antiderivative(f.profile_at(seq, j)), 1.0))
        .sum()
}

struct Factorized {
    /// seg[x][y]: ∫ f over the block x^C w(x,y) with y's context after it.
    seg: Vec<Vec<f64>>,
    /// H_x(t) = G_x(t + QT) − G_x(t) on [0, T].
    h: Vec<PiecewisePoly>,
}

impl Factorized {
    fn try_new(input: &LevelInput, gluer: &Gluer, cd: &CycleData) -> Result<Option<Self>> {
        let e = input.entry;
        let roof = input.roof;
        let depth = input.tests.iter().map(|g| g.depth).chain([roof.depth(), input.f.depth]).max().unwrap_or(1);
        let min_period = input.cycles.iter().map(|c| c.flow_period).fold(f64::INFINITY, f64::min);
        let need = (e.q as f64 + 1.0) * e.t + (depth - 1) as f64 * roof.r_max;
        if need > e.c as f64 * min_period + 1e-9 * need {
            return Ok(None);
        }
        let cycles = &input.cycles;
        let n = cycles.len();
        let mut seg = vec![vec![0.0; n]; n];
        for (i, x) in cycles.iter().enumerate() {
            let xw = x.base_word();
            let loop_len = e.c as usize * xw.len();
            let tail_len = (depth - 1).min(loop_len);
            let tail: Vec<u8> = (loop_len - tail_len..loop_len).map(|j| xw[j % xw.len()]).collect();
            let cyc_seq = |j: i64| xw[j.rem_euclid(xw.len() as i64) as usize];
            let cyc_tail = fiber_sum(&cyc_seq, loop_len - tail_len, loop_len, roof, input.f);
            let loops_int = e.c as f64 * cd.timelines[i].period_integral();
            for (j, y) in cycles.iter().enumerate() {
                let (bridge, _) = gluer.bridge(x, y)?;
                if bridge.residual.abs() > 1e-9 * e.t.max(1.0) {
                    return Ok(None);
                }
                let yw = y.base_word();
                let s: Vec<u8> = tail
                    .iter()
                    .chain(&bridge.word)
                    .copied()
                    .chain((0..depth).map(|r| yw[r % yw.len()]))
                    .collect();
                let true_seq = |j: i64| s[j as usize];
                seg[i][j] = loops_int - cyc_tail + fiber_sum(&true_seq, 0, tail_len + bridge.word.len(), roof, input.f);
            }
        }
        let qt = e.q as f64 * e.t;
        let h = cd.timelines.par_iter().map(|tl| tl.window_functional(0.0, qt, e.t)).collect();
        Ok(Some(Self { seg, h }))
    }

    /// Law of Z = Σ_p seg(x_p, x_{p+1}) (cyclic), and how it was obtained.
    fn z_law(&self, w: &[f64], k: usize, base: &DiscreteMeasure, cfg: &EngineConfig) -> (Distribution, String) {
        let n = w.len();
        let s = &self.seg;
        if k == 1 {
            let v: Vec<f64> = (0..n).map(|x| s[x][x]).collect();
            return (Distribution::from_atoms(&v, w), "exact".into());
        }
        let scale = s.iter().flatten().map(|v| v.abs()).fold(1.0, f64::max);
        let additive = (0..n).all(|x| (0..n).all(|y| (s[x][y] - s[x][0] - s[0][y] + s[0][0]).abs() <= 1e-9 * scale));
        if additive {
            let c: Vec<f64> = (0..n).map(|x| s[x][0] + s[0][x] - s[0][0]).collect();
            if let Some(d) = Distribution::from_atoms(&c, w).convolve_power(k, cfg.conv_cap) {
                return (d, "convolution".into());
            }
        }
        if k == 2 && n * n <= cfg.conv_cap {
            let mut v = Vec::with_capacity(n * n);
            let mut ww = Vec::with_capacity(n * n);
            for x in 0..n {
                for y in 0..n {
                    v.push(s[x][y] + s[y][x]);
                    ww.push(w[x] * w[y]);
                }
            }
            return (Distribution::from_atoms(&v, &ww), "exact".into());
        }
        let mode = SamplerMode::Sampled { samples: cfg.samples, seed: cfg.seed };
        let sampler = ProductSampler::with_mode(base.clone(), k, mode);
        let z: Vec<f64> = (0..cfg.samples).into_par_iter().map(|i| self.z_of(&sampler.tuple(i))).collect();
        (Distribution::from_atoms(&z, &vec![1.0 / cfg.samples as f64; cfg.samples]), "sampled".into())
    }

    fn z_of(&self, tuple: &[usize]) -> f64 {
        let k = tuple.len();
        (0..k).map(|p| self.seg[tuple[p]][tuple[(p + 1) % k]]).sum()
    }

    fn run(&self, input: &LevelInput, cd: &CycleData, cfg: &EngineConfig) -> Result<LevelStats> {
        let e = input.entry;
        let (t, k, q) = (e.t, e.k as usize, e.q as f64);
        let w = &cd.weights;
        let n = w.len();
        let s = &self.seg;
        let mut out = shell(input, Backend::Factorized, (n as f64).powi(k as i32).min(usize::MAX as f64) as usize);
        let exact = |v: f64| Estimate { value: v, stderr: None };

        let m_x: Vec<f64> = self.h.iter().map(PiecewisePoly::mean).collect();
        let m: f64 = m_x.iter().zip(w).map(|(a, b)| a * b).sum();
        let var_fp: f64 = self.h.iter().zip(w).map(|(h, wx)| wx * h.sq_dev_integral(m) / t).sum();
        let s2 = k as f64 * var_fp;
        let mu_t = weighted_sum(self.h.iter().zip(w.iter().copied()), t);
        let within: f64 = self.h.iter().zip(w).map(|(h, wx)| wx * h.sub(&mu_t).sq_dev_integral(0.0) / t).sum();
        let sp2 = k as f64 * within + (k * k) as f64 * mu_t.sq_dev_integral(m) / t;

        let (mean_z, spp2) = if k == 1 {
            let v: Vec<f64> = (0..n).map(|x| s[x][x]).collect();
            let mz = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (mz, weighted_variance(&v, w))
        } else if k == 2 {
            let mut mz = 0.0;
            for x in 0..n {
                for y in 0..n {
                    mz += w[x] * w[y] * (s[x][y] + s[y][x]);
                }
            }
            let mut var = 0.0;
            for x in 0..n {
                for y in 0..n {
                    var += w[x] * w[y] * (s[x][y] + s[y][x] - mz).powi(2);
                }
            }
            (mz, var)
        } else {
            let es: f64 = (0..n).map(|x| (0..n).map(|y| w[x] * w[y] * s[x][y]).sum::<f64>()).sum();
            let var_s: f64 = (0..n).map(|x| (0..n).map(|y| w[x] * w[y] * (s[x][y] - es).powi(2)).sum::<f64>()).sum();
            let incoming: Vec<f64> = (0..n).map(|y| (0..n).map(|x| w[x] * s[x][y]).sum()).collect();
            let outgoing: Vec<f64> = (0..n).map(|y| (0..n).map(|z| w[z] * s[y][z]).sum()).collect();
            let cov: f64 = (0..n).map(|y| w[y] * (incoming[y] - es) * (outgoing[y] - es)).sum();
            (k as f64 * es, k as f64 * var_s + 2.0 * k as f64 * cov)
        };

        out.variance = variance_bundle(cd.sigma_sq, q, &vec![var_fp; k], exact(s2), exact(sp2), exact(spp2));
        let sd = s2.max(0.0).sqrt();
        let lind: Vec<f64> = cfg
            .gammas
            .iter()
            .map(|&g| k as f64 * self.h.iter().zip(w).map(|(h, wx)| wx * h.lindeberg_integral(m, g * sd) / t).sum::<f64>())
            .collect();

        let (dist, method) = self.z_law(w, k, input.base, cfg);
        let norms = [("s", sd), ("s_prime", sp2.max(0.0).sqrt()), ("s_doubleprime", spp2.max(0.0).sqrt())];
        out.clt = CltReport {
            mean_s: mean_z,
            ks: ks_records(&dist, mean_z, norms),
            lindeberg_nu: lindeberg_flags(&cfg.gammas, &lind, s2),
            method,
        };
        if norms[2].1 > 0.0 {
            out.cdf_curve = dist.normalized(mean_z, norms[2].1).curve(cfg.curve_points);
        }

        let delta_sup = self
            .h
            .iter()
            .zip(&cd.values)
            .map(|(h, fx)| h.sup_abs_dev(m + q * (fx - cd.mean)))
            .fold(0.0, f64::max);
        let sup = input.f.sup_norm();
        let bound = delta_bound(input.k_const, t, cfg.kappa_eps.unwrap_or(e.epsilon), sup, e.delta, q);
        let ab_mass = (sd > 0.0).then(|| self.ab_mass(input.base, k, t, m, mean_z, cfg.ab_threshold * sd, cfg));
        out.deviation = DeviationSummary {
            k_const: input.k_const,
            delta_sup,
            delta_bound: bound,
            bound_ok: delta_sup <= bound,
            ab_threshold: cfg.ab_threshold,
            ab_mass,
        };

        let main: f64 = cd.values.iter().zip(w).map(|(v, wx)| wx * v / t).sum();
        out.main_integral = exact(main);
        out.test_integrals = input
            .tests
            .iter()
            .map(|g| {
                let v: f64 = input
                    .cycles
                    .iter()
                    .zip(w)
                    .map(|(c, wx)| wx * Timeline::for_cycle(c.base_word(), input.roof, g).cumulative(t) / t)
                    .sum();
                NamedEstimate { name: g.name.clone(), estimate: exact(v) }
            })
            .collect();
        Ok(out)
    }

    /// ν_l{|A − B| > a}: exact over tuples when few, else over seeded tuples;
    /// exact in t either way.
    #[allow(clippy::too_many_arguments)]
    fn ab_mass(&self, base: &DiscreteMeasure, k: usize, t: f64, m: f64, mean_z: f64, c: f64, cfg: &EngineConfig) -> Estimate {
        let sampler = ProductSampler::new(base.clone(), k, cfg.samples as f64, cfg.samples, cfg.seed ^ 0xab)
            .expect("nonempty base and k >= 1");
        let exact = sampler.is_exact();
        let vals: Vec<(f64, f64)> = (0..sampler.len())
            .into_par_iter()
            .map(|i| {
                let tuple = sampler.tuple(i);
                let b = sum_functionals(tuple.iter().map(|&x| &self.h[x]), t);
                let d = b.add_const(-(k as f64) * m - (self.z_of(&tuple) - mean_z));
                (sampler.weight(&tuple), abs_exceed_mass(&d, c) / t)
            })
            .collect();
        let (w, v): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
        estimate(&v, &w, exact)
    }
}
