//! Atomic base-point measures, the product and orbit-segment measures built
//! from them, and Markov reference measures for the suspension.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::census::{CensusWindow, Cycle};
use crate::error::{LabError, Result};
use crate::gluing::{GluedPoint, Gluer};
use crate::linalg;
use crate::system::{word_string, Observable, RoofFunction, SymbolicSystem};
use crate::timeline::{Timeline, TimelineBuilder};

/// Default cap on exactly enumerated product atoms.
pub const DEFAULT_EXACT_CAP: f64 = 1e6;

/// Weights on the base points of a census window.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteMeasure {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    /// log Φ(v) for Gibbs weights (zeros for the uniform measure).
    pub log_weights: Vec<f64>,
    /// log F_l = log Σ Φ(v).
    pub log_normalizer: f64,
}

impl DiscreteMeasure {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn variance(&self, values: &[f64]) -> f64 {
        let m = self.mean(values);
        self.weights.iter().zip(values).map(|(w, v)| w * (v - m) * (v - m)).sum()
    }

    /// Cumulative weights for inverse-CDF sampling.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

pub fn uniform_measure(window: &CensusWindow) -> Result<DiscreteMeasure> {
    if window.is_empty() {
        return Err(LabError::EmptyWindow);
    }
    let n = window.len();
    Ok(DiscreteMeasure {
        labels: window.cycles.iter().map(|c| word_string(c.base_word())).collect(),
        weights: vec![1.0 / n as f64; n],
        log_weights: vec![0.0; n],
        log_normalizer: (n as f64).ln(),
    })
}

/// Weights Φ(v)/F with Φ(v) = exp ∫₀^T φ(g_s v) ds, normalized in log space.
pub fn gibbs_weighted_measure(window: &CensusWindow, roof: &RoofFunction, phi: &Observable, t: f64) -> Result<DiscreteMeasure> {
    if window.is_empty() {
        return Err(LabError::EmptyWindow);
    }
    let logs: Vec<f64> = window
        .cycles
        .iter()
        .map(|c| Timeline::for_cycle(c.base_word(), roof, phi).integral(0.0, t))
        .collect();
    Ok(from_log_weights(window, logs))
}

fn from_log_weights(window: &CensusWindow, logs: Vec<f64>) -> DiscreteMeasure {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = e.iter().sum();
    DiscreteMeasure {
        labels: window.cycles.iter().map(|c| word_string(c.base_word())).collect(),
        weights: e.iter().map(|x| x / sum).collect(),
        log_normalizer: top + sum.ln(),
        log_weights: logs,
    }
}

/// Seed for the `index`-th draw of a stream, independent of worker layout.
pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn draw(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * cum.last().copied().unwrap_or(1.0);
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

#[derive(Debug, Clone, Serialize)]
pub enum SamplerMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

/// μ_l: the k-fold product of a base measure, enumerated or sampled.
#[derive(Debug, Clone)]
pub struct ProductSampler {
    pub base: DiscreteMeasure,
    pub arity: usize,
    pub mode: SamplerMode,
    cum: Vec<f64>,
}

impl ProductSampler {
    /// Exact when (#E)^k ≤ cap, otherwise sampled with `samples` tuples.
    pub fn new(base: DiscreteMeasure, arity: usize, exact_cap: f64, samples: usize, seed: u64) -> Result<Self> {
        if base.is_empty() {
            return Err(LabError::EmptyWindow);
        }
        if arity == 0 {
            return Err(LabError::Precondition("product arity must be at least 1".into()));
        }
        let atoms = (base.len() as f64).powi(arity as i32);
        let mode = if atoms <= exact_cap {
            SamplerMode::Exact
        } else {
            if samples == 0 {
                return Err(LabError::BudgetExceeded(format!("{atoms:.3e} product atoms above cap {exact_cap:.3e} and no samples")));
            }
            SamplerMode::Sampled { samples, seed }
        };
        let cum = base.cumulative();
        Ok(Self { base, arity, mode, cum })
    }

    pub fn with_mode(base: DiscreteMeasure, arity: usize, mode: SamplerMode) -> Self {
        let cum = base.cumulative();
        Self { base, arity, mode, cum }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, SamplerMode::Exact)
    }

    pub fn len(&self) -> usize {
        match self.mode {
            SamplerMode::Exact => self.base.len().pow(self.arity as u32),
            SamplerMode::Sampled { samples, .. } => samples,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The i-th tuple: mixed-radix decoding (exact) or the i-th seeded draw.
    pub fn tuple(&self, i: usize) -> Vec<usize> {
        match self.mode {
            SamplerMode::Exact => {
                let n = self.base.len();
                let mut out = vec![0; self.arity];
                let mut x = i;
                for slot in out.iter_mut().rev() {
                    *slot = x % n;
                    x /= n;
                }
                out
            }
            SamplerMode::Sampled { seed, .. } => {
                let mut rng = stream_rng(seed, 1, i as u64);
                (0..self.arity).map(|_| draw(&self.cum, &mut rng)).collect()
            }
        }
    }

    pub fn weight(&self, tuple: &[usize]) -> f64 {
        match self.mode {
            SamplerMode::Exact => tuple.iter().map(|&j| self.base.weights[j]).product(),
            SamplerMode::Sampled { samples, .. } => 1.0 / samples as f64,
        }
    }
}

/// ν_l: glued points of the product atoms, each carrying (1/T)L(y, T).
pub struct OrbitSegmentMeasure<'a> {
    pub cycles: Arc<Vec<Cycle>>,
    pub product: ProductSampler,
    pub gluer: Gluer<'a>,
    pub segment_length: f64,
}

/// A sampled or exact expectation.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

impl<'a> OrbitSegmentMeasure<'a> {
    pub fn atom(&self, i: usize) -> Result<(GluedPoint, f64)> {
        let tuple = self.product.tuple(i);
        let cs: Vec<&Cycle> = tuple.iter().map(|&j| &self.cycles[j]).collect();
        let g = self.gluer.glue(&cs, &tuple)?;
        Ok((g, self.product.weight(&tuple)))
    }

    pub fn len(&self) -> usize {
        self.product.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product.is_empty()
    }

    /// All entries; intended for small exact instances.
    pub fn entries(&self) -> Result<Vec<(GluedPoint, f64)>> {
        (0..self.len()).map(|i| self.atom(i)).collect()
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.len()).map(|i| self.product.weight(&self.product.tuple(i))).sum()
    }

    /// Σ w·(1/T)∫₀^T F(g_t y, [s, u]) dt.
    pub fn integrate(&self, roof: &RoofFunction, f: &Observable, s: f64, u: f64) -> Result<Estimate> {
        let limit = self.nominal_total();
        if s < 0.0 || u > limit * (1.0 + 1e-12) || s > u {
            return Err(LabError::WindowOutOfRange { start: s, end: u, limit });
        }
        let t = self.segment_length;
        let builder = TimelineBuilder::new(roof, f);
        let vals: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (g, w) = self.atom(i)?;
                let tl = builder.build(&g);
                Ok((w, tl.window_functional(s, u, t).mean()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(weighted_estimate(&vals, self.product.is_exact()))
    }

    /// S_l = k(C·T + M).
    pub fn nominal_total(&self) -> f64 {
        self.product.arity as f64 * (self.gluer.loops as f64 * self.gluer.t_l + self.gluer.m)
    }
}

/// Weighted mean, with an i.i.d. standard error when sampled.
pub fn weighted_estimate(vals: &[(f64, f64)], exact: bool) -> Estimate {
    let value: f64 = vals.iter().map(|(w, v)| w * v).sum();
    if exact || vals.len() < 2 {
        return Estimate { value, stderr: None };
    }
    let n = vals.len() as f64;
    let var: f64 = vals.iter().map(|(_, v)| (v - value).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { value, stderr: Some((var / n).sqrt()) }
}

#[derive(Debug, Clone, Serialize)]
pub enum ReferenceKind {
    Mme,
    Gibbs(String),
}

/// Stationary Markov measure on b-blocks of the base, lifted to the suspension.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceMeasure {
    pub kind: ReferenceKind,
    pub block_len: usize,
    #[serde(skip)]
    pub blocks: Vec<Vec<u8>>,
    pub stationary: Vec<f64>,
    /// kernel[u] lists (v, P(u → v)).
    pub kernel: Vec<Vec<(usize, f64)>>,
    /// Flow pressure: the P with log ρ(e^{φ̄ − P r}) = 0.
    pub pressure: f64,
    /// Entropy of the lifted base Markov measure divided by its mean roof.
    pub flow_entropy: f64,
    roof_depth: usize,
}

/// Parry (φ = None) or Gibbs reference for a depth-≤ b+1 potential.
pub fn reference_measure(
    system: &SymbolicSystem,
    roof: &RoofFunction,
    phi: Option<&Observable>,
    max_depth: usize,
) -> Result<ReferenceMeasure> {
    let depth = max_depth.max(roof.depth()).max(phi.map_or(1, |p| p.depth));
    let b = (depth.max(2) - 1).max(1);
    let blocks = system.admissible_words(b);
    let index = |w: &[u8]| blocks.binary_search_by(|x| x.as_slice().cmp(w)).expect("block index");
    let n = blocks.len();
    // Edge (u, v) ↔ the (b+1)-word u·v_last.
    let mut edges: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
    for (iu, u) in blocks.iter().enumerate() {
        for s in 0..system.alphabet_size as u8 {
            if !system.admits(u[b - 1], s) {
                continue;
            }
            let mut word = u.clone();
            word.push(s);
            let iv = index(&word[1..]);
            let r = roof.table.on_word(&word);
            let phibar = phi.map_or(0.0, |p| r * p.mean_on_word(&word));
            edges[iu].push((iv, r, phibar));
        }
    }
    let matrix = |p: f64| -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for (iu, es) in edges.iter().enumerate() {
            for &(iv, r, ph) in es {
                m[iu][iv] = (ph - p * r).exp();
            }
        }
        m
    };
    let log_rho = |p: f64| -> Result<f64> { Ok(linalg::perron(&matrix(p))?.rho.ln()) };
    // log ρ is strictly decreasing in P; bracket then bisect.
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut guard = 0;
    while log_rho(lo)? < 0.0 {
        lo = 2.0 * lo - 1.0;
        guard += 1;
        if guard > 200 {
            return Err(LabError::NonConvergence(guard));
        }
    }
    while log_rho(hi)? > 0.0 {
        hi = 2.0 * hi + 1.0;
        guard += 1;
        if guard > 400 {
            return Err(LabError::NonConvergence(guard));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_rho(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pressure = 0.5 * (lo + hi);
    let mat = matrix(pressure);
    let perron = linalg::perron(&mat)?;
    let (rho, r, l) = (perron.rho, &perron.right, &perron.left);
    let stationary: Vec<f64> = (0..n).map(|i| l[i] * r[i]).collect();
    let kernel: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|iu| edges[iu].iter().map(|&(iv, _, _)| (iv, mat[iu][iv] * r[iv] / (rho * r[iu]))).collect())
        .collect();
    let mut ent = 0.0;
    let mut mean_r = 0.0;
    for (iu, es) in edges.iter().enumerate() {
        for (k, &(_, rr, _)) in es.iter().enumerate() {
            let p = kernel[iu][k].1;
            let mass = stationary[iu] * p;
            if p > 0.0 {
                ent -= mass * p.ln();
            }
            mean_r += mass * rr;
        }
    }
    let kind = match phi {
        None => ReferenceKind::Mme,
        Some(p) => ReferenceKind::Gibbs(p.name.clone()),
    };
    Ok(ReferenceMeasure {
        kind,
        block_len: b,
        blocks,
        stationary,
        kernel,
        pressure,
        flow_entropy: ent / mean_r,
        roof_depth: roof.depth(),
    })
}

impl ReferenceMeasure {
    /// max_v |Σ_u π_u P(u→v) − π_v| and max_u |Σ_v P(u→v) − 1|.
    pub fn residuals(&self) -> (f64, f64) {
        let n = self.stationary.len();
        let mut next = vec![0.0; n];
        let mut row_err: f64 = 0.0;
        for (u, row) in self.kernel.iter().enumerate() {
            let s: f64 = row.iter().map(|x| x.1).sum();
            row_err = row_err.max((s - 1.0).abs());
            for &(v, p) in row {
                next[v] += self.stationary[u] * p;
            }
        }
        let stat = next.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (stat, row_err)
    }

    /// Markov measure of the (b+1)-words, with the words.
    fn edge_masses(&self) -> Vec<(Vec<u8>, f64)> {
        let mut out = Vec::new();
        for (iu, row) in self.kernel.iter().enumerate() {
            for &(iv, p) in row {
                let mut w = self.blocks[iu].clone();
                w.push(*self.blocks[iv].last().expect("block"));
                out.push((w, self.stationary[iu] * p));
            }
        }
        out
    }

    /// ∫ f dμ_susp = Σ μ(w) r(w) f̄(w) / Σ μ(w) r(w).
    pub fn integrate(&self, roof: &RoofFunction, f: &Observable) -> Result<f64> {
        if f.depth > self.block_len + 1 || roof.depth() > self.block_len + 1 {
            return Err(LabError::Precondition(format!(
                "observable depth {} exceeds reference block length {}",
                f.depth,
                self.block_len + 1
            )));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (w, mass) in self.edge_masses() {
            let r = roof.table.on_word(&w);
            num += mass * r * f.mean_on_word(&w);
            den += mass * r;
        }
        Ok(num / den)
    }

    /// Base-shift probability of each symbol.
    pub fn symbol_marginals(&self, alphabet: usize) -> Vec<f64> {
        let mut p = vec![0.0; alphabet];
        for (u, pi) in self.blocks.iter().zip(&self.stationary) {
            p[u[0] as usize] += pi;
        }
        p
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub observable: String,
    pub measure_value: f64,
    pub reference_value: f64,
    pub deviation: f64,
    pub stderr: Option<f64>,
}

/// |∫f dν − ∫f dμ_ref| per observable, from precomputed ν-integrals.
pub fn compare_to_reference(
    nu_values: &[Estimate],
    reference: &ReferenceMeasure,
    roof: &RoofFunction,
    observables: &[Observable],
) -> Result<Vec<DeviationRow>> {
    observables
        .iter()
        .zip(nu_values)
        .map(|(f, e)| {
            let r = reference.integrate(roof, f)?;
            Ok(DeviationRow {
                observable: f.name.clone(),
                measure_value: e.value,
                reference_value: r,
                deviation: (e.value - r).abs(),
                stderr: e.stderr,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct MeasureDump<'a> {
    atoms: Vec<(&'a str, f64)>,
    log_normalizer: f64,
}

pub fn measure_json(m: &DiscreteMeasure) -> String {
    let dump = MeasureDump {
        atoms: m.labels.iter().map(String::as_str).zip(m.weights.iter().copied()).collect(),
        log_normalizer: m.log_normalizer,
    };
    serde_json::to_string_pretty(&dump).expect("measure serializes")
}
