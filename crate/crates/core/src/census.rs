//! Primitive periodic orbits, regular period windows, and growth diagnostics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::point::{bowen_distance_until, FlowPoint};
use crate::regularity::RegularityFunction;
use crate::system::{word_string, RoofFunction, SymbolicSystem};

/// Default cap on the estimated number of enumerated cycles.
pub const DEFAULT_CYCLE_BUDGET: f64 = 5e6;

/// A primitive periodic orbit in canonical (lexicographically minimal) rotation.
#[derive(Debug, Clone)]
pub struct Cycle {
    pub word: Arc<[u8]>,
    pub symbol_length: usize,
    /// |γ|: roof Birkhoff sum over one loop.
    pub flow_period: f64,
    /// Time average of λ over one loop.
    pub lambda_avg: f64,
    /// Rotation carrying the chosen base point v(γ).
    pub base_shift: usize,
    base_word: Arc<[u8]>,
}

impl Cycle {
    pub fn new(system: &SymbolicSystem, roof: &RoofFunction, lambda: &RegularityFunction, word: &[u8]) -> Result<Self> {
        if !system.is_cyclic_admissible(word) {
            return Err(LabError::Inadmissible { word: word_string(word) });
        }
        if !is_primitive(word) {
            return Err(LabError::Precondition(format!("word {:?} is not primitive", word_string(word))));
        }
        let canon = canonical_rotation(word);
        let n = canon.len();
        let seq = |j: i64| canon[j.rem_euclid(n as i64) as usize];
        let mut period = 0.0;
        let mut lam = 0.0;
        for j in 0..n as i64 {
            let r = roof.at(seq, j);
            period += r;
            lam += r * lambda.table.at(seq, j);
        }
        let word: Arc<[u8]> = Arc::from(canon);
        Ok(Self { base_word: word.clone(), word, symbol_length: n, flow_period: period, lambda_avg: lam / period, base_shift: 0 })
    }

    pub fn word_string(&self) -> String {
        word_string(&self.word)
    }

    /// The rotation starting at the base point.
    pub fn base_word(&self) -> &Arc<[u8]> {
        &self.base_word
    }

    pub fn base_point(&self) -> FlowPoint {
        FlowPoint::periodic_word(&self.base_word, 0.0)
    }

    /// v(γ): the lexicographically least rotation whose base word has λ ≥ η.
    pub fn select_base_point(&mut self, lambda: &RegularityFunction, eta: f64) {
        let n = self.symbol_length;
        let w = &self.word;
        let seq = |j: i64| w[j.rem_euclid(n as i64) as usize];
        let rot = |i: usize| -> Vec<u8> { (0..n).map(|k| w[(i + k) % n]).collect() };
        let best = (0..n)
            .filter(|&i| lambda.table.at(seq, i as i64) >= eta)
            .map(|i| (rot(i), i))
            .min()
            .map(|(_, i)| i)
            .unwrap_or(0);
        self.base_shift = best;
        self.base_word = Arc::from(rot(best));
    }
}

pub fn is_primitive(w: &[u8]) -> bool {
    let n = w.len();
    (1..n).filter(|d| n % d == 0).all(|d| (0..n).any(|i| w[i] != w[(i + d) % n]))
}

pub fn canonical_rotation(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    (0..n).map(|i| (0..n).map(|k| w[(i + k) % n]).collect::<Vec<u8>>()).min().unwrap_or_default()
}

/// Estimated number of primitive cycles with symbol length in [lo, hi].
pub fn estimated_cycle_count(system: &SymbolicSystem, lo: usize, hi: usize) -> f64 {
    (lo.max(1)..=hi).map(|n| (system.entropy * n as f64).exp() / n as f64 + system.alphabet_size as f64).sum()
}

/// All primitive cycles with symbol length in [min_len, max_len], in
/// (length, lexicographic) order.
pub fn enumerate_cycles(
    system: &SymbolicSystem,
    roof: &RoofFunction,
    lambda: &RegularityFunction,
    min_len: usize,
    max_len: usize,
    budget: f64,
) -> Result<Vec<Cycle>> {
    let min_len = min_len.max(1);
    let est = estimated_cycle_count(system, min_len, max_len);
    if est > budget {
        return Err(LabError::BudgetExceeded(format!(
            "about {est:.0} cycles with length {min_len}..={max_len}, cap {budget:.0}"
        )));
    }
    let mut out = Vec::new();
    for n in min_len..=max_len {
        for w in lyndon_words(system, n) {
            out.push(Cycle::new(system, roof, lambda, &w)?);
        }
    }
    Ok(out)
}

/// Admissible Lyndon words of length n (closing edge included), in lex order.
///
/// Recursive necklace generation with pruning on inadmissible prefixes.
pub fn lyndon_words(system: &SymbolicSystem, n: usize) -> Vec<Vec<u8>> {
    let mut a = vec![0u8; n + 1];
    let mut out = Vec::new();
    fn gen(system: &SymbolicSystem, n: usize, t: usize, p: usize, a: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if t > n {
            if p == n && system.admits(a[n], a[1]) {
                out.push(a[1..].to_vec());
            }
            return;
        }
        let base = a[t - p];
        for j in base..system.alphabet_size as u8 {
            if t > 1 && !system.admits(a[t - 1], j) {
                continue;
            }
            a[t] = j;
            gen(system, n, t + 1, if j == base { p } else { t }, a, out);
        }
    }
    if n >= 1 {
        gen(system, n, 1, 1, &mut a, &mut out);
    }
    out
}

/// Result of a pairwise (T, scale)-separation check.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub separated: bool,
    pub pairs_checked: usize,
    /// First violating pair (indices into the window) and its Bowen distance.
    pub first_violation: Option<(usize, usize, f64)>,
}

/// Uniformly regular cycles with period in (T−δ, T].
#[derive(Debug, Clone)]
pub struct CensusWindow {
    pub t: f64,
    pub delta: f64,
    pub eta: f64,
    pub cycles: Vec<Cycle>,
    pub separation: SeparationReport,
}

impl CensusWindow {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

pub fn in_window(period: f64, t: f64, delta: f64) -> bool {
    period > t - delta && period <= t + 1e-12 * t.abs().max(1.0)
}

/// Filters a cycle list to Per_R^η(T−δ, T] and selects base points.
pub fn census_window(
    cycles: &[Cycle],
    roof: &RoofFunction,
    lambda: &RegularityFunction,
    t: f64,
    delta: f64,
    eta: f64,
    scale: f64,
) -> Result<CensusWindow> {
    let delta_prime = lambda.delta_prime(eta);
    if !(delta > 0.0) || delta >= delta_prime {
        return Err(LabError::DeltaTooLarge { delta, delta_prime });
    }
    let mut members: Vec<Cycle> = cycles
        .iter()
        .filter(|c| in_window(c.flow_period, t, delta) && c.lambda_avg >= eta)
        .cloned()
        .collect();
    for c in &mut members {
        c.select_base_point(lambda, eta);
    }
    let separation = verify_separated(&members, roof, t, scale);
    Ok(CensusWindow { t, delta, eta, cycles: members, separation })
}

/// Pairwise check that d_T(v(γ), v(γ')) ≥ scale, i.e. neither base point lies
/// in the open Bowen ball of the other.
pub fn verify_separated(cycles: &[Cycle], roof: &RoofFunction, t: f64, scale: f64) -> SeparationReport {
    let points: Vec<FlowPoint> = cycles.iter().map(|c| c.base_point()).collect();
    let n = points.len();
    let firsts: Vec<Option<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            for j in i + 1..n {
                let d = bowen_distance_until(&points[i], &points[j], roof, t, scale);
                if d < scale {
                    return Some((i, j, d));
                }
            }
            None
        })
        .collect();
    let first_violation = firsts.into_iter().flatten().next();
    SeparationReport { separated: first_violation.is_none(), pairs_checked: n * n.saturating_sub(1) / 2, first_violation }
}

/// One census line for export.
pub fn census_csv(window: &CensusWindow, all: &[Cycle]) -> String {
    let mut s = String::from("word,symbol_length,flow_period,lambda_avg,selected_base_point\n");
    let selected: std::collections::HashSet<&[u8]> = window.cycles.iter().map(|c| &*c.word).collect();
    for c in all.iter().filter(|c| in_window(c.flow_period, window.t, window.delta)) {
        let base = window.cycles.iter().find(|w| w.word == c.word);
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            c.word_string(),
            c.symbol_length,
            crate::fmt17(c.flow_period),
            crate::fmt17(c.lambda_avg),
            match base {
                Some(b) if selected.contains(&*c.word) => crate::system::word_string(b.base_word()),
                _ => String::new(),
            }
        ));
    }
    s
}

/// Counts versus the e^{Th}/T envelopes of the period-window counting bounds.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub windows: Vec<GrowthRow>,
    pub entropy: f64,
    /// Entropy of the singular subshift; `None` encodes −∞ (empty).
    pub singular_entropy: Option<f64>,
    pub h_prime: f64,
    /// Fitted β: geometric mean of #·T·e^{−Th} over nonempty windows.
    pub beta: f64,
    /// Least grid T whose count meets the (β/2T)e^{Th} floor.
    pub t0: Option<f64>,
    /// Slope of log(T·#) against T over nonempty windows.
    pub fitted_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub count: usize,
    /// log(#)/T.
    pub raw_rate: Option<f64>,
    /// log(T·#)/T, the rate corrected for the 1/T prefactor.
    pub rate: Option<f64>,
    pub lower_envelope: f64,
    pub upper_envelope: f64,
}

pub fn growth_report(system: &SymbolicSystem, lambda: &RegularityFunction, windows: &[(f64, usize)]) -> Result<GrowthReport> {
    if windows.len() < 2 {
        return Err(LabError::Precondition("growth report needs at least 2 windows".into()));
    }
    let h = system.entropy;
    let singular_entropy = lambda.singular_entropy(system)?;
    let h_prime = 0.5 * (singular_entropy.map_or(0.0, |s| s.max(0.0)) + h);
    let logs: Vec<f64> = windows
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|&(t, c)| (c as f64 * t).ln() - t * h)
        .collect();
    let beta = if logs.is_empty() { 0.0 } else { (logs.iter().sum::<f64>() / logs.len() as f64).exp() };
    let rows: Vec<GrowthRow> = windows
        .iter()
        .map(|&(t, c)| GrowthRow {
            t,
            count: c,
            raw_rate: (c > 0).then(|| (c as f64).ln() / t),
            rate: (c > 0).then(|| (c as f64 * t).ln() / t),
            lower_envelope: beta / t * (t * h).exp(),
            upper_envelope: if beta > 0.0 { (t * h).exp() / beta } else { f64::INFINITY },
        })
        .collect();
    let t0 = windows.iter().find(|&&(t, c)| c as f64 >= beta / (2.0 * t) * (t * h).exp() && c > 0).map(|w| w.0);
    let pts: Vec<(f64, f64)> = windows.iter().filter(|w| w.1 > 0).map(|&(t, c)| (t, (c as f64 * t).ln())).collect();
    let fitted_rate = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(GrowthReport { windows: rows, entropy: h, singular_entropy, h_prime, beta, t0, fitted_rate })
}
