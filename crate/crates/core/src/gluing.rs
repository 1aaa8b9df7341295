//! Transition words, the cyclic gluing map, and tracking checks.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::census::Cycle;
use crate::error::{LabError, Result};
use crate::point::{bowen_distance_resolved, Block, FlowPoint, Run};
use crate::system::{word_string, RoofFunction, SymbolicSystem};

/// Cap on DFS nodes visited by one bridge search.
pub const BRIDGE_NODE_BUDGET: usize = 2_000_000;
const MAX_BRIDGE_LEN: usize = 64;

/// A bridge and the time it actually spends against its target.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionWord {
    #[serde(serialize_with = "ser_word")]
    pub word: Vec<u8>,
    pub time: f64,
    /// time − target.
    pub residual: f64,
}

fn ser_word<S: serde::Serializer>(w: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&word_string(w))
}

/// Least feasible transition time implied by the mixing time.
pub fn minimal_transition_time(system: &SymbolicSystem, roof: &RoofFunction) -> f64 {
    (system.mixing_time.saturating_sub(1)) as f64 * roof.r_min
}

fn residual_tol(target: f64) -> f64 {
    1e-9 * target.abs().max(1.0)
}

/// Candidate order: exact matches first (then lexicographic), otherwise the
/// smaller |residual| with ties broken lexicographically.
fn better(res_a: f64, wa: &[u8], res_b: f64, wb: &[u8], tol: f64) -> bool {
    let (ea, eb) = (res_a.abs() <= tol, res_b.abs() <= tol);
    match (ea, eb) {
        (true, true) => wa < wb,
        (true, false) => true,
        (false, true) => false,
        _ if (res_a.abs() - res_b.abs()).abs() > tol => res_a.abs() < res_b.abs(),
        _ => wa < wb,
    }
}

struct BridgeSearch<'a> {
    system: &'a SymbolicSystem,
    roof: &'a RoofFunction,
    from_last: Option<u8>,
    tail: &'a [u8],
    ctx: &'a [u8],
    target: f64,
    tol: f64,
    max_len: usize,
    nodes: usize,
    best: Option<(f64, Vec<u8>, f64)>,
}

impl BridgeSearch<'_> {
    /// Time over tail ++ w positions, with ctx supplying the forward context.
    fn time(&self, w: &[u8]) -> f64 {
        let s: Vec<u8> = self.tail.iter().chain(w).chain(self.ctx).copied().collect();
        let n = self.tail.len() + w.len();
        (0..n as i64).map(|i| self.roof.at(|j| s[j as usize], i)).sum()
    }

    /// Time of positions whose context lies entirely inside tail ++ w.
    fn determined_time(&self, w: &[u8]) -> f64 {
        let d = self.roof.depth();
        let s: Vec<u8> = self.tail.iter().chain(w).copied().collect();
        if s.len() < d {
            return 0.0;
        }
        (0..=(s.len() - d) as i64).map(|i| self.roof.at(|j| s[j as usize], i)).sum()
    }

    fn consider(&mut self, w: &[u8]) {
        let first = *self.ctx.first().expect("context");
        let last = w.last().copied().or(self.tail.last().copied()).or(self.from_last);
        if let Some(l) = last {
            if !self.system.admits(l, first) {
                return;
            }
        }
        let time = self.time(w);
        let res = time - self.target;
        let replace = match &self.best {
            None => true,
            Some((br, bw, _)) => better(res, w, *br, bw, self.tol),
        };
        if replace {
            self.best = Some((res, w.to_vec(), time));
        }
    }

    fn dfs(&mut self, w: &mut Vec<u8>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > BRIDGE_NODE_BUDGET {
            return Err(LabError::BudgetExceeded(format!("bridge search exceeded {BRIDGE_NODE_BUDGET} nodes")));
        }
        self.consider(w);
        if w.len() >= self.max_len {
            return Ok(());
        }
        if let Some((br, _, _)) = &self.best {
            if self.determined_time(w) > self.target + br.abs() + self.tol {
                return Ok(());
            }
        }
        let prev = w.last().copied().or(self.tail.last().copied()).or(self.from_last);
        for s in 0..self.system.alphabet_size as u8 {
            if prev.map_or(true, |p| self.system.admits(p, s)) {
                w.push(s);
                self.dfs(w)?;
                w.pop();
            }
        }
        Ok(())
    }
}

/// Bridge w after `tail` (already placed) ahead of the periodic context `ctx`,
/// whose time over tail ++ w is as close to `target` as possible.
pub fn search_bridge(
    system: &SymbolicSystem,
    roof: &RoofFunction,
    from_last: Option<u8>,
    tail: &[u8],
    ctx: &[u8],
    target: f64,
) -> Result<TransitionWord> {
    let max_len = (((target.max(0.0)) / roof.r_min).ceil() as usize + 1 + roof.depth()).min(MAX_BRIDGE_LEN);
    let mut search = BridgeSearch {
        system,
        roof,
        from_last,
        tail,
        ctx,
        target,
        tol: residual_tol(target),
        max_len,
        nodes: 0,
        best: None,
    };
    search.dfs(&mut Vec::new())?;
    match search.best {
        Some((res, word, time)) => Ok(TransitionWord { word, time, residual: res }),
        None => Err(LabError::NoTransition { target, minimal: minimal_transition_time(system, roof) }),
    }
}

fn periodic_context(word: &[u8], len: usize) -> Vec<u8> {
    (0..len.max(1)).map(|i| word[i % word.len()]).collect()
}

/// An admissible word from the end of `from` to the start of `to` whose roof
/// sum is `target`, or the closest such word.
pub fn find_transition_word(
    system: &SymbolicSystem,
    roof: &RoofFunction,
    from: &[u8],
    to: &[u8],
    target: f64,
) -> Result<TransitionWord> {
    let minimal = minimal_transition_time(system, roof);
    if target < minimal - residual_tol(target) {
        return Err(LabError::NoTransition { target, minimal });
    }
    let ctx = periodic_context(to, roof.depth() - 1);
    search_bridge(system, roof, from.last().copied(), &[], &ctx, target)
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockEntry {
    pub p: usize,
    /// (p−1)(C·T + M).
    pub t_nominal: f64,
    /// Start time in the realized sequence.
    pub t_actual: f64,
    pub start_symbol: usize,
    pub loop_symbols: usize,
    /// Least period t(x_p).
    pub loop_period: f64,
}

#[derive(Debug, Clone)]
pub struct GluedComponent {
    /// Index of the cycle in its census window.
    pub index: usize,
    pub word: Arc<[u8]>,
    pub flow_period: f64,
}

/// One realized point of the gluing map, made periodic by cyclic closure.
#[derive(Debug, Clone)]
pub struct GluedPoint {
    pub components: Vec<GluedComponent>,
    pub loops: usize,
    pub t_l: f64,
    pub m: f64,
    pub transitions: Vec<TransitionWord>,
    pub realized: FlowPoint,
    pub block_schedule: Vec<BlockEntry>,
    /// Actual period of the realized orbit.
    pub period: f64,
    /// k(C·T + M).
    pub nominal_period: f64,
}

impl GluedPoint {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.transitions.iter().map(|t| t.residual.abs()).fold(0.0, f64::max)
    }
}

type BridgeKey = (Vec<u8>, Vec<u8>, u64);

/// Gluing with shared, read-mostly bridge cache.
pub struct Gluer<'a> {
    pub system: &'a SymbolicSystem,
    pub roof: &'a RoofFunction,
    pub t_l: f64,
    pub loops: usize,
    pub m: f64,
    cache: RwLock<HashMap<BridgeKey, Arc<TransitionWord>>>,
}

impl<'a> Gluer<'a> {
    pub fn new(system: &'a SymbolicSystem, roof: &'a RoofFunction, t_l: f64, loops: usize, m: f64) -> Result<Self> {
        if loops == 0 {
            return Err(LabError::Precondition("gluing needs C >= 1".into()));
        }
        let minimal = minimal_transition_time(system, roof);
        if m < minimal - residual_tol(m) {
            return Err(LabError::NoTransition { target: m, minimal });
        }
        Ok(Self { system, roof, t_l, loops, m, cache: RwLock::new(HashMap::new()) })
    }

    /// Cyclic time of the last L positions of x^C and their symbols.
    fn tail_of(&self, x: &[u8]) -> (Vec<u8>, f64) {
        let d = self.roof.depth();
        let n = self.loops * x.len();
        let l = (d - 1).min(n);
        let tail: Vec<u8> = (n - l..n).map(|i| x[i % x.len()]).collect();
        let cyc: f64 = (n - l..n).map(|i| self.roof.at(|j| x[j as usize % x.len()], i as i64)).sum();
        (tail, cyc)
    }

    /// Bridge from x^C into y, with the cyclic time of x^C outside the tail.
    pub fn bridge(&self, x: &Cycle, y: &Cycle) -> Result<(Arc<TransitionWord>, f64)> {
        let (tail, tail_cyc) = self.tail_of(x.base_word());
        let base_time = self.loops as f64 * x.flow_period - tail_cyc;
        let target = self.loops as f64 * self.t_l + self.m - base_time;
        let ctx = periodic_context(y.base_word(), self.roof.depth() - 1);
        let key = (tail.clone(), ctx.clone(), target.to_bits());
        if let Some(hit) = self.cache.read().expect("bridge cache").get(&key) {
            return Ok((hit.clone(), base_time));
        }
        let mut found = search_bridge(self.system, self.roof, x.base_word().last().copied(), &tail, &ctx, target)?;
        // Report the bridge's own symbols; its time is measured with the tail.
        found.residual = found.time - target;
        let found = Arc::new(found);
        self.cache.write().expect("bridge cache").entry(key).or_insert_with(|| found.clone());
        Ok((found, base_time))
    }

    /// π(x̄): the periodic concatenation x₁^C w₁ … x_k^C w_k.
    pub fn glue(&self, cycles: &[&Cycle], indices: &[usize]) -> Result<GluedPoint> {
        if cycles.is_empty() {
            return Err(LabError::Precondition("glue needs at least one component".into()));
        }
        let k = cycles.len();
        let mut runs = Vec::with_capacity(2 * k);
        let mut transitions = Vec::with_capacity(k);
        let mut schedule = Vec::with_capacity(k);
        let mut t_actual = 0.0;
        let mut symbol = 0usize;
        for p in 0..k {
            let x = cycles[p];
            let y = cycles[(p + 1) % k];
            let (bridge, base_time) = self.bridge(x, y)?;
            let loop_symbols = self.loops * x.symbol_length;
            schedule.push(BlockEntry {
                p: p + 1,
                t_nominal: p as f64 * (self.loops as f64 * self.t_l + self.m),
                t_actual,
                start_symbol: symbol,
                loop_symbols,
                loop_period: x.flow_period,
            });
            runs.push(Run { word: x.base_word().clone(), reps: self.loops });
            if !bridge.word.is_empty() {
                runs.push(Run { word: Arc::from(bridge.word.as_slice()), reps: 1 });
            }
            t_actual += base_time + bridge.time;
            symbol += loop_symbols + bridge.word.len();
            transitions.push((*bridge).clone());
        }
        let block = Block::from_runs(runs);
        let realized = FlowPoint::periodic(block, 0.0);
        let components = cycles
            .iter()
            .zip(indices.iter().copied().chain(std::iter::repeat(usize::MAX)))
            .map(|(c, i)| GluedComponent { index: i, word: c.base_word().clone(), flow_period: c.flow_period })
            .collect();
        Ok(GluedPoint {
            components,
            loops: self.loops,
            t_l: self.t_l,
            m: self.m,
            transitions,
            realized,
            block_schedule: schedule,
            period: t_actual,
            nominal_period: k as f64 * (self.loops as f64 * self.t_l + self.m),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingReport {
    pub tracked: bool,
    /// Symbols trimmed at each end of a block: least m with 2^{−m} < ε.
    pub margin_symbols: usize,
    /// Bowen distance over each block interior (NaN when the interior is empty).
    pub distances: Vec<f64>,
    pub worst: f64,
}

/// Symbols scanned per side when measuring tracking; finer agreement is
/// reported as 2^−65.
pub const TRACKING_RESOLUTION: u32 = 64;

/// Checks that g_{t_p} of the realized point shadows x_p over its block interior.
pub fn verify_tracking(g: &GluedPoint, roof: &RoofFunction, eps: f64) -> TrackingReport {
    if !(eps > 0.0) {
        return TrackingReport { tracked: false, margin_symbols: 0, distances: vec![], worst: f64::INFINITY };
    }
    let mut m = 0usize;
    while 0.5f64.powi(m as i32) >= eps {
        m += 1;
    }
    let mut distances = Vec::with_capacity(g.k());
    for (entry, comp) in g.block_schedule.iter().zip(&g.components) {
        let n = entry.loop_symbols;
        if n <= 2 * m {
            distances.push(f64::NAN);
            continue;
        }
        let mut z = g.realized.clone();
        z.pos = (entry.start_symbol + m) as i64;
        z.height = 0.0;
        let w = &comp.word;
        let rotated: Vec<u8> = (0..w.len()).map(|i| w[(i + m) % w.len()]).collect();
        let x = FlowPoint::periodic_word(&rotated, 0.0);
        let seq = z.seq();
        let duration: f64 = (z.pos..z.pos + (n - 2 * m) as i64).map(|j| roof.at(&seq, j)).sum();
        distances.push(bowen_distance_resolved(&z, &x, roof, duration, f64::INFINITY, TRACKING_RESOLUTION));
    }
    let worst = distances.iter().copied().filter(|d| !d.is_nan()).fold(0.0, f64::max);
    TrackingReport { tracked: worst < eps, margin_symbols: m, distances, worst }
}

#[derive(Serialize)]
struct GluedDump<'a> {
    components: Vec<String>,
    loops: usize,
    transition_words: &'a [TransitionWord],
    block_schedule: &'a [BlockEntry],
    period: f64,
    nominal_period: f64,
    tracking: Option<&'a TrackingReport>,
}

pub fn glued_point_json(g: &GluedPoint, tracking: Option<&TrackingReport>) -> String {
    let dump = GluedDump {
        components: g.components.iter().map(|c| word_string(&c.word)).collect(),
        loops: g.loops,
        transition_words: &g.transitions,
        block_schedule: &g.block_schedule,
        period: g.period,
        nominal_period: g.nominal_period,
        tracking,
    };
    serde_json::to_string_pretty(&dump).expect("glued point serializes")
}
