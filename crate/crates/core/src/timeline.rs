//! Compiled cumulative integrals G(τ) = ∫₀^τ f(g_s y) ds along periodic points,
//! and the window functionals t ↦ G(t+b) − G(t+a) built from them.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::gluing::GluedPoint;
use crate::piecewise::{sweep_sum, PiecewisePoly};
use crate::poly;
use crate::system::{Observable, RoofFunction};

/// Per-position roof, profile antiderivative, and prefix sums for a run of symbols.
#[derive(Debug)]
pub struct FiberData {
    roof: Vec<f64>,
    anti: Vec<Vec<f64>>,
    time_prefix: Vec<f64>,
    int_prefix: Vec<f64>,
}

impl FiberData {
    /// Positions `start..start+n` of `seq`, each with its own forward context.
    pub fn from_seq(seq: impl Fn(i64) -> u8, start: i64, n: usize, roof: &RoofFunction, f: &Observable) -> Self {
        let mut out = Self {
            roof: Vec::with_capacity(n),
            anti: Vec::with_capacity(n),
            time_prefix: Vec::with_capacity(n + 1),
            int_prefix: Vec::with_capacity(n + 1),
        };
        let (mut t, mut s) = (0.0, 0.0);
        for j in start..start + n as i64 {
            let r = roof.at(&seq, j);
            let a = poly::antiderivative(f.profile_at(&seq, j));
            out.time_prefix.push(t);
            out.int_prefix.push(s);
            t += r;
            s += r * poly::eval(&a, 1.0);
            out.roof.push(r);
            out.anti.push(a);
        }
        out.time_prefix.push(t);
        out.int_prefix.push(s);
        out
    }

    pub fn len(&self) -> usize {
        self.roof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roof.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        *self.time_prefix.last().expect("prefix")
    }

    pub fn total_int(&self) -> f64 {
        *self.int_prefix.last().expect("prefix")
    }
}

#[derive(Debug, Clone)]
struct Segment {
    start_time: f64,
    start_int: f64,
    data: Arc<FiberData>,
    reps: usize,
}

/// G over one period, extended periodically.
#[derive(Debug, Clone)]
pub struct Timeline {
    segments: Vec<Segment>,
    period: f64,
    period_int: f64,
}

#[derive(Debug, Clone, Copy)]
struct Cursor {
    wrap: i64,
    seg: usize,
    rep: usize,
    pos: usize,
}

impl Timeline {
    fn from_parts(parts: Vec<(Arc<FiberData>, usize)>) -> Self {
        let mut segments = Vec::with_capacity(parts.len());
        let (mut t, mut s) = (0.0, 0.0);
        for (data, reps) in parts {
            if reps == 0 || data.is_empty() {
                continue;
            }
            let seg = Segment { start_time: t, start_int: s, data, reps };
            t += reps as f64 * seg.data.total_time();
            s += reps as f64 * seg.data.total_int();
            segments.push(seg);
        }
        assert!(!segments.is_empty(), "timeline needs at least one fiber");
        Self { segments, period: t, period_int: s }
    }

    /// The periodic orbit of a cyclic word.
    pub fn for_cycle(word: &[u8], roof: &RoofFunction, f: &Observable) -> Self {
        let n = word.len();
        let data = FiberData::from_seq(|j| word[j.rem_euclid(n as i64) as usize], 0, n, roof, f);
        Self::from_parts(vec![(Arc::new(data), 1)])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn period_integral(&self) -> f64 {
        self.period_int
    }

    fn locate(&self, tau: f64) -> Cursor {
        let mut wrap = (tau / self.period).floor() as i64;
        let mut r = tau - wrap as f64 * self.period;
        if r >= self.period {
            wrap += 1;
            r -= self.period;
        }
        let r = r.max(0.0);
        let seg = self.segments.partition_point(|s| s.start_time <= r).max(1) - 1;
        let s = &self.segments[seg];
        let local = r - s.start_time;
        let lt = s.data.total_time();
        let rep = ((local / lt).floor() as usize).min(s.reps - 1);
        let inner = local - rep as f64 * lt;
        let n = s.data.len();
        let pos = s.data.time_prefix[..n].partition_point(|&p| p <= inner).max(1) - 1;
        Cursor { wrap, seg, rep, pos }
    }

    fn advance(&self, c: &mut Cursor) {
        c.pos += 1;
        let s = &self.segments[c.seg];
        if c.pos == s.data.len() {
            c.pos = 0;
            c.rep += 1;
            if c.rep == s.reps {
                c.rep = 0;
                c.seg += 1;
                if c.seg == self.segments.len() {
                    c.seg = 0;
                    c.wrap += 1;
                }
            }
        }
    }

    /// (fiber start time, roof, antiderivative, G at fiber start).
    fn fiber(&self, c: &Cursor) -> (f64, f64, &[f64], f64) {
        let s = &self.segments[c.seg];
        let d = &s.data;
        let start = c.wrap as f64 * self.period + s.start_time + c.rep as f64 * d.total_time() + d.time_prefix[c.pos];
        let int = c.wrap as f64 * self.period_int + s.start_int + c.rep as f64 * d.total_int() + d.int_prefix[c.pos];
        (start, d.roof[c.pos], &d.anti[c.pos], int)
    }

    /// G(τ) = ∫₀^τ f(g_s y) ds (negative τ allowed; G is periodic-additive).
    pub fn cumulative(&self, tau: f64) -> f64 {
        let c = self.locate(tau);
        let (start, r, anti, int) = self.fiber(&c);
        int + r * poly::eval(anti, ((tau - start) / r).clamp(0.0, 1.0))
    }

    /// F(y, [s, u]).
    pub fn integral(&self, s: f64, u: f64) -> f64 {
        self.cumulative(u) - self.cumulative(s)
    }

    /// t ↦ G(t + e) on [0, len].
    pub fn shifted_cumulative(&self, e: f64, len: f64) -> PiecewisePoly {
        let mut c = self.locate(e);
        let mut breaks = vec![0.0];
        let mut polys = Vec::new();
        loop {
            let (start, r, anti, int) = self.fiber(&c);
            let mut p = poly::compose_affine(anti, (e - start) / r, 1.0 / r);
            for x in &mut p {
                *x *= r;
            }
            p[0] += int;
            let end = start + r - e;
            if end >= len {
                polys.push(p);
                breaks.push(len);
                break;
            }
            if end > *breaks.last().expect("nonempty") {
                polys.push(p);
                breaks.push(end);
            }
            self.advance(&mut c);
        }
        PiecewisePoly { breaks, polys }
    }

    /// t ↦ F(g_t y, [a, b]) = G(t + b) − G(t + a) on [0, len].
    pub fn window_functional(&self, a: f64, b: f64, len: f64) -> PiecewisePoly {
        self.shifted_cumulative(b, len).sub(&self.shifted_cumulative(a, len))
    }
}

/// Σ of window functionals on the common domain [0, len].
pub fn sum_functionals<'p>(parts: impl IntoIterator<Item = &'p PiecewisePoly>, len: f64) -> PiecewisePoly {
    weighted_sum(parts.into_iter().map(|h| (h, 1.0)), len)
}

/// Σ w·H on [0, len] by one event sweep.
pub fn weighted_sum<'p>(parts: impl IntoIterator<Item = (&'p PiecewisePoly, f64)>, len: f64) -> PiecewisePoly {
    let mut start = vec![0.0];
    let mut events = Vec::new();
    for (h, w) in parts {
        poly::add_assign(&mut start, &h.polys[0], w);
        for i in 1..h.polys.len() {
            let mut d = poly::sub(&h.polys[i], &h.polys[i - 1]);
            d.iter_mut().for_each(|x| *x *= w);
            events.push((h.breaks[i], d));
        }
    }
    sweep_sum(0.0, len, start, events)
}

/// Builds timelines for glued points, sharing per-cycle loop data.
pub struct TimelineBuilder<'a> {
    roof: &'a RoofFunction,
    f: &'a Observable,
    loops: RwLock<HashMap<Arc<[u8]>, Arc<FiberData>>>,
}

impl<'a> TimelineBuilder<'a> {
    pub fn new(roof: &'a RoofFunction, f: &'a Observable) -> Self {
        Self { roof, f, loops: RwLock::new(HashMap::new()) }
    }

    fn loop_data(&self, word: &Arc<[u8]>) -> Arc<FiberData> {
        if let Some(d) = self.loops.read().expect("loop cache").get(word) {
            return d.clone();
        }
        let n = word.len();
        let w = word.clone();
        let data = Arc::new(FiberData::from_seq(|j| w[j.rem_euclid(n as i64) as usize], 0, n, self.roof, self.f));
        self.loops.write().expect("loop cache").entry(word.clone()).or_insert(data).clone()
    }

    /// Loops whose forward context stays inside x^C reuse the cyclic loop data;
    /// the remaining loops and the bridge are compiled with their true context.
    pub fn build(&self, g: &GluedPoint) -> Timeline {
        let depth = self.roof.depth().max(self.f.depth);
        let z = &g.realized;
        let seq = z.seq();
        let mut parts = Vec::with_capacity(2 * g.k());
        for (p, (entry, comp)) in g.block_schedule.iter().zip(&g.components).enumerate() {
            let n = comp.word.len();
            let exact = g.loops.saturating_sub((depth - 1).div_ceil(n));
            parts.push((self.loop_data(&comp.word), exact));
            let from = entry.start_symbol + exact * n;
            let to = g.block_schedule.get(p + 1).map_or(z.right.len(), |e| e.start_symbol);
            let data = FiberData::from_seq(&seq, from as i64, to - from, self.roof, self.f);
            parts.push((Arc::new(data), 1));
        }
        Timeline::from_parts(parts)
    }
}
