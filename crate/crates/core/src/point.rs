//! Points of the suspension flow and exact flow-time computations.

use std::sync::Arc;

use crate::poly;
use crate::system::{word_string, Observable, RoofFunction, SymbolicSystem};

/// A word repeated `reps` times.
#[derive(Debug, Clone)]
pub struct Run {
    pub word: Arc<[u8]>,
    pub reps: usize,
}

/// Run-length encoded finite symbol block.
#[derive(Debug, Clone, Default)]
pub struct Block {
    runs: Vec<Run>,
    starts: Vec<usize>,
    len: usize,
}

impl Block {
    pub fn from_runs(runs: Vec<Run>) -> Self {
        let mut starts = Vec::with_capacity(runs.len());
        let mut len = 0;
        let runs: Vec<Run> = runs.into_iter().filter(|r| r.reps > 0 && !r.word.is_empty()).collect();
        for r in &runs {
            starts.push(len);
            len += r.word.len() * r.reps;
        }
        Self { runs, starts, len }
    }

    pub fn from_word(w: &[u8]) -> Self {
        Self::from_runs(vec![Run { word: Arc::from(w), reps: 1 }])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        let r = match self.starts.binary_search(&i) {
            Ok(r) => r,
            Err(r) => r - 1,
        };
        let run = &self.runs[r];
        run.word[(i - self.starts[r]) % run.word.len()]
    }

    pub fn to_vec(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len);
        for r in &self.runs {
            for _ in 0..r.reps {
                out.extend_from_slice(&r.word);
            }
        }
        out
    }
}

/// Bi-infinite eventually periodic sequence with a fiber height.
///
/// Absolute index j reads `center[j]` for 0 ≤ j < |center|, the right block
/// periodically for larger j, and the left block periodically for j < 0 with
/// its last symbol at −1. `pos` is the absolute index of the symbol under the
/// point.
#[derive(Debug, Clone)]
pub struct FlowPoint {
    pub left: Block,
    pub center: Block,
    pub right: Block,
    pub pos: i64,
    pub height: f64,
}

impl FlowPoint {
    pub fn new(left: Block, center: Block, right: Block, pos: i64, height: f64) -> Self {
        assert!(!left.is_empty() && !right.is_empty(), "periodic blocks must be nonempty");
        Self { left, center, right, pos, height }
    }

    /// The periodic orbit of `block` at its first symbol.
    pub fn periodic(block: Block, height: f64) -> Self {
        Self { left: block.clone(), center: Block::default(), right: block, pos: 0, height }
    }

    pub fn periodic_word(w: &[u8], height: f64) -> Self {
        Self::periodic(Block::from_word(w), height)
    }

    pub fn is_purely_periodic(&self) -> bool {
        self.center.is_empty() && self.left.to_vec() == self.right.to_vec()
    }

    #[inline]
    pub fn abs_symbol(&self, j: i64) -> u8 {
        let c = self.center.len() as i64;
        if j >= 0 && j < c {
            self.center.get(j as usize)
        } else if j >= c {
            self.right.get(((j - c) as usize) % self.right.len())
        } else {
            self.left.get(j.rem_euclid(self.left.len() as i64) as usize)
        }
    }

    /// Symbol at offset n from the current position.
    #[inline]
    pub fn symbol(&self, n: i64) -> u8 {
        self.abs_symbol(self.pos + n)
    }

    pub fn seq(&self) -> impl Fn(i64) -> u8 + '_ {
        move |j| self.abs_symbol(j)
    }

    pub fn is_admissible(&self, system: &SymbolicSystem) -> bool {
        let c = self.center.len() as i64;
        let span = self.left.len() as i64 + self.right.len() as i64 + 2;
        (-span..c + span).all(|j| system.admits(self.abs_symbol(j), self.abs_symbol(j + 1)))
    }

    pub fn roof_here(&self, roof: &RoofFunction) -> f64 {
        roof.at(self.seq(), self.pos)
    }

    /// Right-periodic region starts once every context symbol is in the right block.
    fn in_right_region(&self) -> bool {
        self.pos >= self.center.len() as i64
    }

    fn in_left_region(&self, depth: usize) -> bool {
        self.pos + depth as i64 - 1 < 0
    }

    fn right_period(&self, roof: &RoofFunction, f: Option<&Observable>) -> (i64, f64, f64) {
        let n = self.right.len() as i64;
        let seq = self.seq();
        let mut time = 0.0;
        let mut int = 0.0;
        for j in self.pos..self.pos + n {
            let r = roof.at(&seq, j);
            time += r;
            if let Some(f) = f {
                int += r * fiber_mean(f.profile_at(&seq, j));
            }
        }
        (n, time, int)
    }

    fn left_period(&self, roof: &RoofFunction) -> (i64, f64) {
        let n = self.left.len() as i64;
        let seq = self.seq();
        let time = (self.pos - n..self.pos).map(|j| roof.at(&seq, j)).sum();
        (n, time)
    }
}

fn fiber_mean(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, &a)| a / (i as f64 + 1.0)).sum()
}

/// g_t(x). Negative t flows backward.
pub fn flow(x: &FlowPoint, roof: &RoofFunction, t: f64) -> FlowPoint {
    let mut y = x.clone();
    if t == 0.0 {
        return y;
    }
    let mut rem = x.height + t;
    if t > 0.0 {
        loop {
            if y.in_right_region() {
                let (n, ptime, _) = y.right_period(roof, None);
                if rem > 2.0 * ptime {
                    let skip = (rem / ptime).floor() as i64 - 1;
                    rem -= skip as f64 * ptime;
                    y.pos += skip * n;
                }
            }
            let r = y.roof_here(roof);
            if rem < r {
                break;
            }
            rem -= r;
            y.pos += 1;
        }
    } else {
        while rem < 0.0 {
            if y.in_left_region(roof.depth()) {
                let (n, ptime) = y.left_period(roof);
                if -rem > 2.0 * ptime {
                    let skip = (-rem / ptime).floor() as i64 - 1;
                    rem += skip as f64 * ptime;
                    y.pos -= skip * n;
                }
            }
            y.pos -= 1;
            rem += y.roof_here(roof);
        }
    }
    y.height = rem;
    y
}

/// ∫₀^τ f(g_u x) du for τ ≥ 0.
fn forward_integral(x: &FlowPoint, roof: &RoofFunction, f: &Observable, tau: f64) -> f64 {
    let mut y = x.clone();
    let mut acc = 0.0;
    let mut h = x.height;
    let mut rem = tau;
    loop {
        if h == 0.0 && y.in_right_region() {
            let (n, ptime, pint) = y.right_period(roof, Some(f));
            if rem > 2.0 * ptime {
                let skip = (rem / ptime).floor() as i64 - 1;
                rem -= skip as f64 * ptime;
                acc += skip as f64 * pint;
                y.pos += skip * n;
            }
        }
        let (r, anti) = {
            let seq = y.seq();
            (roof.at(&seq, y.pos), poly::antiderivative(f.profile_at(&seq, y.pos)))
        };
        let avail = r - h;
        if rem <= avail {
            acc += r * (poly::eval(&anti, (h + rem) / r) - poly::eval(&anti, h / r));
            break;
        }
        acc += r * (poly::eval(&anti, 1.0) - poly::eval(&anti, h / r));
        rem -= avail;
        y.pos += 1;
        h = 0.0;
    }
    acc
}

/// F(x,[s,t]) = ∫_s^t f(g_τ x) dτ, exact fiber by fiber.
pub fn birkhoff_integral(x: &FlowPoint, roof: &RoofFunction, f: &Observable, s: f64, t: f64) -> f64 {
    assert!(s <= t, "birkhoff_integral needs s <= t");
    if s == t {
        return 0.0;
    }
    let start = flow(x, roof, s);
    forward_integral(&start, roof, f, t - s)
}

/// max(2^{−n*}, |height difference|) where n* is the least |n| of disagreement.
pub fn symbolic_distance(x: &FlowPoint, y: &FlowPoint) -> f64 {
    symbolic_distance_resolved(x, y, u32::MAX)
}

/// As `symbolic_distance`, but scans at most `max_n` symbols each way. When
/// no mismatch turns up the result is the upper bound 2^−(max_n+1).
pub fn symbolic_distance_resolved(x: &FlowPoint, y: &FlowPoint, max_n: u32) -> f64 {
    let dh = (x.height - y.height).abs();
    let bound = (x.pos.abs() + x.center.len() as i64).max(y.pos.abs() + y.center.len() as i64)
        + (x.left.len() + x.right.len() + y.left.len() + y.right.len()) as i64
        + 2;
    let mut sym = 0.0;
    for n in 0..=bound {
        if n > max_n as i64 {
            sym = 0.5f64.powi(max_n as i32 + 1);
            break;
        }
        if x.symbol(n) != y.symbol(n) || x.symbol(-n) != y.symbol(-n) {
            sym = 0.5f64.powi(n as i32);
            break;
        }
    }
    sym.max(dh)
}

/// sup over s ∈ [0,t] of the symbolic distance between g_s x and g_s y.
///
/// Between fiber crossings both heights grow at unit speed and the symbol
/// sequences are frozen, so the distance is piecewise constant and the sup is a
/// max over the crossing epochs.
pub fn bowen_distance(x: &FlowPoint, y: &FlowPoint, roof: &RoofFunction, t: f64) -> f64 {
    bowen_distance_until(x, y, roof, t, f64::INFINITY)
}

/// As `bowen_distance`, stopping early once the running sup reaches `stop_at`.
pub fn bowen_distance_until(x: &FlowPoint, y: &FlowPoint, roof: &RoofFunction, t: f64, stop_at: f64) -> f64 {
    bowen_distance_resolved(x, y, roof, t, stop_at, u32::MAX)
}

/// Bowen distance with `symbolic_distance_resolved` at every epoch, so values
/// below 2^−(max_n+1) are reported as that bound.
pub fn bowen_distance_resolved(x: &FlowPoint, y: &FlowPoint, roof: &RoofFunction, t: f64, stop_at: f64, max_n: u32) -> f64 {
    assert!(t >= 0.0);
    let mut a = x.clone();
    let mut b = y.clone();
    let mut best = symbolic_distance_resolved(&a, &b, max_n);
    let mut elapsed = 0.0;
    while best < stop_at {
        let ra = a.roof_here(roof);
        let rb = b.roof_here(roof);
        let da = ra - a.height;
        let db = rb - b.height;
        let step = da.min(db);
        if elapsed + step > t {
            break;
        }
        elapsed += step;
        let tol = 1e-12 * (1.0 + ra.max(rb));
        if (da - step).abs() <= tol {
            a.pos += 1;
            a.height = 0.0;
        } else {
            a.height += step;
        }
        if (db - step).abs() <= tol {
            b.pos += 1;
            b.height = 0.0;
        } else {
            b.height += step;
        }
        best = best.max(symbolic_distance_resolved(&a, &b, max_n));
    }
    best
}

/// Short human-readable rendering for reports.
pub fn describe(x: &FlowPoint) -> String {
    let clip = |b: &Block| {
        let s = word_string(&b.to_vec());
        if s.len() > 64 {
            format!("{}…({} symbols)", &s[..64], s.len())
        } else {
            s
        }
    };
    format!("({})^∞ [{}] ({})^∞ @ {} + {}", clip(&x.left), clip(&x.center), clip(&x.right), x.pos, x.height)
}
