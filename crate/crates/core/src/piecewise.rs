//! Piecewise polynomials on an interval, in global coordinates.

use crate::poly;

/// `polys[i]` is valid on `[breaks[i], breaks[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    pub breaks: Vec<f64>,
    pub polys: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn constant(lo: f64, hi: f64, c: f64) -> Self {
        Self { breaks: vec![lo, hi], polys: vec![vec![c]] }
    }

    pub fn lo(&self) -> f64 {
        self.breaks[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breaks.last().expect("nonempty")
    }

    pub fn span(&self) -> f64 {
        self.hi() - self.lo()
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &[f64])> + '_ {
        self.polys.iter().enumerate().map(|(i, p)| (self.breaks[i], self.breaks[i + 1], p.as_slice()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= t).clamp(1, self.polys.len()) - 1;
        poly::eval(&self.polys[i], t)
    }

    pub fn is_constant(&self) -> bool {
        self.polys.len() == 1 && poly::degree(&self.polys[0]) == 0
    }

    pub fn integral(&self) -> f64 {
        self.pieces().map(|(a, b, p)| integrate_fast(p, a, b)).sum()
    }

    pub fn mean(&self) -> f64 {
        if self.span() > 0.0 {
            self.integral() / self.span()
        } else {
            poly::eval(&self.polys[0], self.lo())
        }
    }

    /// ∫ (H − m)².
    pub fn sq_dev_integral(&self, m: f64) -> f64 {
        self.pieces()
            .map(|(a, b, p)| {
                let q = shifted(p, m);
                integrate_fast(&poly::mul(&q, &q), a, b)
            })
            .sum()
    }

    /// ∫ (H − m)² 1{|H − m| > c}.
    pub fn lindeberg_integral(&self, m: f64, c: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, p) in self.pieces() {
            let q = shifted(p, m);
            let q2 = poly::mul(&q, &q);
            if poly::degree(&q) == 0 {
                if q[0].abs() > c {
                    acc += q[0] * q[0] * (b - a);
                }
                continue;
            }
            for (s0, s1) in split_where(&q, a, b, c, |v| v.abs() > c) {
                acc += integrate_fast(&q2, s0, s1);
            }
        }
        acc
    }

    /// Lebesgue measure of {t : H(t) ≤ x}.
    pub fn measure_le(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, p) in self.pieces() {
            if poly::degree(p) == 0 {
                if p[0] <= x {
                    acc += b - a;
                }
                continue;
            }
            let q = shifted(p, x);
            for (s0, s1) in split_where(&q, a, b, 0.0, |v| v <= 0.0) {
                acc += s1 - s0;
            }
        }
        acc
    }

    /// sup |H − m| over the interval.
    pub fn sup_abs_dev(&self, m: f64) -> f64 {
        self.pieces().map(|(a, b, p)| poly::sup_abs_on(&shifted(p, m), a, b)).fold(0.0, f64::max)
    }

    /// (min, max) of H.
    pub fn range(&self) -> (f64, f64) {
        self.pieces().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b, p)| {
            let (x, y) = poly::range_on(p, a, b);
            (lo.min(x), hi.max(y))
        })
    }

    /// Pointwise combination on the common refinement of the breakpoints.
    pub fn combine(&self, other: &Self, f: impl Fn(&[f64], &[f64]) -> Vec<f64>) -> Self {
        let mut breaks = vec![self.lo()];
        let mut polys = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.polys.len() && j < other.polys.len() {
            let end = self.breaks[i + 1].min(other.breaks[j + 1]);
            if end > *breaks.last().expect("nonempty") {
                polys.push(f(&self.polys[i], &other.polys[j]));
                breaks.push(end);
            }
            if self.breaks[i + 1] <= end {
                i += 1;
            }
            if other.breaks[j + 1] <= end {
                j += 1;
            }
        }
        if polys.is_empty() {
            polys.push(f(&self.polys[0], &other.polys[0]));
            breaks.push(self.hi());
        }
        Self { breaks, polys }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| poly::sub(a, b))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| poly::add(a, b))
    }

    pub fn add_const(&self, c: f64) -> Self {
        Self { breaks: self.breaks.clone(), polys: self.polys.iter().map(|p| shifted(p, -c)).collect() }
    }

    /// Merge adjacent pieces carrying identical polynomials.
    pub fn simplify(mut self) -> Self {
        let mut breaks = vec![self.breaks[0]];
        let mut polys: Vec<Vec<f64>> = Vec::new();
        for (i, p) in self.polys.drain(..).enumerate() {
            if polys.last().map_or(false, |q| *q == p) {
                *breaks.last_mut().expect("nonempty") = self.breaks[i + 1];
            } else {
                polys.push(p);
                breaks.push(self.breaks[i + 1]);
            }
        }
        Self { breaks, polys }
    }

    /// Monotone stretches (lo, hi, poly), split at interior critical points.
    pub fn monotone_pieces(&self) -> Vec<(f64, f64, Vec<f64>)> {
        let mut out = Vec::new();
        for (a, b, p) in self.pieces() {
            if b <= a {
                continue;
            }
            let mut knots = vec![a];
            if poly::degree(p) >= 2 {
                knots.extend(poly::roots_in(&poly::derivative(p), a, b).into_iter().filter(|&x| x > a && x < b));
            }
            knots.push(b);
            for w in knots.windows(2) {
                out.push((w[0], w[1], p.to_vec()));
            }
        }
        out
    }
}

/// Sum of many piecewise polynomials on [lo, hi] given as start polynomials and
/// jump events (t, Δpoly), by one sorted sweep.
pub fn sweep_sum(lo: f64, hi: f64, start: Vec<f64>, mut events: Vec<(f64, Vec<f64>)>) -> PiecewisePoly {
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut breaks = vec![lo];
    let mut polys = Vec::new();
    let mut cur = start;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        if t > lo && t < hi && t > *breaks.last().expect("nonempty") {
            polys.push(cur.clone());
            breaks.push(t);
        }
        while i < events.len() && events[i].0 == t {
            poly::add_assign(&mut cur, &events[i].1, 1.0);
            i += 1;
        }
    }
    polys.push(cur);
    breaks.push(hi);
    PiecewisePoly { breaks, polys }
}

fn shifted(p: &[f64], m: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[0] -= m;
    q
}

#[inline]
fn integrate_fast(p: &[f64], a: f64, b: f64) -> f64 {
    match p.len() {
        1 => p[0] * (b - a),
        2 => (p[0] + 0.5 * p[1] * (a + b)) * (b - a),
        _ => poly::integrate(p, a, b),
    }
}

/// Subintervals of [a, b] where `keep(q(t))` holds, cutting at the roots of
/// q − c and q + c (c = 0 cuts at the roots of q only).
fn split_where(q: &[f64], a: f64, b: f64, c: f64, keep: impl Fn(f64) -> bool) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    let mut roots = poly::roots_in(&shifted(q, c), a, b);
    if c != 0.0 {
        roots.extend(poly::roots_in(&shifted(q, -c), a, b));
    }
    roots.sort_by(f64::total_cmp);
    cuts.extend(roots.into_iter().filter(|&r| r > a && r < b));
    cuts.push(b);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 <= s0 || !keep(poly::eval(q, 0.5 * (s0 + s1))) {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.1 == s0 => last.1 = s1,
            _ => out.push((s0, s1)),
        }
    }
    out
}
