//! Dense real polynomials in ascending coefficient order.

/// Root tolerance used by every threshold-set computation.
pub const ROOT_TOL: f64 = 1e-12;

pub fn eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

pub fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    if c.is_empty() {
        c.push(0.0);
    }
    c
}

pub fn degree(c: &[f64]) -> usize {
    let mut d = c.len().saturating_sub(1);
    while d > 0 && c[d] == 0.0 {
        d -= 1;
    }
    d
}

pub fn antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    for (i, &a) in c.iter().enumerate() {
        out.push(a / (i as f64 + 1.0));
    }
    out
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(i, &a)| a * i as f64).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

pub fn add_assign(a: &mut Vec<f64>, b: &[f64], scale: f64) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (x, &y) in a.iter_mut().zip(b) {
        *x += scale * y;
    }
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of s ↦ p(alpha + beta·s).
pub fn compose_affine(c: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    // Horner in polynomial arithmetic: acc = acc·(alpha + beta s) + c_i.
    let mut acc = vec![0.0; c.len()];
    for &a in c.iter().rev() {
        let mut next = vec![0.0; c.len()];
        for (k, &v) in acc.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            next[k] += v * alpha;
            if k + 1 < next.len() {
                next[k + 1] += v * beta;
            }
        }
        next[0] += a;
        acc = next;
    }
    acc
}

/// ∫_lo^hi p.
pub fn integrate(c: &[f64], lo: f64, hi: f64) -> f64 {
    let a = antiderivative(c);
    eval(&a, hi) - eval(&a, lo)
}

/// Real roots of p in [lo, hi], sorted, located to `ROOT_TOL`.
///
/// Critical points are found recursively from the derivative, so every
/// monotone stretch is bracketed and bisected.
pub fn roots_in(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let d = degree(c);
    if d == 0 {
        return Vec::new();
    }
    if d == 1 {
        let r = -c[0] / c[1];
        return if r >= lo && r <= hi { vec![r] } else { Vec::new() };
    }
    let mut knots = vec![lo];
    knots.extend(roots_in(&derivative(&c[..=d]), lo, hi).into_iter().filter(|&x| x > lo && x < hi));
    knots.push(hi);
    let mut out: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (eval(c, a), eval(c, b));
        let push = |out: &mut Vec<f64>, r: f64| {
            if out.last().map_or(true, |&p| (r - p).abs() > ROOT_TOL) {
                out.push(r);
            }
        };
        if fa == 0.0 {
            push(&mut out, a);
        }
        if fa * fb < 0.0 {
            push(&mut out, bisect(c, a, b, fa));
        }
        if fb == 0.0 {
            push(&mut out, b);
        }
    }
    out
}

fn bisect(c: &[f64], mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= ROOT_TOL * (1.0 + m.abs()) {
            return m;
        }
        let fm = eval(c, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// (min, max) of p over [lo, hi].
pub fn range_on(c: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut lo_v = eval(c, lo).min(eval(c, hi));
    let mut hi_v = eval(c, lo).max(eval(c, hi));
    if degree(c) >= 2 {
        for r in roots_in(&derivative(c), lo, hi) {
            let v = eval(c, r);
            lo_v = lo_v.min(v);
            hi_v = hi_v.max(v);
        }
    }
    (lo_v, hi_v)
}

pub fn sup_abs_on(c: &[f64], lo: f64, hi: f64) -> f64 {
    let (a, b) = range_on(c, lo, hi);
    a.abs().max(b.abs())
}
