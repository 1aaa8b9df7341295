//! Sampled checks: the Hölder audit of an observable and a lower bound on
//! the variation ω(f, T, δ₀, C(3η/4))/T.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::measures::stream_rng;
use crate::point::{birkhoff_integral, bowen_distance, Block, FlowPoint};
use crate::regularity::RegularityFunction;
use crate::system::{Observable, RoofFunction, SymbolicSystem};

fn step_forward(system: &SymbolicSystem, from: u8, rng: &mut ChaCha8Rng) -> u8 {
    let next: Vec<u8> = (0..system.alphabet_size as u8).filter(|&b| system.admits(from, b)).collect();
    next[rng.gen_range(0..next.len())]
}

fn step_backward(system: &SymbolicSystem, to: u8, rng: &mut ChaCha8Rng) -> u8 {
    let prev: Vec<u8> = (0..system.alphabet_size as u8).filter(|&a| system.admits(a, to)).collect();
    prev[rng.gen_range(0..prev.len())]
}

/// A uniform-step random admissible walk of length n.
pub fn random_walk(system: &SymbolicSystem, n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut w = Vec::with_capacity(n);
    if n == 0 {
        return w;
    }
    w.push(rng.gen_range(0..system.alphabet_size as u8));
    while w.len() < n {
        let s = step_forward(system, *w.last().expect("nonempty"), rng);
        w.push(s);
    }
    w
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderAudit {
    pub pairs: usize,
    pub violations: usize,
    /// max |f(x) − f(y)|/d(x,y)^α over the sample, an empirical Hölder constant.
    pub worst_constant: f64,
    pub declared_constant: f64,
    pub passed: bool,
}

/// Pairs of points on a two-sided window of radius `radius`; y copies x up to a
/// random cut and is resampled past it (both sides), with a fresh height.
pub fn holder_audit(system: &SymbolicSystem, roof: &RoofFunction, f: &Observable, pairs: usize, radius: usize, seed: u64) -> HolderAudit {
    let radius = radius.max(f.depth + 1);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for i in 0..pairs {
        let mut rng = stream_rng(seed, 11, i as u64);
        let x = random_walk(system, 2 * radius + 1, &mut rng);
        let cut = rng.gen_range(1..=radius);
        let mut y = x.clone();
        for j in radius + cut..y.len() {
            y[j] = step_forward(system, y[j - 1], &mut rng);
        }
        for j in (0..=radius - cut).rev() {
            y[j] = step_backward(system, y[j + 1], &mut rng);
        }
        let sx = |n: i64| x[(n + radius as i64) as usize];
        let sy = |n: i64| y[(n + radius as i64) as usize];
        let (rx, ry) = (roof.at(sx, 0), roof.at(sy, 0));
        let ux: f64 = rng.gen();
        let uy = if rng.gen_bool(0.5) { ux } else { rng.gen() };
        let (hx, hy) = (ux * rx, uy * ry);
        let n_star = (0..=radius).find(|&n| x[radius + n] != y[radius + n] || x[radius - n] != y[radius - n]);
        let sym = n_star.map_or(0.0, |n| 0.5f64.powi(n as i32));
        let d = sym.max((hx - hy).abs());
        let df = (f.value_at(sx, 0, ux) - f.value_at(sy, 0, uy)).abs();
        if d > 0.0 {
            let c = df / d.powf(f.holder_alpha);
            worst = worst.max(c);
            if c > f.holder_l * (1.0 + 1e-12) + 1e-15 {
                violations += 1;
            }
        } else if df > 0.0 {
            violations += 1;
            worst = f64::INFINITY;
        }
    }
    HolderAudit { pairs, violations, worst_constant: worst, declared_constant: f.holder_l, passed: violations == 0 }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationEstimate {
    /// Sampled lower bound on ω(f, T, δ₀, C(3η/4))/T.
    pub lower_bound: f64,
    pub pairs_tried: usize,
    pub pairs_accepted: usize,
    pub no_data: bool,
}

/// Lower bound on sup |F(u,T) − F(v,T)|/T over u with (u,T) ∈ C(3η/4) and
/// v in the Bowen ball B_T(u, δ₀). Candidates v resample u's symbols beyond a
/// margin around the orbit segment and are accepted only when the exact
/// Bowen distance is below δ₀.
#[allow(clippy::too_many_arguments)]
pub fn variation_estimate(
    system: &SymbolicSystem,
    roof: &RoofFunction,
    lambda: &RegularityFunction,
    f: &Observable,
    eta: f64,
    t: f64,
    delta0: f64,
    sample_pairs: usize,
    seed: u64,
) -> VariationEstimate {
    let mut out = VariationEstimate { lower_bound: 0.0, pairs_tried: 0, pairs_accepted: 0, no_data: true };
    if sample_pairs == 0 || !(t > 0.0) || !(delta0 > 0.0) {
        return out;
    }
    let mut margin = 0usize;
    while 0.5f64.powi(margin as i32) >= delta0 {
        margin += 1;
    }
    let depth = roof.depth().max(f.depth).max(lambda.depth());
    let span = (t / roof.r_min).ceil() as usize + 1;
    let back = margin + 4;
    let n = back + span + depth + margin + 4;
    for i in 0..sample_pairs {
        out.pairs_tried += 1;
        let mut rng = stream_rng(seed, 12, i as u64);
        let w = random_walk(system, n, &mut rng);
        let mk = |w: &[u8]| {
            let left = Block::from_word(&w[..1]);
            let right = Block::from_word(&w[w.len() - 1..]);
            FlowPoint::new(left, Block::from_word(w), right, back as i64, 0.0)
        };
        let mut u = mk(&w);
        u.height = rng.gen::<f64>() * u.roof_here(roof);
        if !lambda.in_c_eta(&u, roof, t, 0.75 * eta) {
            continue;
        }
        let extra = rng.gen_range(0..=3usize);
        let lo = back.saturating_sub(margin + extra);
        let hi = (back + span + margin + extra).min(n - 1);
        let mut v = w.clone();
        for j in hi + 1..n {
            v[j] = step_forward(system, v[j - 1], &mut rng);
        }
        for j in (0..lo).rev() {
            v[j] = step_backward(system, v[j + 1], &mut rng);
        }
        let mut vp = mk(&v);
        vp.height = u.height;
        if bowen_distance(&u, &vp, roof, t) >= delta0 {
            continue;
        }
        out.pairs_accepted += 1;
        let du = birkhoff_integral(&u, roof, f, 0.0, t) - birkhoff_integral(&vp, roof, f, 0.0, t);
        out.lower_bound = out.lower_bound.max(du.abs() / t);
    }
    out.no_data = out.pairs_accepted == 0;
    out
}
