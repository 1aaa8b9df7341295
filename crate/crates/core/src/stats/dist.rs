//! Weighted distributions with atoms and continuous monotone pieces, exact
//! convolution of atomic laws, and Kolmogorov–Smirnov distances.

use serde::Serialize;

use super::normal_cdf;
use crate::piecewise::PiecewisePoly;
use crate::poly;

/// Continuous part: the push-forward of `density`·dt on [t0, t1] under a
/// monotone polynomial.
#[derive(Debug, Clone)]
pub struct ContinuousPiece {
    pub t0: f64,
    pub t1: f64,
    pub poly: Vec<f64>,
    pub density: f64,
    lo: f64,
    hi: f64,
    increasing: bool,
}

impl ContinuousPiece {
    fn new(t0: f64, t1: f64, poly: Vec<f64>, density: f64) -> Self {
        let (a, b) = (poly::eval(&poly, t0), poly::eval(&poly, t1));
        Self { t0, t1, increasing: b >= a, lo: a.min(b), hi: a.max(b), poly, density }
    }

    fn mass(&self) -> f64 {
        self.density * (self.t1 - self.t0)
    }

    /// Mass of {t : poly(t) ≤ x}.
    fn mass_le(&self, x: f64) -> f64 {
        if x >= self.hi {
            return self.mass();
        }
        if x < self.lo {
            return 0.0;
        }
        let mut q = self.poly.clone();
        q[0] -= x;
        let root = poly::roots_in(&q, self.t0, self.t1).first().copied().unwrap_or(self.t0);
        let len = if self.increasing { root - self.t0 } else { self.t1 - root };
        self.density * len.clamp(0.0, self.t1 - self.t0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Distribution {
    /// Sorted distinct atoms (value, mass).
    pub atoms: Vec<(f64, f64)>,
    pub pieces: Vec<ContinuousPiece>,
}

/// Sort and merge atoms closer than `tol`, keeping the smallest value.
pub fn merge_atoms(mut v: Vec<(f64, f64)>, tol: f64) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if x - last.0 <= tol => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

fn merge_tol(v: &[(f64, f64)]) -> f64 {
    let scale = v.iter().map(|a| a.0.abs()).fold(0.0, f64::max).max(1.0);
    1e-9 * scale
}

impl Distribution {
    pub fn from_atoms(values: &[f64], weights: &[f64]) -> Self {
        let v: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        let tol = merge_tol(&v);
        Self { atoms: merge_atoms(v, tol), pieces: Vec::new() }
    }

    /// Adds `weight`·(uniform t on the domain) pushed forward by h.
    pub fn add_functional(&mut self, h: &PiecewisePoly, weight: f64) {
        let density = weight / h.span();
        if h.is_constant() {
            self.atoms.push((h.polys[0][0], weight));
            return;
        }
        for (t0, t1, p) in h.monotone_pieces() {
            if poly::degree(&p) == 0 {
                self.atoms.push((p[0], density * (t1 - t0)));
            } else {
                self.pieces.push(ContinuousPiece::new(t0, t1, p, density));
            }
        }
    }

    /// Merge duplicate atoms after incremental construction.
    pub fn finish(mut self) -> Self {
        let tol = merge_tol(&self.atoms);
        self.atoms = merge_atoms(std::mem::take(&mut self.atoms), tol);
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.pieces.iter().map(ContinuousPiece::mass).sum::<f64>()
    }

    pub fn is_atomic(&self) -> bool {
        self.pieces.is_empty()
    }

    /// x ↦ (x − shift)/scale.
    pub fn normalized(&self, shift: f64, scale: f64) -> Self {
        let atoms = self.atoms.iter().map(|&(x, w)| ((x - shift) / scale, w)).collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let mut q: Vec<f64> = p.poly.iter().map(|c| c / scale).collect();
                q[0] -= shift / scale;
                ContinuousPiece::new(p.t0, p.t1, q, p.density)
            })
            .collect();
        Self { atoms, pieces }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= x);
        self.atoms[..k].iter().map(|a| a.1).sum::<f64>() + self.pieces.iter().map(|p| p.mass_le(x)).sum::<f64>()
    }

    /// Points where the sup of |CDF − N| can sit, besides the atom jumps.
    fn probe_points(&self, grid: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect();
        let (lo, hi) = self
            .atoms
            .iter()
            .map(|a| a.0)
            .chain(pts.iter().copied())
            .fold((-6.0f64, 6.0f64), |(a, b), x| (a.min(x), b.max(x)));
        for i in 0..=grid {
            pts.push(lo + (hi - lo) * i as f64 / grid as f64);
        }
        pts
    }

    /// sup_x |CDF(x) − N(x)|: exact over atom jumps (both one-sided limits);
    /// continuous parts are probed at their endpoints and on a grid.
    pub fn ks_normal(&self) -> f64 {
        let mut best: f64 = 0.0;
        if self.pieces.is_empty() {
            let mut acc = 0.0;
            for &(x, w) in &self.atoms {
                let n = normal_cdf(x);
                best = best.max((acc - n).abs());
                acc += w;
                best = best.max((acc - n).abs());
            }
            return best;
        }
        for &(x, w) in &self.atoms {
            let n = normal_cdf(x);
            let right = self.cdf(x);
            best = best.max((right - n).abs()).max((right - w - n).abs());
        }
        for x in self.probe_points(2000) {
            best = best.max((self.cdf(x) - normal_cdf(x)).abs());
        }
        best
    }

    /// k-fold convolution of an atomic law, `None` once the support passes `cap`.
    pub fn convolve_power(&self, k: usize, cap: usize) -> Option<Self> {
        assert!(self.is_atomic(), "convolution needs an atomic law");
        let base = &self.atoms;
        let mut cur = vec![(0.0, 1.0)];
        for _ in 0..k {
            let mut next = Vec::with_capacity(cur.len() * base.len());
            for &(x, w) in &cur {
                for &(y, v) in base {
                    next.push((x + y, w * v));
                }
            }
            let tol = merge_tol(&next);
            cur = merge_atoms(next, tol);
            if cur.len() > cap {
                return None;
            }
        }
        Some(Self { atoms: cur, pieces: Vec::new() })
    }

    pub fn mean(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(x, w)| x * w).sum();
        let c: f64 = self.pieces.iter().map(|p| p.density * poly::integrate(&p.poly, p.t0, p.t1)).sum();
        a + c
    }

    /// CDF samples for plotting: (x, CDF, N(x)).
    pub fn curve(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let mut xs = self.probe_points(points);
        xs.extend(self.atoms.iter().map(|a| a.0));
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter().map(|x| (x, self.cdf(x), normal_cdf(x))).collect()
    }
}

/// KS of one normalized law, with its normalizer.
#[derive(Debug, Clone, Serialize)]
pub struct KsRecord {
    pub normalizer: String,
    pub scale: f64,
    pub ks: f64,
}
