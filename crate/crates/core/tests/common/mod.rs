//! Independent brute-force reference for unit-roof instances.
//!
//! Everything here works from definitions: cycles by exhaustive word search,
//! glued orbits by literal concatenation, and time integrals of fiber-constant
//! observables as exact sums over unit intervals. Functions of the window
//! offset τ ∈ [0, T] are then piecewise linear with integer breaks, and every
//! moment is integrated in closed form on each linear piece.

#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::Value;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("workspace root")
}

pub fn config(name: &str) -> PathBuf {
    workspace_root().join("configs").join(name)
}

/// Minimal rotation.
pub fn min_rotation(w: &[u8]) -> Vec<u8> {
    (0..w.len()).map(|i| [&w[i..], &w[..i]].concat()).min().expect("nonempty")
}

pub fn primitive(w: &[u8]) -> bool {
    (1..w.len()).all(|d| w.len() % d != 0 || (0..w.len()).any(|i| w[i] != w[(i + d) % w.len()]))
}

/// Brute-force cycle census on the full shift over `alpha` symbols with unit
/// roof: primitive necklaces of length n whose λ-average is at least η, each
/// at the least rotation starting with a regular symbol.
pub fn cycles_full_shift(alpha: u8, n: usize, lambda: &[f64], eta: f64) -> Vec<Vec<u8>> {
    let mut words = Vec::new();
    let total = (alpha as usize).pow(n as u32);
    for code in 0..total {
        let mut w = vec![0u8; n];
        let mut c = code;
        for i in (0..n).rev() {
            w[i] = (c % alpha as usize) as u8;
            c /= alpha as usize;
        }
        if primitive(&w) && min_rotation(&w) == w {
            words.push(w);
        }
    }
    words
        .into_iter()
        .filter(|w| w.iter().map(|&s| lambda[s as usize]).sum::<f64>() / n as f64 >= eta)
        .map(|w| {
            (0..n)
                .map(|i| [&w[i..], &w[..i]].concat())
                .filter(|r| lambda[r[0] as usize] >= eta)
                .min()
                .expect("a regular rotation")
        })
        .collect()
}

/// A fiber-constant observable given by its value on words of length `depth`
/// read forward from the current symbol.
pub struct Obs {
    pub depth: usize,
    pub value: Box<dyn Fn(&[u8]) -> f64>,
}

impl Obs {
    pub fn symbol_indicator(s: u8) -> Self {
        Obs { depth: 1, value: Box::new(move |w| if w[0] == s { 1.0 } else { 0.0 }) }
    }

    pub fn word_indicator(word: &'static [u8]) -> Self {
        Obs { depth: word.len(), value: Box::new(move |w| if w == word { 1.0 } else { 0.0 }) }
    }

    /// Value on fiber j of the periodic sequence.
    pub fn at(&self, seq: &[u8], j: i64) -> f64 {
        let n = seq.len() as i64;
        let w: Vec<u8> = (0..self.depth as i64).map(|i| seq[(j + i).rem_euclid(n) as usize]).collect();
        (self.value)(&w)
    }
}

/// ∫_a^b g(g_s z) ds along the periodic unit-roof orbit of `seq` started at
/// fiber 0, height 0.
pub fn integral(seq: &[u8], g: &Obs, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let (lo, hi) = (a.floor() as i64, b.ceil() as i64);
    for j in lo..hi {
        let overlap = (b.min((j + 1) as f64) - a.max(j as f64)).max(0.0);
        if overlap > 0.0 {
            total += overlap * g.at(seq, j);
        }
    }
    total
}

/// Piecewise-linear function on [0, T] through its values at 0, 1, …, T.
#[derive(Clone, Debug)]
pub struct Pl(pub Vec<f64>);

impl Pl {
    pub fn of(t: usize, f: impl Fn(f64) -> f64) -> Self {
        Pl((0..=t).map(|i| f(i as f64)).collect())
    }

    fn len(&self) -> f64 {
        (self.0.len() - 1) as f64
    }

    fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn mean(&self) -> f64 {
        self.pieces().map(|(a, b)| 0.5 * (a + b)).sum::<f64>() / self.len()
    }

    /// (1/T)∫ (h − m)².
    pub fn sq_dev(&self, m: f64) -> f64 {
        self.pieces()
            .map(|(a, b)| {
                let (a, b) = (a - m, b - m);
                (a * a + a * b + b * b) / 3.0
            })
            .sum::<f64>()
            / self.len()
    }

    /// (1/T)∫ (h − m)² 1{|h − m| > c}.
    pub fn lindeberg(&self, m: f64, c: f64) -> f64 {
        let mut total = 0.0;
        for (a, b) in self.pieces() {
            let (y0, y1) = (a - m, b - m);
            let beta = y1 - y0;
            if beta == 0.0 {
                if y0.abs() > c {
                    total += y0 * y0;
                }
                continue;
            }
            // y(u) = y0 + βu on [0, 1]; ∫ y² du over [u0, u1] = (y(u1)³ − y(u0)³)/(3β).
            let cube = |u0: f64, u1: f64| ((y0 + beta * u1).powi(3) - (y0 + beta * u0).powi(3)) / (3.0 * beta);
            let cross = |level: f64| ((level - y0) / beta).clamp(0.0, 1.0);
            let (ua, ub) = (cross(c), cross(-c));
            // {y > c} and {y < −c} are the parts of [0, 1] beyond each crossing.
            let above = if beta > 0.0 { (ua, 1.0) } else { (0.0, ua) };
            let below = if beta > 0.0 { (0.0, ub) } else { (ub, 1.0) };
            total += cube(above.0, above.1) - cube(below.1, below.0);
        }
        total / self.len()
    }

    /// (1/T)|{τ : h(τ) ≤ x}|.
    pub fn measure_le(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for (a, b) in self.pieces() {
            if a == b {
                if a <= x {
                    total += 1.0;
                }
                continue;
            }
            let u = ((x - a) / (b - a)).clamp(0.0, 1.0);
            total += if b > a { u } else { 1.0 - u };
        }
        total / self.len()
    }
}

/// The full reference for one unit-roof level with k components.
pub struct LevelOracle {
    pub cycles: Vec<Vec<u8>>,
    pub sigma_sq: f64,
    pub cycle_values: Vec<f64>,
    pub s_sq: f64,
    pub s_prime_sq: f64,
    pub s_doubleprime_sq: f64,
    pub m_p: Vec<f64>,
    pub mean_z: f64,
    /// Per atom: (weight, H_p for each p, Z).
    pub atoms: Vec<(f64, Vec<Pl>, Pl)>,
    pub tests: Vec<f64>,
    pub main: f64,
}

pub struct UnitLevel {
    pub t: usize,
    pub k: usize,
    pub c: usize,
    pub q: usize,
    pub m: usize,
}

/// Builds every glued atom literally: x₁^C w x₂^C w … with w the least word of
/// flow time M, which on the full shift is 0^M.
pub fn level_oracle(cycles: Vec<Vec<u8>>, lv: &UnitLevel, f: &Obs, tests: &[Obs]) -> LevelOracle {
    let n = cycles.len();
    let t = lv.t as f64;
    let cycle_values: Vec<f64> = cycles.iter().map(|w| integral(w, f, 0.0, t)).collect();
    let cm = cycle_values.iter().sum::<f64>() / n as f64;
    let sigma_sq = cycle_values.iter().map(|v| (v - cm).powi(2)).sum::<f64>() / n as f64;

    let mut atoms = Vec::new();
    let mut tests_acc = vec![0.0; tests.len()];
    let mut main = 0.0;
    let total = n.pow(lv.k as u32);
    let w = 1.0 / total as f64;
    let block = (lv.c * lv.t + lv.m) as f64;
    let s_len = lv.k as f64 * block;
    for code in 0..total {
        let mut idx = vec![0usize; lv.k];
        let mut c = code;
        for i in (0..lv.k).rev() {
            idx[i] = c % n;
            c /= n;
        }
        let mut seq = Vec::new();
        for &i in &idx {
            for _ in 0..lv.c {
                seq.extend_from_slice(&cycles[i]);
            }
            seq.extend(std::iter::repeat(0u8).take(lv.m));
        }
        let qt = (lv.q * lv.t) as f64;
        let h: Vec<Pl> = (0..lv.k)
            .map(|p| {
                let tp = p as f64 * block;
                Pl::of(lv.t, |tau| integral(&seq, f, tp + tau, tp + qt + tau))
            })
            .collect();
        let z = Pl::of(lv.t, |tau| integral(&seq, f, tau, s_len + tau));
        for (acc, g) in tests_acc.iter_mut().zip(tests) {
            *acc += w * integral(&seq, g, 0.0, t) / t;
        }
        main += w * integral(&seq, f, 0.0, t) / t;
        atoms.push((w, h, z));
    }
    let m_p: Vec<f64> = (0..lv.k).map(|p| atoms.iter().map(|(w, h, _)| w * h[p].mean()).sum()).collect();
    let s_sq: f64 = (0..lv.k).map(|p| atoms.iter().map(|(w, h, _)| w * h[p].sq_dev(m_p[p])).sum::<f64>()).sum();
    let sums: Vec<Pl> = atoms
        .iter()
        .map(|(_, h, _)| Pl((0..=lv.t).map(|i| h.iter().map(|x| x.0[i]).sum()).collect()))
        .collect();
    let m_sum: f64 = atoms.iter().zip(&sums).map(|((w, _, _), s)| w * s.mean()).sum();
    let s_prime_sq: f64 = atoms.iter().zip(&sums).map(|((w, _, _), s)| w * s.sq_dev(m_sum)).sum();
    let mean_z: f64 = atoms.iter().map(|(w, _, z)| w * z.mean()).sum();
    let s_doubleprime_sq: f64 = atoms.iter().map(|(w, _, z)| w * z.sq_dev(mean_z)).sum();
    LevelOracle {
        cycles,
        sigma_sq,
        cycle_values,
        s_sq,
        s_prime_sq,
        s_doubleprime_sq,
        m_p,
        mean_z,
        atoms,
        tests: tests_acc,
        main,
    }
}

impl LevelOracle {
    /// Σ_p E(H_p − m_p)² 1{|H_p − m_p| > γ s} / s².
    pub fn lindeberg_nu(&self, gamma: f64) -> f64 {
        let s = self.s_sq.sqrt();
        let num: f64 = self
            .atoms
            .iter()
            .map(|(w, h, _)| w * h.iter().zip(&self.m_p).map(|(h, m)| h.lindeberg(*m, gamma * s)).sum::<f64>())
            .sum();
        num / self.s_sq
    }

    /// Σ w (v − m)² 1{|v − m| > γ√k σ} / σ² over single cycles.
    pub fn lindeberg_m(&self, gamma: f64, k: usize) -> f64 {
        let n = self.cycle_values.len() as f64;
        let m = self.cycle_values.iter().sum::<f64>() / n;
        let c = gamma * (k as f64).sqrt() * self.sigma_sq.sqrt();
        self.cycle_values.iter().filter(|v| (*v - m).abs() > c).map(|v| (v - m).powi(2) / n).sum::<f64>() / self.sigma_sq
    }

    /// P((Z − E Z)/s'' ≤ a).
    pub fn cdf(&self, a: f64) -> f64 {
        let x = self.mean_z + a * self.s_doubleprime_sq.sqrt();
        self.atoms.iter().map(|(w, _, z)| w * z.measure_le(x)).sum()
    }
}

/// Φ by an independent series: Φ(x) = 1/2 + φ(x) Σ x^{2n+1}/(2n+1)!!.
pub fn normal_cdf_series(x: f64) -> f64 {
    if x.abs() > 8.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) {
        term *= x * x / (2.0 * n + 1.0);
        sum += term;
        n += 1.0;
    }
    0.5 + sum * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// KS distance to N(0,1) of the normalized law of Z, valid when every Z is
/// constant in τ (cyclic closure over the full period makes it so).
pub fn ks_atomic(o: &LevelOracle) -> f64 {
    let s = o.s_doubleprime_sq.sqrt();
    let mut atoms: Vec<(f64, f64)> = o
        .atoms
        .iter()
        .map(|(w, _, z)| {
            assert!(z.0.iter().all(|v| (v - z.0[0]).abs() < 1e-12), "Z must be constant in τ");
            ((z.0[0] - o.mean_z) / s, *w)
        })
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below = 0.0;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0;
        let mut mass = 0.0;
        while i < atoms.len() && (atoms[i].0 - x).abs() < 1e-12 {
            mass += atoms[i].1;
            i += 1;
        }
        let phi = normal_cdf_series(x);
        worst = worst.max((below - phi).abs()).max((below + mass - phi).abs());
        below += mass;
    }
    worst
}

/// Every mismatch between engine statistics and the oracle, as messages.
pub fn mismatches(stats: &lindeberg_lab::stats::engine::LevelStats, o: &LevelOracle, k: usize, tol: f64) -> Vec<String> {
    let mut bad: Vec<String> = Vec::new();
    let cmp = |bad: &mut Vec<String>, what: &str, got: f64, want: f64| {
        if !close(got, want, tol) {
            bad.push(format!("{what}: engine {got:e}, oracle {want:e}"));
        }
    };
    cmp(&mut bad, "sigma_l^2", stats.variance.sigma_l_sq, o.sigma_sq);
    cmp(&mut bad, "mu sigma^2", stats.mu.sigma_sq, o.sigma_sq);
    cmp(&mut bad, "s^2", stats.variance.s_l_sq.value, o.s_sq);
    cmp(&mut bad, "s'^2", stats.variance.s_prime_sq.value, o.s_prime_sq);
    cmp(&mut bad, "s''^2", stats.variance.s_doubleprime_sq.value, o.s_doubleprime_sq);
    cmp(&mut bad, "mean Z", stats.clt.mean_s, o.mean_z);
    cmp(&mut bad, "main integral", stats.main_integral.value, o.main);
    for (est, want) in stats.test_integrals.iter().zip(&o.tests) {
        cmp(&mut bad, &format!("nu({})", est.name), est.estimate.value, *want);
    }
    if stats.test_integrals.len() != o.tests.len() {
        bad.push("test integral count differs".into());
    }
    if o.s_sq > 0.0 {
        for g in &stats.clt.lindeberg_nu {
            match g.ratio.value() {
                Some(v) => cmp(&mut bad, &format!("lindeberg nu gamma={}", g.gamma), v, o.lindeberg_nu(g.gamma)),
                None => bad.push(format!("lindeberg nu gamma={} flagged", g.gamma)),
            }
        }
    } else if stats.clt.lindeberg_nu.iter().any(|g| g.ratio.value().is_some()) {
        bad.push("lindeberg nu should be flagged at zero variance".into());
    }
    if o.sigma_sq > 0.0 {
        for g in &stats.mu.lindeberg {
            match g.ratio.value() {
                Some(v) => cmp(&mut bad, &format!("lindeberg m gamma={}", g.gamma), v, o.lindeberg_m(g.gamma, k)),
                None => bad.push(format!("lindeberg m gamma={} flagged", g.gamma)),
            }
        }
    }
    if o.s_doubleprime_sq > 0.0 {
        if stats.cdf_curve.is_empty() {
            bad.push("no CDF curve".into());
        }
        for &(a, cdf, normal) in &stats.cdf_curve {
            cmp(&mut bad, &format!("CDF at {a}"), cdf, o.cdf(a));
            cmp(&mut bad, &format!("N(0,1) at {a}"), normal, normal_cdf_series(a));
        }
        match stats.clt.ks.iter().find(|r| r.normalizer == "s_doubleprime") {
            Some(r) => cmp(&mut bad, "KS s''", r.ks, ks_atomic(o)),
            None => bad.push("no KS under s''".into()),
        }
    } else if !stats.cdf_curve.is_empty() {
        bad.push("CDF curve at zero variance".into());
    }
    bad
}

/// Walks two JSON trees; numbers must agree to `tol` (relative above 1),
/// everything else exactly. Keys listed in `free` are not compared.
pub fn json_diff(a: &Value, b: &Value, path: &str, tol: f64, free: &[&str], out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if !((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))) {
                out.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, v) in x {
                if free.contains(&k.as_str()) {
                    continue;
                }
                match y.get(k) {
                    Some(w) => json_diff(v, w, &format!("{path}.{k}"), tol, free, out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
            if x.len() != y.len() {
                out.push(format!("{path}: key sets differ"));
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(format!("{path}: lengths {} vs {}", x.len(), y.len()));
            }
            for (i, (v, w)) in x.iter().zip(y).enumerate() {
                json_diff(v, w, &format!("{path}[{i}]"), tol, free, out);
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} vs {b}")),
    }
}
