//! Mixing shifts of finite type and cylinder-depth tables over them.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linalg;
use crate::poly;

/// Symbols are written one character each: `0-9` then `a-z`.
pub const SYMBOL_CHARS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

pub fn symbol_char(s: u8) -> char {
    SYMBOL_CHARS[s as usize] as char
}

pub fn word_string(w: &[u8]) -> String {
    w.iter().map(|&s| symbol_char(s)).collect()
}

pub fn parse_word(s: &str, alphabet: usize) -> Result<Vec<u8>> {
    s.bytes()
        .map(|b| {
            SYMBOL_CHARS
                .iter()
                .position(|&c| c == b)
                .filter(|&p| p < alphabet)
                .map(|p| p as u8)
                .ok_or_else(|| LabError::Parse(format!("bad symbol {:?} in word {s:?}", b as char)))
        })
        .collect()
}

/// The model phase space: a mixing vertex shift on `alphabet_size` symbols.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolicSystem {
    pub alphabet_size: usize,
    pub transitions: Vec<Vec<bool>>,
    /// Least M₀ ≥ 1 with every entry of the M₀-th power positive.
    pub mixing_time: usize,
    /// log of the spectral radius of the adjacency matrix.
    pub entropy: f64,
}

impl SymbolicSystem {
    pub fn new(alphabet_size: usize, transitions: Vec<Vec<bool>>) -> Result<Self> {
        validate_system(alphabet_size, transitions)
    }

    pub fn full_shift(a: usize) -> Self {
        validate_system(a, vec![vec![true; a]; a]).expect("full shift is mixing")
    }

    pub fn golden_mean() -> Self {
        validate_system(2, vec![vec![true, true], vec![true, false]]).expect("golden mean is mixing")
    }

    #[inline]
    pub fn admits(&self, a: u8, b: u8) -> bool {
        self.transitions[a as usize][b as usize]
    }

    pub fn is_admissible(&self, w: &[u8]) -> bool {
        w.iter().all(|&s| (s as usize) < self.alphabet_size) && w.windows(2).all(|p| self.admits(p[0], p[1]))
    }

    /// Cyclic admissibility: also the wrap-around edge.
    pub fn is_cyclic_admissible(&self, w: &[u8]) -> bool {
        !w.is_empty() && self.is_admissible(w) && self.admits(w[w.len() - 1], w[0])
    }

    /// All admissible words of length `d`, in lexicographic order.
    pub fn admissible_words(&self, d: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(d);
        self.extend_words(d, &mut cur, &mut out);
        out
    }

    fn extend_words(&self, d: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for s in 0..self.alphabet_size as u8 {
            if cur.last().map_or(true, |&l| self.admits(l, s)) {
                cur.push(s);
                self.extend_words(d, cur, out);
                cur.pop();
            }
        }
    }

    pub fn code(&self, w: &[u8]) -> usize {
        w.iter().fold(0usize, |acc, &s| acc * self.alphabet_size + s as usize)
    }

    pub fn adjacency_f64(&self) -> Vec<Vec<f64>> {
        self.transitions
            .iter()
            .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Shortest admissible path length (number of intermediate symbols) from a to b.
    pub fn gap(&self, a: u8, b: u8) -> Option<usize> {
        if self.admits(a, b) {
            return Some(0);
        }
        let n = self.alphabet_size;
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..n {
            if self.admits(a, s as u8) {
                dist[s] = 1;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            if self.admits(s as u8, b) {
                return Some(dist[s]);
            }
            for t in 0..n {
                if self.admits(s as u8, t as u8) && dist[t] == usize::MAX {
                    dist[t] = dist[s] + 1;
                    queue.push_back(t);
                }
            }
        }
        None
    }
}

/// Builds a system, computing its mixing time and entropy.
pub fn validate_system(alphabet_size: usize, transitions: Vec<Vec<bool>>) -> Result<SymbolicSystem> {
    if alphabet_size < 2 {
        return Err(LabError::AlphabetTooSmall(alphabet_size));
    }
    if alphabet_size > SYMBOL_CHARS.len() {
        return Err(LabError::Precondition(format!("alphabet size {alphabet_size} above {}", SYMBOL_CHARS.len())));
    }
    if transitions.len() != alphabet_size || transitions.iter().any(|r| r.len() != alphabet_size) {
        return Err(LabError::BadShape(alphabet_size));
    }
    for i in 0..alphabet_size {
        let row = transitions[i].iter().any(|&b| b);
        let col = transitions.iter().any(|r| r[i]);
        if !row || !col {
            return Err(LabError::EmptyRow(i));
        }
    }
    let mixing_time = mixing_time(&transitions).ok_or_else(|| {
        let comps = linalg::scc(&transitions);
        if comps.len() > 1 {
            LabError::NonMixing(format!("reducible: {} strongly connected components", comps.len()))
        } else {
            LabError::NonMixing("periodic".into())
        }
    })?;
    let adj: Vec<Vec<f64>> = transitions
        .iter()
        .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect();
    let rho = linalg::perron(&adj)?.rho;
    Ok(SymbolicSystem { alphabet_size, transitions, mixing_time, entropy: rho.ln() })
}

/// Least m with all entries of the m-th boolean power positive, searched up to
/// Wielandt's bound (n−1)² + 1.
fn mixing_time(a: &[Vec<bool>]) -> Option<usize> {
    let n = a.len();
    let bound = (n - 1) * (n - 1) + 1;
    let mut p = a.to_vec();
    for m in 1..=bound {
        if p.iter().all(|r| r.iter().all(|&b| b)) {
            return Some(m);
        }
        let next: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|k| p[i][k] && a[k][j])).collect())
            .collect();
        p = next;
    }
    None
}

/// A real value for every admissible word of a fixed depth.
#[derive(Debug, Clone)]
pub struct CylinderTable {
    pub name: String,
    pub depth: usize,
    alphabet: usize,
    values: Vec<f64>,
}

impl CylinderTable {
    /// `lookup` supplies values by word; `default` fills admissible words it misses.
    pub fn build(
        name: &str,
        system: &SymbolicSystem,
        depth: usize,
        entries: &[(Vec<u8>, f64)],
        default: Option<f64>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(LabError::InvalidValue { table: name.into(), reason: "depth must be at least 1".into() });
        }
        let size = system.alphabet_size.pow(depth as u32);
        let mut values = vec![f64::NAN; size];
        for (w, v) in entries {
            if w.len() != depth {
                return Err(LabError::InvalidValue {
                    table: name.into(),
                    reason: format!("word {:?} has length {} but depth is {depth}", word_string(w), w.len()),
                });
            }
            if !system.is_admissible(w) {
                return Err(LabError::Inadmissible { word: word_string(w) });
            }
            values[system.code(w)] = *v;
        }
        for w in system.admissible_words(depth) {
            let c = system.code(&w);
            if values[c].is_nan() {
                values[c] = default.ok_or_else(|| LabError::MissingWord { table: name.into(), word: word_string(&w) })?;
            }
        }
        Ok(Self { name: name.into(), depth, alphabet: system.alphabet_size, values })
    }

    pub fn constant(name: &str, system: &SymbolicSystem, value: f64) -> Self {
        Self::build(name, system, 1, &[], Some(value)).expect("constant table")
    }

    /// Depth-1 table from per-symbol values.
    pub fn per_symbol(name: &str, system: &SymbolicSystem, values: &[f64]) -> Result<Self> {
        let entries: Vec<(Vec<u8>, f64)> = values.iter().enumerate().map(|(s, &v)| (vec![s as u8], v)).collect();
        Self::build(name, system, 1, &entries, None)
    }

    /// Value at the word starting at position `n` of a sequence.
    #[inline]
    pub fn at(&self, seq: impl Fn(i64) -> u8, n: i64) -> f64 {
        let mut c = 0usize;
        for i in 0..self.depth as i64 {
            c = c * self.alphabet + seq(n + i) as usize;
        }
        self.values[c]
    }

    /// Value on a word of length ≥ depth (its first `depth` symbols).
    pub fn on_word(&self, w: &[u8]) -> f64 {
        let c = w[..self.depth].iter().fold(0usize, |acc, &s| acc * self.alphabet + s as usize);
        self.values[c]
    }

    pub fn admissible_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| !v.is_nan())
    }

    pub fn min(&self) -> f64 {
        self.admissible_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.admissible_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.min() == self.max()
    }
}

/// Positive roof over the base shift; flow time spent above each d-word.
#[derive(Debug, Clone)]
pub struct RoofFunction {
    pub table: CylinderTable,
    pub r_min: f64,
    pub r_max: f64,
}

impl RoofFunction {
    pub fn new(table: CylinderTable) -> Result<Self> {
        let (r_min, r_max) = (table.min(), table.max());
        if !(r_min > 0.0) || !r_max.is_finite() {
            return Err(LabError::InvalidValue { table: table.name.clone(), reason: "roof values must be positive and finite".into() });
        }
        Ok(Self { table, r_min, r_max })
    }

    pub fn constant(system: &SymbolicSystem, value: f64) -> Result<Self> {
        Self::new(CylinderTable::build("roof", system, 1, &[], Some(value))?)
    }

    pub fn depth(&self) -> usize {
        self.table.depth
    }

    #[inline]
    pub fn at(&self, seq: impl Fn(i64) -> u8, n: i64) -> f64 {
        self.table.at(seq, n)
    }
}

/// Cylinder observable with polynomial profile in normalized fiber height u = h/r.
#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub depth: usize,
    alphabet: usize,
    profiles: Vec<Option<Vec<f64>>>,
    pub holder_l: f64,
    pub holder_alpha: f64,
}

impl Observable {
    pub fn build(
        name: &str,
        system: &SymbolicSystem,
        depth: usize,
        entries: &[(Vec<u8>, Vec<f64>)],
        default: Option<Vec<f64>>,
        holder_l: f64,
        holder_alpha: f64,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(LabError::InvalidValue { table: name.into(), reason: "depth must be at least 1".into() });
        }
        if !(holder_alpha > 0.0 && holder_alpha <= 1.0) || !(holder_l >= 0.0) {
            return Err(LabError::InvalidValue { table: name.into(), reason: "need L >= 0 and alpha in (0,1]".into() });
        }
        let mut profiles = vec![None; system.alphabet_size.pow(depth as u32)];
        for (w, c) in entries {
            if w.len() != depth {
                return Err(LabError::InvalidValue {
                    table: name.into(),
                    reason: format!("word {:?} has length {} but depth is {depth}", word_string(w), w.len()),
                });
            }
            if !system.is_admissible(w) {
                return Err(LabError::Inadmissible { word: word_string(w) });
            }
            if c.is_empty() || c.iter().any(|x| !x.is_finite()) {
                return Err(LabError::InvalidValue { table: name.into(), reason: "coefficients must be finite and nonempty".into() });
            }
            profiles[system.code(w)] = Some(c.clone());
        }
        for w in system.admissible_words(depth) {
            let c = system.code(&w);
            if profiles[c].is_none() {
                profiles[c] = Some(default.clone().ok_or_else(|| LabError::MissingWord { table: name.into(), word: word_string(&w) })?);
            }
        }
        Ok(Self { name: name.into(), depth, alphabet: system.alphabet_size, profiles, holder_l, holder_alpha })
    }

    pub fn constant(name: &str, system: &SymbolicSystem, c: f64) -> Self {
        Self::build(name, system, 1, &[], Some(vec![c]), 0.0, 1.0).expect("constant observable")
    }

    /// Depth-1 observable constant on each fiber.
    pub fn per_symbol(name: &str, system: &SymbolicSystem, values: &[f64], holder_l: f64) -> Result<Self> {
        let entries: Vec<(Vec<u8>, Vec<f64>)> = values.iter().enumerate().map(|(s, &v)| (vec![s as u8], vec![v])).collect();
        Self::build(name, system, 1, &entries, None, holder_l, 1.0)
    }

    /// Indicator of a cylinder word (constant fibers); depth is the word length.
    pub fn cylinder_indicator(name: &str, system: &SymbolicSystem, word: &[u8]) -> Result<Self> {
        let d = word.len();
        Self::build(name, system, d, &[(word.to_vec(), vec![1.0])], Some(vec![0.0]), 2f64.powi(d as i32 - 1), 1.0)
    }

    #[inline]
    pub fn profile_at(&self, seq: impl Fn(i64) -> u8, n: i64) -> &[f64] {
        let mut c = 0usize;
        for i in 0..self.depth as i64 {
            c = c * self.alphabet + seq(n + i) as usize;
        }
        self.profiles[c].as_deref().expect("admissible word")
    }

    pub fn profile_on_word(&self, w: &[u8]) -> &[f64] {
        let c = w[..self.depth].iter().fold(0usize, |acc, &s| acc * self.alphabet + s as usize);
        self.profiles[c].as_deref().expect("admissible word")
    }

    /// ∫₀¹ profile(u) du; multiply by the roof to get the fiber integral.
    pub fn mean_on_word(&self, w: &[u8]) -> f64 {
        self.profile_on_word(w).iter().enumerate().map(|(i, &c)| c / (i as f64 + 1.0)).sum()
    }

    /// Exact sup norm over all fibers.
    pub fn sup_norm(&self) -> f64 {
        self.profiles.iter().flatten().map(|p| poly::sup_abs_on(p, 0.0, 1.0)).fold(0.0, f64::max)
    }

    pub fn max_degree(&self) -> usize {
        self.profiles.iter().flatten().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.profiles.iter().flatten().all(|p| p.iter().all(|&c| c == 0.0))
    }

    pub fn is_fiber_constant(&self) -> bool {
        self.profiles.iter().flatten().all(|p| p.iter().skip(1).all(|&c| c == 0.0))
    }

    /// Value at normalized height u on the word starting at n.
    pub fn value_at(&self, seq: impl Fn(i64) -> u8, n: i64, u: f64) -> f64 {
        poly::eval(self.profile_at(seq, n), u)
    }
}
