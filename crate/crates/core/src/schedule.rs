//! Tuple sequences (T_l, k_l, δ_l, C_l): generation, Q_l, and prefix validation.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Q_l = ⌊(T − δ)C/T⌋ − 1.
pub fn q_l(t: f64, delta: f64, c: u64) -> Result<i64> {
    if !(delta > 0.0 && delta < t) || c == 0 {
        return Err(LabError::Precondition(format!("q_l needs 0 < delta < T and C >= 1 (T={t}, delta={delta}, C={c})")));
    }
    let x = (t - delta) * c as f64 / t;
    let n = x.round();
    // Exact integers survive rounding noise in the quotient.
    let fl = if (x - n).abs() <= 1e-9 * x.abs().max(1.0) { n } else { x.floor() };
    let q = fl as i64 - 1;
    if q < 1 {
        return Err(LabError::NonPositiveQ(q));
    }
    Ok(q)
}

/// k_l = ⌈σ_l²/δ_l⌉.
pub fn auto_k(sigma_sq: f64, delta: f64) -> Result<u64> {
    if !(sigma_sq > 0.0) {
        return Err(LabError::ZeroVariance);
    }
    if !(delta > 0.0) {
        return Err(LabError::Precondition(format!("auto_k needs delta > 0, got {delta}")));
    }
    let x = sigma_sq / delta;
    let n = x.round();
    Ok(if (x - n).abs() <= 1e-12 * x.max(1.0) { n } else { x.ceil() }.max(1.0) as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleEntry {
    pub l: usize,
    pub t: f64,
    pub k: u64,
    pub delta: f64,
    pub c: u64,
    pub q: i64,
    pub m: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// k(C·T + M).
    pub s: f64,
    /// Empirical T₀(δ, η) when a census grid supplied one.
    pub t0: Option<f64>,
}

impl ScheduleEntry {
    #[allow(clippy::too_many_arguments)]
    pub fn new(l: usize, t: f64, k: u64, delta: f64, c: u64, m: f64, epsilon: f64, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(LabError::Precondition(format!("k_{l} must be at least 1")));
        }
        let q = q_l(t, delta, c)?;
        let s = k as f64 * (c as f64 * t + m);
        Ok(Self { l, t, k, delta, c, q, m, epsilon, eta, s, t0: None })
    }
}

/// base + scale·l^power.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct QuantityTemplate {
    #[serde(default)]
    pub base: f64,
    #[serde(default)]
    pub scale: f64,
    #[serde(default)]
    pub power: f64,
}

impl QuantityTemplate {
    pub fn at(&self, l: usize) -> f64 {
        self.base + self.scale * (l as f64).powf(self.power)
    }
}

/// Either explicit per-l values or a template.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Quantity {
    Values(Vec<f64>),
    Template(QuantityTemplate),
}

impl Quantity {
    pub fn at(&self, l: usize) -> Result<f64> {
        match self {
            Quantity::Values(v) => v.get(l - 1).copied().ok_or_else(|| LabError::Config(format!("no value for l = {l}"))),
            Quantity::Template(t) => Ok(t.at(l)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum KRule {
    /// k_l = ⌈σ_l²/δ_l⌉, resolved once σ_l² is known.
    Auto(String),
    Given(Quantity),
}

impl KRule {
    pub fn is_auto(&self) -> bool {
        matches!(self, KRule::Auto(s) if s == "auto")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleTemplate {
    pub l_min: usize,
    pub l_max: usize,
    pub t: Quantity,
    pub k: KRule,
    pub delta: Quantity,
    pub c: Quantity,
}

/// Raw tuple before k is resolved.
#[derive(Debug, Clone, Copy)]
pub struct RawTuple {
    pub l: usize,
    pub t: f64,
    pub k: Option<u64>,
    pub delta: f64,
    pub c: u64,
}

impl ScheduleTemplate {
    pub fn tuples(&self) -> Result<Vec<RawTuple>> {
        if let KRule::Auto(s) = &self.k {
            if s != "auto" {
                return Err(LabError::Config(format!("k must be \"auto\" or numbers, got {s:?}")));
            }
        }
        if self.l_min == 0 || self.l_max < self.l_min {
            return Err(LabError::Config(format!("bad l range {}..={}", self.l_min, self.l_max)));
        }
        (self.l_min..=self.l_max)
            .map(|l| {
                let k = match &self.k {
                    KRule::Auto(_) => None,
                    KRule::Given(q) => Some(q.at(l)?.round().max(0.0) as u64),
                };
                Ok(RawTuple { l, t: self.t.at(l)?, k, delta: self.delta.at(l)?, c: self.c.at(l)?.round().max(0.0) as u64 })
            })
            .collect()
    }

    /// Entries for templates with numeric k.
    pub fn entries(&self, m: f64, epsilon: f64, eta: f64) -> Result<Vec<ScheduleEntry>> {
        self.tuples()?
            .into_iter()
            .map(|r| {
                let k = r.k.ok_or_else(|| LabError::Config("k = \"auto\" needs the variance series".into()))?;
                ScheduleEntry::new(r.l, r.t, k, r.delta, r.c, m, epsilon, eta)
            })
            .collect()
    }
}

/// Per-observable data for the array variant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArrayData {
    pub sup_norm: f64,
    pub k_const: f64,
}

/// K_l = L_l·κε/(1 − e^{−η α_l/2}).
pub fn array_k_const(holder_l: f64, holder_alpha: f64, kappa_eps: f64, eta: f64) -> f64 {
    holder_l * kappa_eps / (1.0 - (-eta * holder_alpha / 2.0).exp())
}

#[derive(Debug, Clone)]
pub enum ValidationMode {
    Plain,
    Array(Vec<ArrayData>),
    Relaxed(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendCheck {
    pub item: String,
    pub quantity: String,
    pub direction: String,
    pub passed: bool,
    /// Pairs (l, l') of consecutive entries where the trend fails, or single
    /// entries (l, l) for pointwise items.
    pub violations: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleReport {
    pub mode: String,
    pub passed: bool,
    pub checks: Vec<TrendCheck>,
    pub caveat: String,
}

impl ScheduleReport {
    pub fn violated_items(&self) -> Vec<String> {
        let mut v: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.item, c.quantity)).collect();
        v.dedup();
        v
    }
}

fn trend(item: &str, quantity: &str, entries: &[ScheduleEntry], values: Vec<f64>, increasing: bool) -> TrendCheck {
    let violations: Vec<(usize, usize)> = (1..values.len())
        .filter(|&i| if increasing { !(values[i] > values[i - 1]) } else { !(values[i] < values[i - 1]) })
        .map(|i| (entries[i - 1].l, entries[i].l))
        .collect();
    TrendCheck {
        item: item.into(),
        quantity: quantity.into(),
        direction: if increasing { "increasing" } else { "decreasing" }.into(),
        passed: violations.is_empty(),
        violations,
        values,
    }
}

fn series(entries: &[ScheduleEntry], f: impl Fn(usize, &ScheduleEntry) -> f64) -> Vec<f64> {
    entries.iter().enumerate().map(|(i, e)| f(i, e)).collect()
}

/// Strict monotone-trend checks on the supplied prefix.
pub fn validate_schedule(entries: &[ScheduleEntry], mode: &ValidationMode) -> Result<ScheduleReport> {
    if entries.len() < 2 {
        return Err(LabError::Precondition("schedule validation needs at least 2 entries".into()));
    }
    let n = entries.len();
    match mode {
        ValidationMode::Array(a) if a.len() != n => {
            return Err(LabError::Precondition(format!("array mode needs {n} observables, got {}", a.len())))
        }
        ValidationMode::Relaxed(s) if s.len() != n => {
            return Err(LabError::Precondition(format!("relaxed mode needs {n} variances, got {}", s.len())))
        }
        _ => {}
    }
    let mut checks = Vec::new();
    let pointwise: Vec<(usize, usize)> =
        entries.iter().filter(|e| !(e.t > e.t0.unwrap_or(1.0).max(1.0))).map(|e| (e.l, e.l)).collect();
    checks.push(TrendCheck {
        item: "item 1".into(),
        quantity: "T_l > max(T0, 1)".into(),
        direction: "pointwise".into(),
        passed: pointwise.is_empty(),
        violations: pointwise,
        values: series(entries, |_, e| e.t),
    });
    checks.push(trend("item 2", "T_l", entries, series(entries, |_, e| e.t), true));
    if entries.iter().all(|e| e.t0.is_some()) {
        checks.push(trend("item 2", "T_l/T0", entries, series(entries, |_, e| e.t / e.t0.unwrap()), true));
    }
    checks.push(trend("item 2", "k_l", entries, series(entries, |_, e| e.k as f64), true));
    let sqk = |e: &ScheduleEntry| (e.k as f64).sqrt();
    match mode {
        ValidationMode::Plain => {
            checks.push(trend("item 3", "k_l delta_l^2", entries, series(entries, |_, e| e.k as f64 * e.delta * e.delta), false));
            checks.push(trend("item 3", "sqrt(k_l) T_l / C_l", entries, series(entries, |_, e| sqk(e) * e.t / e.c as f64), false));
        }
        ValidationMode::Relaxed(s) => {
            checks.push(trend(
                "item 3",
                "k_l delta_l^2 / sigma_l^2",
                entries,
                series(entries, |i, e| e.k as f64 * e.delta * e.delta / s[i]),
                false,
            ));
            checks.push(trend("item 3", "sqrt(k_l) T_l / C_l", entries, series(entries, |_, e| sqk(e) * e.t / e.c as f64), false));
        }
        ValidationMode::Array(a) => {
            checks.push(trend(
                "item 3",
                "k_l delta_l^2 max(|f_l|, 1)",
                entries,
                series(entries, |i, e| e.k as f64 * e.delta * e.delta * a[i].sup_norm.max(1.0)),
                false,
            ));
            checks.push(trend(
                "item 4",
                "sqrt(k_l) T_l max(|K_l|, 1) / Q_l",
                entries,
                series(entries, |i, e| sqk(e) * e.t * a[i].k_const.abs().max(1.0) / e.q as f64),
                false,
            ));
            checks.push(trend(
                "item 4",
                "sqrt(k_l) T_l max(|f_l|, 1) / Q_l",
                entries,
                series(entries, |i, e| sqk(e) * e.t * a[i].sup_norm.max(1.0) / e.q as f64),
                false,
            ));
        }
    }
    let mode_name = match mode {
        ValidationMode::Plain => "plain",
        ValidationMode::Array(_) => "array",
        ValidationMode::Relaxed(_) => "relaxed",
    };
    Ok(ScheduleReport {
        mode: mode_name.into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        caveat: "strict monotone trends on the supplied finite prefix only; limits are not certified".into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecheckVerdict {
    pub ratios: Vec<f64>,
    /// "increasing", "flat", or "non-increasing".
    pub verdict: String,
}

/// Trend of √k_l σ_l / T_l on the prefix.
pub fn lindeberg_precheck(sigma: &[f64], t: &[f64], k: &[f64]) -> Result<PrecheckVerdict> {
    if sigma.len() != t.len() || t.len() != k.len() || sigma.is_empty() {
        return Err(LabError::Precondition("lindeberg_precheck needs aligned nonempty series".into()));
    }
    let ratios: Vec<f64> = (0..t.len()).map(|i| k[i].sqrt() * sigma[i] / t[i]).collect();
    let tol = 1e-12;
    let up = ratios.windows(2).all(|w| w[1] > w[0] * (1.0 + tol));
    let flat = ratios.windows(2).all(|w| (w[1] - w[0]).abs() <= tol * w[0].abs().max(1.0));
    let verdict = if ratios.len() < 2 || flat {
        "flat"
    } else if up {
        "increasing"
    } else {
        "non-increasing"
    };
    Ok(PrecheckVerdict { ratios, verdict: verdict.into() })
}

/// CSV with a commented config header.
pub fn schedule_to_csv(entries: &[ScheduleEntry]) -> String {
    let mut s = String::new();
    if let Some(e) = entries.first() {
        s.push_str(&format!("# epsilon={} eta={} M={}\n", crate::fmt17(e.epsilon), crate::fmt17(e.eta), crate::fmt17(e.m)));
    }
    s.push_str("l,T_l,k_l,delta_l,C_l,Q_l,S_l\n");
    for e in entries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.l,
            crate::fmt17(e.t),
            e.k,
            crate::fmt17(e.delta),
            e.c,
            e.q,
            crate::fmt17(e.s)
        ));
    }
    s
}

/// Parses rows `l,T_l,k_l,delta_l,C_l` (extra columns ignored) with an
/// optional `# epsilon=.. eta=.. M=..` header.
pub fn schedule_from_csv(text: &str, defaults: (f64, f64, f64)) -> Result<Vec<ScheduleEntry>> {
    let (mut eps, mut eta, mut m) = defaults;
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(h) = line.strip_prefix('#') {
            for kv in h.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| LabError::Parse(format!("bad header item {kv:?}")))?;
                let v: f64 = v.parse().map_err(|_| LabError::Parse(format!("bad header value {kv:?}")))?;
                match k {
                    "epsilon" => eps = v,
                    "eta" => eta = v,
                    "M" => m = v,
                    _ => return Err(LabError::Parse(format!("unknown header key {k:?}"))),
                }
            }
            continue;
        }
        if line.starts_with('l') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 5 {
            return Err(LabError::Parse(format!("schedule row needs 5 columns: {line:?}")));
        }
        let p = |i: usize| cols[i].parse::<f64>().map_err(|_| LabError::Parse(format!("bad number {:?}", cols[i])));
        out.push(ScheduleEntry::new(p(0)? as usize, p(1)?, p(2)? as u64, p(3)?, p(4)? as u64, m, eps, eta)?);
    }
    Ok(out)
}
