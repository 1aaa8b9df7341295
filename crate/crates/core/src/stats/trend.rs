//! Cross-l series: dynamical variance and monotonicity checks.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct DynVariance {
    /// σ_l²/T_l per l.
    pub values: Vec<f64>,
    /// Running minimum over the tail half, the liminf surrogate.
    pub tail_min: f64,
    pub positive: bool,
}

pub fn dyn_variance_series(sigma_sq: &[f64], t: &[f64]) -> DynVariance {
    assert_eq!(sigma_sq.len(), t.len(), "series must align");
    let values: Vec<f64> = sigma_sq.iter().zip(t).map(|(s, t)| s / t).collect();
    let tail_min = tail_half(&values).iter().copied().fold(f64::INFINITY, f64::min);
    let tail_min = if values.is_empty() { 0.0 } else { tail_min };
    DynVariance { positive: tail_min > 0.0, values, tail_min }
}

/// The last ⌈n/2⌉ entries.
pub fn tail_half(v: &[f64]) -> &[f64] {
    &v[v.len() / 2..]
}

/// The last `n` entries (all of them when shorter).
pub fn last_n(v: &[f64], n: usize) -> &[f64] {
    &v[v.len().saturating_sub(n)..]
}

/// v[i+1] ≤ v[i] + rel_tol·|v[i]| + abs_tol throughout. The absolute slack
/// absorbs roundoff in series that are identically zero.
pub fn is_nonincreasing(v: &[f64], rel_tol: f64, abs_tol: f64) -> bool {
    increases(v, rel_tol, abs_tol).is_empty()
}

pub fn is_strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Index pairs (i, i+1) where the series goes up.
pub fn increases(v: &[f64], rel_tol: f64, abs_tol: f64) -> Vec<(usize, usize)> {
    v.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + rel_tol * w[0].abs() + abs_tol)
        .map(|(i, _)| (i, i + 1))
        .collect()
}
