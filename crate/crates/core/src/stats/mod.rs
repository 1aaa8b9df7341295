//! Variance comparisons, Lindeberg functions, and CLT distances.

pub mod audit;
pub mod dist;
pub mod engine;
pub mod trend;

use serde::Serialize;
use libm::erfc;

pub use dist::{Distribution, KsRecord};

/// Standard normal CDF Φ(a) = erfc(−a/√2)/2.
pub fn normal_cdf(a: f64) -> f64 {
    0.5 * erfc(-a / std::f64::consts::SQRT_2)
}

/// Σ w (h − ∫h)² 1{|h − ∫h| > c} for a discrete measure.
pub fn lindeberg_function(values: &[f64], weights: &[f64], c: f64) -> f64 {
    let m: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    values
        .iter()
        .zip(weights)
        .filter(|(v, _)| (*v - m).abs() > c)
        .map(|(v, w)| w * (v - m) * (v - m))
        .sum()
}

pub fn weighted_variance(values: &[f64], weights: &[f64]) -> f64 {
    let m: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    values.iter().zip(weights).map(|(v, w)| w * (v - m) * (v - m)).sum()
}

/// A ratio that is undefined when its normalizer vanishes.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Flagged {
    Value(f64),
    ZeroVariance(&'static str),
}

impl Flagged {
    pub fn value(&self) -> Option<f64> {
        match self {
            Flagged::Value(v) => Some(*v),
            Flagged::ZeroVariance(_) => None,
        }
    }

    pub fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Flagged::Value(num / den)
        } else {
            Flagged::ZeroVariance("zero_variance")
        }
    }
}

/// L_m(F(·,T), γ√k σ)/σ².
pub fn lindeberg_ratio_m(values: &[f64], weights: &[f64], k: u64, gamma: f64) -> Flagged {
    let s2 = weighted_variance(values, weights);
    if !(s2 > 0.0) {
        return Flagged::ZeroVariance("zero_variance");
    }
    let c = gamma * (k as f64).sqrt() * s2.sqrt();
    Flagged::Value(lindeberg_function(values, weights, c) / s2)
}
