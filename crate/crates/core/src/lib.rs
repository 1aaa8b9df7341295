//! Periodic-orbit measures on suspension flows over mixing shifts of finite
//! type, with exact Birkhoff functionals, variance comparisons, and Lindeberg
//! diagnostics.

pub mod census;
pub mod error;
pub mod gluing;
pub mod instance;
pub mod lab;
pub mod linalg;
pub mod measures;
pub mod piecewise;
pub mod point;
pub mod poly;
pub mod regularity;
pub mod schedule;
pub mod stats;
pub mod system;
pub mod timeline;

pub use error::{LabError, Result};

/// Floats in reports: 17 significant digits, so reruns compare byte for byte.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
