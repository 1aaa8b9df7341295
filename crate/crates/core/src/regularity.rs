//! The regularity function λ and the orbit-segment collections it defines.

use crate::error::{LabError, Result};
use crate::linalg;
use crate::point::{birkhoff_integral, flow, FlowPoint};
use crate::system::{CylinderTable, Observable, RoofFunction, SymbolicSystem};

/// Nonnegative cylinder function; words where it vanishes model the singular set.
#[derive(Debug, Clone)]
pub struct RegularityFunction {
    pub table: CylinderTable,
    pub lambda_max: f64,
    as_observable: Observable,
}

impl RegularityFunction {
    pub fn new(system: &SymbolicSystem, table: CylinderTable) -> Result<Self> {
        if table.min() < 0.0 {
            return Err(LabError::InvalidValue { table: table.name.clone(), reason: "lambda values must be >= 0".into() });
        }
        let lambda_max = table.max();
        if !(lambda_max > 0.0) {
            return Err(LabError::InvalidValue { table: table.name.clone(), reason: "lambda must be positive somewhere".into() });
        }
        let entries: Vec<(Vec<u8>, Vec<f64>)> =
            system.admissible_words(table.depth).into_iter().map(|w| { let v = table.on_word(&w); (w, vec![v]) }).collect();
        let as_observable = Observable::build("lambda", system, table.depth, &entries, None, 0.0, 1.0)?;
        Ok(Self { table, lambda_max, as_observable })
    }

    pub fn depth(&self) -> usize {
        self.table.depth
    }

    /// δ′ = η/λ_max.
    pub fn delta_prime(&self, eta: f64) -> f64 {
        eta / self.lambda_max
    }

    /// λ at the base word of x (constant on fibers).
    pub fn lambda_at(&self, x: &FlowPoint) -> f64 {
        self.table.at(x.seq(), x.pos)
    }

    pub fn lambda_on_word(&self, w: &[u8]) -> f64 {
        self.table.on_word(w)
    }

    /// (1/t)∫₀ᵗ λ(g_s x) ds.
    pub fn lambda_average(&self, x: &FlowPoint, roof: &RoofFunction, t: f64) -> f64 {
        assert!(t > 0.0, "lambda_average needs t > 0");
        birkhoff_integral(x, roof, &self.as_observable, 0.0, t) / t
    }

    /// (x, t) ∈ C(η): both endpoints have λ ≥ η.
    pub fn in_c_eta(&self, x: &FlowPoint, roof: &RoofFunction, t: f64, eta: f64) -> bool {
        self.lambda_at(x) >= eta && self.lambda_at(&flow(x, roof, t)) >= eta
    }

    /// (x, t) ∈ B(η): the λ-average along the segment is below η.
    pub fn in_b_eta(&self, x: &FlowPoint, roof: &RoofFunction, t: f64, eta: f64) -> bool {
        self.lambda_average(x, roof, t) < eta
    }

    pub fn as_observable(&self) -> &Observable {
        &self.as_observable
    }

    /// Topological entropy of the subshift whose d-windows all have λ = 0.
    /// `None` means that subshift is empty (the −∞ sentinel).
    pub fn singular_entropy(&self, system: &SymbolicSystem) -> Result<Option<f64>> {
        let d = self.table.depth;
        if d == 1 {
            let zero: Vec<bool> = (0..system.alphabet_size as u8).map(|s| self.table.on_word(&[s]) == 0.0).collect();
            let adj: Vec<Vec<bool>> = (0..system.alphabet_size)
                .map(|i| (0..system.alphabet_size).map(|j| zero[i] && zero[j] && system.transitions[i][j]).collect())
                .collect();
            return linalg::graph_entropy(&adj);
        }
        let blocks = system.admissible_words(d - 1);
        let index = |w: &[u8]| blocks.iter().position(|b| b.as_slice() == w).expect("block");
        let mut adj = vec![vec![false; blocks.len()]; blocks.len()];
        for w in system.admissible_words(d) {
            if self.table.on_word(&w) == 0.0 {
                adj[index(&w[..d - 1])][index(&w[1..])] = true;
            }
        }
        linalg::graph_entropy(&adj)
    }
}

/// η together with the variants used in tracking bounds.
#[derive(Debug, Clone, Copy)]
pub struct RegularityThresholds {
    pub eta: f64,
    pub three_quarters: f64,
    pub half: f64,
    pub quarter: f64,
}

impl RegularityThresholds {
    pub fn new(eta: f64, lambda: &RegularityFunction) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(LabError::Precondition(format!("eta must be positive, got {eta}")));
        }
        if eta > lambda.lambda_max {
            return Err(LabError::EtaTooLarge { eta, lambda_max: lambda.lambda_max });
        }
        Ok(Self { eta, three_quarters: 0.75 * eta, half: 0.5 * eta, quarter: 0.25 * eta })
    }
}
