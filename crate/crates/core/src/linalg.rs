//! Perron–Frobenius data for small nonnegative matrices.

use crate::error::{LabError, Result};

pub const PERRON_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Perron {
    pub rho: f64,
    /// Right eigenvector, normalized to sum 1.
    pub right: Vec<f64>,
    /// Left eigenvector, normalized so that ⟨left, right⟩ = 1.
    pub left: Vec<f64>,
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n).map(|j| (0..n).map(|i| m[i][j]).collect()).collect()
}

/// Power iteration with Collatz–Wielandt bounds as the stopping rule.
///
/// The matrix must be primitive; the iteration is run on M + I, which has the
/// same Perron vector and a strictly dominant eigenvalue ρ + 1.
fn right_vector(m: &[Vec<f64>], max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let n = m.len();
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m[i][j] + if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let w = mat_vec(&shifted, &v);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (a, b) in w.iter().zip(&v) {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let s: f64 = w.iter().sum();
        v = w.into_iter().map(|x| x / s).collect();
        if hi - lo <= 1e-14 * hi {
            let rho = 0.5 * (lo + hi) - 1.0;
            // Polish: one Rayleigh-type estimate from the unshifted matrix.
            let mv = mat_vec(m, &v);
            let rho2 = mv.iter().sum::<f64>() / v.iter().sum::<f64>();
            return Ok((if rho2.is_finite() { rho2 } else { rho }, v));
        }
    }
    Err(LabError::NonConvergence(max_iter))
}

pub fn perron(m: &[Vec<f64>]) -> Result<Perron> {
    let (rho, right) = right_vector(m, PERRON_MAX_ITER)?;
    let (_, mut left) = right_vector(&transpose(m), PERRON_MAX_ITER)?;
    let dot: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    for x in &mut left {
        *x /= dot;
    }
    Ok(Perron { rho, right, left })
}

/// Strongly connected components (iterative Tarjan), in discovery order.
pub fn scc(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = call.last_mut() {
            let v = top.0;
            if top.1 < n {
                let w = top.1;
                top.1 += 1;
                if !adj[v][w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// log of the spectral radius of a 0/1 graph; `None` when the graph has no cycle.
pub fn graph_entropy(adj: &[Vec<bool>]) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for comp in scc(adj) {
        let has_cycle = comp.len() > 1 || adj[comp[0]][comp[0]];
        if !has_cycle {
            continue;
        }
        let sub: Vec<Vec<f64>> = comp
            .iter()
            .map(|&i| comp.iter().map(|&j| if adj[i][j] { 1.0 } else { 0.0 }).collect())
            .collect();
        // Irreducible but possibly periodic: the +I shift inside handles it.
        let (rho, _) = right_vector(&sub, PERRON_MAX_ITER)?;
        let h = rho.max(1.0).ln();
        best = Some(best.map_or(h, |b: f64| b.max(h)));
    }
    Ok(best)
}
