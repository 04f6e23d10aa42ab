//! Brute-force references for checking the algorithms.
//!
//! Nothing in here calls into [`crate::search`], [`crate::analysis`] or
//! [`crate::handover`]; each routine recomputes its answer the slow, obvious
//! way so it can serve as an independent oracle.

use std::fmt;

use crate::env::FailureCurve;
use crate::error::{Error, Result};

/// Oracle-versus-algorithm comparison for the test log.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub instance: String,
    pub oracle_value: f64,
    pub algorithm_value: f64,
    pub tolerance: f64,
    pub agreement: bool,
}

impl OracleReport {
    pub fn compare(
        instance: impl Into<String>,
        oracle_value: f64,
        algorithm_value: f64,
        tolerance: f64,
    ) -> Self {
        let agreement = (oracle_value - algorithm_value).abs() <= tolerance;
        Self {
            instance: instance.into(),
            oracle_value,
            algorithm_value,
            tolerance,
            agreement,
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: oracle={} algorithm={} tol={:e}",
            if self.agreement { "agree" } else { "DISAGREE" },
            self.instance,
            self.oracle_value,
            self.algorithm_value,
            self.tolerance
        )
    }
}

/// Linear scan for the first arm whose success probability reaches
/// `threshold`.
pub fn brute_force_threshold(success_probs: &[f64], threshold: f64) -> Result<usize> {
    for (j, &p) in success_probs.iter().enumerate() {
        if p >= threshold {
            return Ok(j);
        }
    }
    Err(Error::NoSufficientArm { threshold })
}

fn objective(arms: usize, rounds: u64, delta: f64, eps: f64) -> f64 {
    let t = rounds as f64;
    let j = arms as f64;
    let exponent = -2.0 * (eps * t / j.ln() - 1.0) * delta * delta;
    eps * t + 3.0 * t * j * exponent.exp()
}

/// Dense scan of the exploration objective over `eps = k * resolution`,
/// `k = 1 ..= 1 / resolution`.
pub fn grid_min_epsilon(arms: usize, rounds: u64, delta: f64, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0 && resolution <= 1e-4) {
        return Err(Error::invalid(
            "grid resolution",
            format!("{resolution} must lie in (0, 1e-4]"),
        ));
    }
    let steps = (1.0 / resolution).round() as u64;
    let mut best = (f64::INFINITY, resolution);
    for k in 1..=steps {
        let eps = (k as f64 * resolution).min(1.0);
        let h = objective(arms, rounds, delta, eps);
        if h < best.0 {
            best = (h, eps);
        }
    }
    Ok(best.1)
}

/// Evaluates the exploration objective; exposed for local-minimality probes.
pub fn grid_objective(arms: usize, rounds: u64, delta: f64, eps: f64) -> f64 {
    objective(arms, rounds, delta, eps)
}

/// Neighbour description for [`exhaustive_best_order`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCell {
    pub mean: f64,
    pub half_width: f64,
}

/// Best measurement order and its expected success.
#[derive(Debug, Clone, PartialEq)]
pub struct BestOrder {
    pub order: Vec<usize>,
    pub expected_success: f64,
    /// Expected success of every order, in lexicographic order.
    pub all: Vec<(Vec<usize>, f64)>,
}

impl BestOrder {
    pub fn value_of(&self, order: &[usize]) -> Option<f64> {
        self.all.iter().find(|(o, _)| o == order).map(|(_, v)| *v)
    }
}

pub const MAX_ENUMERATED_CELLS: usize = 5;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Success probability of one realisation under the conventional rule
/// (hand over once the best target beats serving, or after the last cell).
fn realised_success(curve: &FailureCurve, serving: &[f64], order: &[usize], xs: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (n, &cell) in order.iter().enumerate() {
        best = best.max(xs[cell]);
        let y = serving[n.min(serving.len() - 1)];
        if best > y || n + 1 == order.len() {
            return (1.0 - curve.eval(y)) * (1.0 - curve.eval(best));
        }
    }
    unreachable!("orders are non-empty")
}

/// Enumerates every measurement order of up to five cells and returns the one
/// with the highest expected handover success.
///
/// Each cell's signal is uniform on `[mean - half_width, mean + half_width]`;
/// the expectation uses `quadrature` equally weighted midpoint nodes per
/// cell, enumerated jointly. Ties keep the lexicographically first order.
pub fn exhaustive_best_order(
    curve: &FailureCurve,
    cells: &[OracleCell],
    serving: &[f64],
    quadrature: usize,
) -> Result<BestOrder> {
    let k = cells.len();
    if k == 0 || k > MAX_ENUMERATED_CELLS {
        return Err(Error::invalid(
            "exhaustive order",
            format!("{k} cells; enumeration supports 1..={MAX_ENUMERATED_CELLS}"),
        ));
    }
    if serving.is_empty() || quadrature == 0 {
        return Err(Error::invalid(
            "exhaustive order",
            "needs a serving trace and at least one quadrature node",
        ));
    }
    let nodes: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| {
            (0..quadrature)
                .map(|i| {
                    let u = (2 * i + 1) as f64 / (2 * quadrature) as f64;
                    c.mean - c.half_width + 2.0 * c.half_width * u
                })
                .collect()
        })
        .collect();
    let orders = permutations(k);
    let mut totals = vec![0.0f64; orders.len()];
    let combos = quadrature.pow(k as u32);
    let mut xs = vec![0.0; k];
    for mut idx in 0..combos {
        for (cell, x) in xs.iter_mut().enumerate() {
            *x = nodes[cell][idx % quadrature];
            idx /= quadrature;
        }
        for (o, order) in orders.iter().enumerate() {
            totals[o] += realised_success(curve, serving, order, &xs);
        }
    }
    let all: Vec<(Vec<usize>, f64)> = orders
        .into_iter()
        .zip(totals.into_iter().map(|t| t / combos as f64))
        .collect();
    let (order, expected_success) = all
        .iter()
        .fold(None::<&(Vec<usize>, f64)>, |acc, cand| match acc {
            Some(best) if best.1 >= cand.1 => Some(best),
            _ => Some(cand),
        })
        .cloned()
        .expect("at least one order");
    Ok(BestOrder {
        order,
        expected_success,
        all,
    })
}
