//! Closed-form regret analysis for binary-search-first exploration.
//!
//! All logarithms here are natural. The exploration objective
//!
//! ```text
//! h(eps) = eps*T + 3*T*J * exp(-2 * delta^2 * (eps*T / ln J - 1))
//! ```
//!
//! bounds the coarse regret; [`optimal_epsilon`] is its stationary point and
//! [`regret_bound`] its value there.

use crate::env::ThresholdGrid;
use crate::error::{Error, Result};
use crate::search::true_optimal_arm;

/// Smallest value [`optimal_epsilon`] returns.
pub const MIN_EPSILON: f64 = 1e-9;

fn check_domain(arms: usize, rounds: u64, delta: f64) -> Result<()> {
    if arms < 2 {
        return Err(Error::invalid("analysis", format!("J = {arms} must be at least 2")));
    }
    if rounds == 0 {
        return Err(Error::invalid("analysis", "T must be positive"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(
            "analysis",
            format!("delta = {delta} must be positive"),
        ));
    }
    Ok(())
}

/// The exploration-budget objective `h(eps)`.
pub fn epsilon_objective(arms: usize, rounds: u64, delta: f64, epsilon: f64) -> f64 {
    let t = rounds as f64;
    let j = arms as f64;
    let ln_j = j.ln();
    epsilon * t + 3.0 * t * j * (-2.0 * delta * delta * (epsilon * t / ln_j - 1.0)).exp()
}

/// Minimiser of `h` over `(0, 1]`:
/// `ln J / T - (ln J / (2 T delta^2)) * ln(ln J / (6 delta^2 T J))`, clamped.
pub fn optimal_epsilon(arms: usize, rounds: u64, delta: f64) -> Result<f64> {
    check_domain(arms, rounds, delta)?;
    let t = rounds as f64;
    let j = arms as f64;
    let ln_j = j.ln();
    let d2 = delta * delta;
    let eps = ln_j / t - ln_j / (2.0 * t * d2) * (ln_j / (6.0 * d2 * t * j)).ln();
    Ok(eps.clamp(MIN_EPSILON, 1.0))
}

/// Upper bound on coarse regret at the optimal exploration budget:
/// `ln J * (ln(6 delta^2 T J) / (2 delta^2) - ln ln J / (2 delta^2) + 1 / (2 delta^2) + 1)`.
pub fn regret_bound(arms: usize, rounds: u64, delta: f64) -> Result<f64> {
    check_domain(arms, rounds, delta)?;
    let t = rounds as f64;
    let j = arms as f64;
    let d2 = delta * delta;
    let inner = 6.0 * d2 * t * j;
    if inner <= 1.0 {
        return Err(Error::invalid(
            "analysis",
            format!("6 delta^2 T J = {inner} must exceed 1"),
        ));
    }
    let ln_j = j.ln();
    let two_d2 = 2.0 * d2;
    Ok(ln_j * (inner.ln() / two_d2 - ln_j.ln() / two_d2 + 1.0 / two_d2 + 1.0))
}

/// Gap parameters of a threshold instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapParams {
    /// `r_M - R`.
    pub big_delta: f64,
    /// Smallest gap between `r_M` and any other arm.
    pub min_gap: f64,
    /// Smallest `|r_j - R|` over the searched arms.
    pub d: f64,
    /// `min(big_delta, min_gap / 2)`.
    pub delta: f64,
}

impl GapParams {
    /// Computes the gaps; `searched` restricts `d` to the arms explored.
    pub fn new(grid: &ThresholdGrid, threshold: f64, searched: &[usize]) -> Result<Self> {
        let m = true_optimal_arm(grid, threshold)?;
        let r_m = grid.success_prob(m);
        let big_delta = r_m - threshold;
        let min_gap = grid
            .success_probs()
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != m)
            .map(|(_, &r)| (r_m - r).abs())
            .fold(f64::INFINITY, f64::min);
        let d = searched
            .iter()
            .map(|&j| (grid.success_prob(j) - threshold).abs())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            big_delta,
            min_gap,
            d,
            delta: big_delta.min(min_gap / 2.0),
        })
    }

    /// `d < sqrt(ln(T ln J) / (2 P))`, the instance condition for the bound.
    pub fn condition_holds(&self, arms: usize, rounds: u64, pulls_per_arm: u64) -> bool {
        let ln_j = (arms as f64).ln();
        let rhs = ((rounds as f64 * ln_j).ln() / (2.0 * pulls_per_arm as f64)).sqrt();
        self.d < rhs
    }
}
