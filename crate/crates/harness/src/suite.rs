//! Oracle cross-checks shared by `batt verify` and the acceptance tests.

use batt_core::analysis::optimal_epsilon;
use batt_core::bandit::BetaPosterior;
use batt_core::env::{FailureCurve, ThresholdGrid};
use batt_core::handover::{select_next_cell, LearningState, PolicyKind};
use batt_core::search::{eps_binary_search_first, Feedback, SearchConfig};
use batt_core::verify::{
    brute_force_threshold, exhaustive_best_order, grid_min_epsilon, OracleCell, OracleReport,
};
use batt_core::RngStream;

use crate::error::Result;

/// Outcome of one family of oracle comparisons.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    /// Every comparison for small suites; only disagreements for the
    /// exhaustive grid check.
    pub reports: Vec<OracleReport>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.reports.iter().all(|r| r.agreement)
    }

    pub fn failures(&self) -> usize {
        self.reports.iter().filter(|r| !r.agreement).count()
    }
}

/// Probability levels used to build the exhaustive grids.
pub const PROB_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Thresholds tried against every grid, besides the grid's own values.
pub const THRESHOLDS: [f64; 8] = [0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85];

/// Every nondecreasing vector of length `len` over `PROB_LEVELS`.
fn monotone_vectors(len: usize) -> Vec<Vec<f64>> {
    fn rec(len: usize, from: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for (i, &p) in PROB_LEVELS.iter().enumerate().skip(from) {
            cur.push(p);
            rec(len, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, 0, &mut Vec::new(), &mut out);
    out
}

/// With noiseless feedback the binary searcher must select exactly the
/// brute-force closest sufficient arm, for every monotone grid of up to
/// `max_arms` arms and every threshold (including ones equal to a grid
/// value), visiting at most `ceil(log2 J) + 1` arms. Grids with repeated
/// values are included.
pub fn noiseless_exactness(max_arms: usize) -> Result<SuiteResult> {
    let mut checked = 0;
    let mut reports = Vec::new();
    for len in 1..=max_arms {
        for probs in monotone_vectors(len) {
            let grid = ThresholdGrid::from_probs(probs.clone())?;
            let mut thresholds: Vec<f64> = THRESHOLDS.to_vec();
            thresholds.extend(probs.iter().copied());
            thresholds.push(0.0);
            thresholds.dedup();
            for &r in &thresholds {
                let Ok(expected) = brute_force_threshold(&probs, r) else {
                    continue;
                };
                let cfg = SearchConfig::new(len, 256, r, 0.25)?;
                let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Noiseless)?;
                checked += 1;
                let depth_cap = (len as f64).log2().ceil() as usize + 1;
                if run.stats.searched.len() > depth_cap {
                    reports.push(OracleReport::compare(
                        format!("probs={probs:?} R={r} searched-set size"),
                        depth_cap as f64,
                        run.stats.searched.len() as f64,
                        0.0,
                    ));
                }
                if run.stats.selected_arm != expected {
                    reports.push(OracleReport::compare(
                        format!("probs={probs:?} R={r}"),
                        expected as f64,
                        run.stats.selected_arm as f64,
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(SuiteResult {
        name: "noiseless binary search vs linear scan",
        checked,
        reports,
    })
}

/// Resolution of the dense exploration-fraction scan.
pub const EPSILON_GRID_RESOLUTION: f64 = 1e-5;

/// Closed-form exploration fraction against a dense grid minimisation, on
/// `instances` random `(J, T, delta)`.
pub fn epsilon_oracle(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = RngStream::new(seed, 11);
    let mut reports = Vec::with_capacity(instances);
    for _ in 0..instances {
        let arms = 4 + rng.index(509);
        let rounds = (1e3 * 10f64.powf(3.0 * rng.uniform())).round() as u64;
        let delta = rng.uniform_in(0.01, 0.3);
        let closed = optimal_epsilon(arms, rounds, delta)?;
        let scanned = grid_min_epsilon(arms, rounds, delta, EPSILON_GRID_RESOLUTION)?;
        reports.push(OracleReport::compare(
            format!("J={arms} T={rounds} delta={delta:.4}"),
            scanned,
            closed,
            1e-4,
        ));
    }
    Ok(SuiteResult {
        name: "closed-form epsilon vs grid minimum",
        checked: instances,
        reports,
    })
}

/// Quadrature nodes per cell in [`oracle_order`].
pub const ORDER_QUADRATURE: usize = 12;

/// Measurement order chosen by the oracle policy: repeatedly the unmeasured
/// cell with the highest true rate.
pub fn oracle_policy_order(rates: &[f64]) -> Result<Vec<usize>> {
    let learning = LearningState::new(rates.len(), BetaPosterior::uniform());
    let mut measured = vec![false; rates.len()];
    let mut rng = RngStream::new(0, 0);
    let mut order = Vec::with_capacity(rates.len());
    for _ in 0..rates.len() {
        let k = select_next_cell(PolicyKind::Oracle, &learning, &measured, rates, 1.0, &mut rng)?;
        measured[k] = true;
        order.push(k);
    }
    Ok(order)
}

/// Random strictly decreasing failure curve over [-140, -80] dBm.
fn random_curve(rng: &mut RngStream) -> Result<FailureCurve> {
    let inner = 2 + rng.index(4);
    let mut signals: Vec<f64> = (0..inner).map(|_| rng.uniform_in(-139.0, -81.0)).collect();
    signals.push(-140.0);
    signals.push(-80.0);
    signals.sort_by(f64::total_cmp);
    let mut fails: Vec<f64> = (0..signals.len()).map(|_| rng.uniform_in(0.0, 0.6)).collect();
    fails.sort_by(|a, b| b.total_cmp(a));
    // Keep the curve strictly decreasing so distinct means give distinct rates.
    let n = fails.len();
    for (i, f) in fails.iter_mut().enumerate() {
        *f += 1e-3 * (n - i) as f64;
    }
    Ok(FailureCurve::new(signals.into_iter().zip(fails).collect())?)
}

/// The oracle policy's order against exhaustive enumeration of all 4! orders
/// on `instances` random four-cell environments. Agreement is judged on the
/// expected success value, so orders tied in value count as equal.
pub fn oracle_order(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = RngStream::new(seed, 12);
    let mut reports = Vec::with_capacity(instances);
    for i in 0..instances {
        let curve = random_curve(&mut rng)?;
        let half_width = rng.uniform_in(0.0, 6.0);
        let cells: Vec<OracleCell> = (0..4)
            .map(|_| OracleCell {
                mean: rng.uniform_in(-125.0, -100.0),
                half_width,
            })
            .collect();
        let y_start = rng.uniform_in(-120.0, -108.0);
        let drift = rng.uniform_in(0.5, 3.0);
        let serving: Vec<f64> = (0..4).map(|n| y_start - drift * n as f64).collect();
        let rates: Vec<f64> = cells.iter().map(|c| curve.success(c.mean)).collect();
        let best = exhaustive_best_order(&curve, &cells, &serving, ORDER_QUADRATURE)?;
        let order = oracle_policy_order(&rates)?;
        let value = best.value_of(&order).expect("every order is enumerated");
        let worst = best.all.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        reports.push(OracleReport::compare(
            format!(
                "instance {i} oracle order {order:?} best {:?} spread {:.4}",
                best.order,
                best.expected_success - worst
            ),
            best.expected_success,
            value,
            1e-12,
        ));
    }
    Ok(SuiteResult {
        name: "oracle order vs exhaustive enumeration",
        checked: instances,
        reports,
    })
}

/// The three suites run by `batt verify`.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        noiseless_exactness(8)?,
        epsilon_oracle(20, seed)?,
        oracle_order(20, seed)?,
    ])
}
