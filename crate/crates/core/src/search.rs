//! Closest-sufficient-arm identification on a monotone threshold grid.
//!
//! Given arms ordered so their success probabilities never decrease, the goal
//! is the lowest arm whose success probability reaches the target `R`.
//! [`eps_binary_search_first`] explores by binary search and then commits;
//! [`uniform_search_first`] is the sweep-every-arm baseline.
//!
//! Arm indices are 0-based throughout this module.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::env::ThresholdGrid;
use crate::rng::RngStream;

/// Where pull rewards come from.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Feedback {
    /// Bernoulli draws with the arm's true success probability.
    Bernoulli(RngStream),
    /// Every pull returns the arm's true success probability.
    Noiseless,
}

impl Feedback {
    fn pull(&mut self, grid: &ThresholdGrid, arm: usize) -> f64 {
        match self {
            Feedback::Bernoulli(rng) => {
                if rng.bernoulli(grid.success_prob(arm)) {
                    1.0
                } else {
                    0.0
                }
            }
            Feedback::Noiseless => grid.success_prob(arm),
        }
    }
}

/// Run parameters shared by both searchers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    arms: usize,
    rounds: u64,
    threshold: f64,
    epsilon: f64,
}

impl SearchConfig {
    pub fn new(arms: usize, rounds: u64, threshold: f64, epsilon: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("search config", "J must be positive"));
        }
        if rounds == 0 {
            return Err(Error::invalid("search config", "T must be positive"));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(
                "search config",
                format!("R = {threshold} must lie in [0, 1]"),
            ));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::invalid(
                "search config",
                format!("epsilon = {epsilon} must lie in (0, 1]"),
            ));
        }
        let cfg = Self {
            arms,
            rounds,
            threshold,
            epsilon,
        };
        if cfg.pulls_per_arm() == 0 {
            return Err(Error::invalid(
                "search config",
                format!(
                    "epsilon * T / log2 J = {:.3} leaves no pulls per searched arm",
                    epsilon * rounds as f64 / (arms as f64).log2()
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `P = floor(epsilon * T / log2 J)`; a single arm gets all `T` rounds.
    pub fn pulls_per_arm(&self) -> u64 {
        if self.arms < 2 {
            return self.rounds;
        }
        (self.epsilon * self.rounds as f64 / (self.arms as f64).log2()).floor() as u64
    }

    /// Uniform sweep budget per arm, `floor(epsilon * T / J)`.
    pub fn uniform_pulls_per_arm(&self) -> u64 {
        (self.epsilon * self.rounds as f64 / self.arms as f64).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Explore,
    Exploit,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
    pub phase: Phase,
}

/// Running reward total for one explored arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmEstimate {
    pub arm: usize,
    pub pulls: u64,
    pub reward_sum: f64,
    /// The shared value when every reward so far was the same. Lets a run of
    /// identical rewards report that value exactly instead of a rounded
    /// average.
    pub constant_reward: Option<f64>,
}

impl ArmEstimate {
    pub fn new(arm: usize) -> Self {
        Self {
            arm,
            pulls: 0,
            reward_sum: 0.0,
            constant_reward: None,
        }
    }

    pub fn record(&mut self, reward: f64) {
        self.constant_reward = match (self.pulls, self.constant_reward) {
            (0, _) => Some(reward),
            (_, Some(v)) if v == reward => Some(v),
            _ => None,
        };
        self.pulls += 1;
        self.reward_sum += reward;
    }

    pub fn mean(&self) -> f64 {
        match (self.pulls, self.constant_reward) {
            (0, _) => 0.0,
            (_, Some(v)) => v,
            (n, None) => self.reward_sum / n as f64,
        }
    }
}

/// One level of the binary-search recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchStep {
    pub start: usize,
    pub end: usize,
    pub estimate: ArmEstimate,
    /// `true` when the estimate met the threshold and the search moved to
    /// lower arms.
    pub went_left: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub steps: Vec<SearchStep>,
}

impl SearchTrace {
    pub fn searched_arms(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.estimate.arm).collect()
    }

    pub fn estimates(&self) -> Vec<ArmEstimate> {
        self.steps.iter().map(|s| s.estimate).collect()
    }

    /// Whether every searched arm's comparison against `threshold` agreed with
    /// its true comparison.
    pub fn all_well_measured(&self, grid: &ThresholdGrid, threshold: f64) -> bool {
        self.steps.iter().all(|s| {
            let truth = grid.success_prob(s.estimate.arm) >= threshold;
            let seen = s.estimate.mean() >= threshold;
            truth == seen
        })
    }
}

/// Append-only round log with a hard cap on the number of rounds.
#[derive(Debug, Clone)]
pub struct RoundLog {
    records: Vec<RoundRecord>,
    limit: u64,
}

impl RoundLog {
    pub fn with_limit(limit: u64) -> Self {
        Self {
            records: Vec::with_capacity(limit.min(1 << 20) as usize),
            limit,
        }
    }

    pub fn unbounded() -> Self {
        Self {
            records: Vec::new(),
            limit: u64::MAX,
        }
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.records.len() as u64
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RoundRecord> {
        self.records
    }

    /// Pulls `arm` up to `times` times; returns the realised estimate.
    fn pull_many(
        &mut self,
        grid: &ThresholdGrid,
        feedback: &mut Feedback,
        arm: usize,
        times: u64,
        phase: Phase,
    ) -> ArmEstimate {
        let n = times.min(self.remaining());
        let mut est = ArmEstimate::new(arm);
        for _ in 0..n {
            let reward = feedback.pull(grid, arm);
            self.records.push(RoundRecord {
                round: self.records.len() as u64,
                arm,
                reward,
                phase,
            });
            est.record(reward);
        }
        est
    }
}

/// Lowest arm whose true success probability reaches `threshold`.
pub fn true_optimal_arm(grid: &ThresholdGrid, threshold: f64) -> Result<usize> {
    let first = grid.success_probs().partition_point(|&p| p < threshold);
    if first < grid.len() {
        Ok(first)
    } else {
        Err(Error::NoSufficientArm { threshold })
    }
}

/// Binary search over the inclusive arm range `start..=end`, pulling each
/// visited midpoint `pulls` times.
///
/// The midpoint is `ceil(start + (end - start) / 2)`. An estimate at or above
/// `threshold` sends the search to the lower half; anything else to the upper
/// half. `end < start` (passed as `None`) searches nothing.
pub fn binary_arm_search(
    grid: &ThresholdGrid,
    pulls: u64,
    threshold: f64,
    range: Option<(usize, usize)>,
    feedback: &mut Feedback,
    log: &mut RoundLog,
) -> Result<SearchTrace> {
    let mut trace = SearchTrace::default();
    let Some((start, end)) = range else {
        return Ok(trace);
    };
    if end >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: end,
            len: grid.len(),
        });
    }
    let (mut start, mut end) = (start as i64, end as i64);
    while end >= start && log.remaining() > 0 {
        let mid = start + (end - start + 1) / 2;
        let estimate = log.pull_many(grid, feedback, mid as usize, pulls, Phase::Explore);
        let went_left = estimate.mean() >= threshold;
        trace.steps.push(SearchStep {
            start: start as usize,
            end: end as usize,
            estimate,
            went_left,
        });
        if went_left {
            end = mid - 1;
        } else {
            start = mid + 1;
        }
    }
    Ok(trace)
}

/// Commit rule shared by both searchers.
///
/// Among estimates at or above `threshold`, the one closest to it; ties go to
/// the lowest arm. If none qualifies, the largest estimate (again lowest arm
/// on ties).
pub fn select_arm(estimates: &[ArmEstimate], threshold: f64) -> Option<usize> {
    let candidates = estimates.iter().filter(|e| e.pulls > 0);
    let sufficient = candidates
        .clone()
        .filter(|e| e.mean() >= threshold)
        .min_by(|a, b| {
            let da = a.mean() - threshold;
            let db = b.mean() - threshold;
            da.total_cmp(&db).then(a.arm.cmp(&b.arm))
        });
    sufficient
        .or_else(|| {
            candidates.max_by(|a, b| a.mean().total_cmp(&b.mean()).then(b.arm.cmp(&a.arm)))
        })
        .map(|e| e.arm)
}

/// Outcome summary of one searcher run.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRunStats {
    pub pulls: Vec<u64>,
    pub searched: Vec<usize>,
    pub selected_arm: usize,
    pub optimal_arm: usize,
    /// Rounds whose pulled arm has true success probability below `R`.
    pub violations: u64,
    /// Sum over rounds of `Z_pulled - Z_M`.
    pub cum_signed_diff: f64,
    pub coarse_regret: u64,
    pub exploration_rounds: u64,
}

#[derive(Debug, Clone)]
pub struct ThresholdRun {
    pub stats: ThresholdRunStats,
    /// Present for binary search runs only.
    pub trace: Option<SearchTrace>,
    pub estimates: Vec<ArmEstimate>,
    pub rounds: Vec<RoundRecord>,
}

impl ThresholdRun {
    /// Cumulative violation count after each round.
    pub fn violation_series(&self, grid: &ThresholdGrid, threshold: f64) -> Vec<u64> {
        self.rounds
            .iter()
            .scan(0u64, |acc, r| {
                if grid.success_prob(r.arm) < threshold {
                    *acc += 1;
                }
                Some(*acc)
            })
            .collect()
    }

    /// Cumulative `Z_pulled - Z_M` after each round.
    pub fn signed_diff_series(&self, grid: &ThresholdGrid) -> Vec<f64> {
        let z_m = grid.level(self.stats.optimal_arm);
        self.rounds
            .iter()
            .scan(0.0f64, |acc, r| {
                *acc += grid.level(r.arm) - z_m;
                Some(*acc)
            })
            .collect()
    }
}

/// `T - N_T(M)`: the number of rounds not spent on the optimal arm.
pub fn coarse_regret(pulls: &[u64], optimal_arm: usize) -> u64 {
    let total: u64 = pulls.iter().sum();
    total - pulls.get(optimal_arm).copied().unwrap_or(0)
}

fn summarize(
    grid: &ThresholdGrid,
    threshold: f64,
    optimal_arm: usize,
    selected_arm: usize,
    searched: Vec<usize>,
    rounds: &[RoundRecord],
) -> ThresholdRunStats {
    let mut pulls = vec![0u64; grid.len()];
    let mut violations = 0;
    let mut cum_signed_diff = 0.0;
    let mut exploration_rounds = 0;
    let z_m = grid.level(optimal_arm);
    for r in rounds {
        pulls[r.arm] += 1;
        if grid.success_prob(r.arm) < threshold {
            violations += 1;
        }
        cum_signed_diff += grid.level(r.arm) - z_m;
        if r.phase == Phase::Explore {
            exploration_rounds += 1;
        }
    }
    let coarse_regret = coarse_regret(&pulls, optimal_arm);
    ThresholdRunStats {
        pulls,
        searched,
        selected_arm,
        optimal_arm,
        violations,
        cum_signed_diff,
        coarse_regret,
        exploration_rounds,
    }
}

/// Binary-search exploration with `P` pulls per visited arm, then commit to
/// the selected arm for the remaining rounds.
///
/// If the search would overrun `T`, the final pulls are truncated so the run
/// always lasts exactly `T` rounds.
pub fn eps_binary_search_first(
    cfg: &SearchConfig,
    grid: &ThresholdGrid,
    feedback: &mut Feedback,
) -> Result<ThresholdRun> {
    check_grid(cfg, grid)?;
    let optimal_arm = true_optimal_arm(grid, cfg.threshold)?;
    let mut log = RoundLog::with_limit(cfg.rounds);
    let trace = binary_arm_search(
        grid,
        cfg.pulls_per_arm(),
        cfg.threshold,
        Some((0, grid.len() - 1)),
        feedback,
        &mut log,
    )?;
    let estimates = trace.estimates();
    let selected = select_arm(&estimates, cfg.threshold).expect("search pulls at least one arm");
    let left = log.remaining();
    log.pull_many(grid, feedback, selected, left, Phase::Exploit);
    let rounds = log.into_records();
    let searched = trace.searched_arms();
    let stats = summarize(grid, cfg.threshold, optimal_arm, selected, searched, &rounds);
    Ok(ThresholdRun {
        stats,
        trace: Some(trace),
        estimates,
        rounds,
    })
}

/// Sweep every arm `floor(epsilon * T / J)` times in index order, then commit
/// using the same rule as the binary searcher.
pub fn uniform_search_first(
    cfg: &SearchConfig,
    grid: &ThresholdGrid,
    feedback: &mut Feedback,
) -> Result<ThresholdRun> {
    check_grid(cfg, grid)?;
    let per_arm = cfg.uniform_pulls_per_arm();
    if per_arm == 0 {
        return Err(Error::invalid(
            "search config",
            format!(
                "uniform sweep needs epsilon * T >= J (got {:.1} < {})",
                cfg.epsilon * cfg.rounds as f64,
                cfg.arms
            ),
        ));
    }
    let optimal_arm = true_optimal_arm(grid, cfg.threshold)?;
    let mut log = RoundLog::with_limit(cfg.rounds);
    let estimates: Vec<ArmEstimate> = (0..grid.len())
        .map(|arm| log.pull_many(grid, feedback, arm, per_arm, Phase::Explore))
        .collect();
    let selected = select_arm(&estimates, cfg.threshold).expect("sweep pulls every arm");
    let left = log.remaining();
    log.pull_many(grid, feedback, selected, left, Phase::Exploit);
    let rounds = log.into_records();
    let searched: Vec<usize> = estimates
        .iter()
        .filter(|e| e.pulls > 0)
        .map(|e| e.arm)
        .collect();
    let stats = summarize(grid, cfg.threshold, optimal_arm, selected, searched, &rounds);
    Ok(ThresholdRun {
        stats,
        trace: None,
        estimates,
        rounds,
    })
}

fn check_grid(cfg: &SearchConfig, grid: &ThresholdGrid) -> Result<()> {
    if cfg.arms != grid.len() {
        return Err(Error::invalid(
            "search config",
            format!("J = {} but the grid has {} arms", cfg.arms, grid.len()),
        ));
    }
    Ok(())
}

/// Distinct arms visited, as a set.
pub fn searched_set(stats: &ThresholdRunStats) -> BTreeSet<usize> {
    stats.searched.iter().copied().collect()
}
