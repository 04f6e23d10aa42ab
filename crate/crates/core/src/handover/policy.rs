use std::fmt;
use std::str::FromStr;

use crate::bandit::{ucb_index, ArmStats, BetaPosterior};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    OpportunisticTs,
    ClassicTs,
    ClassicUcb,
    /// Uniformly random measurement order.
    Baseline,
    /// Measures cells by true success rate, best first.
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Oracle,
        PolicyKind::OpportunisticTs,
        PolicyKind::ClassicTs,
        PolicyKind::ClassicUcb,
        PolicyKind::Baseline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::OpportunisticTs => "opportunistic_ts",
            PolicyKind::ClassicTs => "ts",
            PolicyKind::ClassicUcb => "ucb",
            PolicyKind::Baseline => "baseline",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("policy", format!("unknown policy {s:?}")))
    }
}

/// Per-cell learner state, persisted across users within a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningState {
    posteriors: Vec<BetaPosterior>,
    stats: Vec<ArmStats>,
    total_pulls: u64,
}

impl LearningState {
    pub fn new(cells: usize, prior: BetaPosterior) -> Self {
        Self {
            posteriors: vec![prior; cells],
            stats: vec![ArmStats::default(); cells],
            total_pulls: 0,
        }
    }

    pub fn posteriors(&self) -> &[BetaPosterior] {
        &self.posteriors
    }

    pub fn posteriors_mut(&mut self) -> &mut [BetaPosterior] {
        &mut self.posteriors
    }

    pub fn stats(&self) -> &[ArmStats] {
        &self.stats
    }

    /// Number of updates applied so far.
    pub fn total_pulls(&self) -> u64 {
        self.total_pulls
    }

    pub fn update(&mut self, cell: usize, reward: bool) {
        self.posteriors[cell] = self.posteriors[cell].update(reward);
        self.stats[cell].record(reward);
        self.total_pulls += 1;
    }
}

fn argmax_unmeasured(measured: &[bool], mut score: impl FnMut(usize) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for k in (0..measured.len()).filter(|&k| !measured[k]) {
        let s = score(k);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best.expect("caller checked an unmeasured cell exists").0
}

/// Picks the next cell to measure among those not yet in `measured`.
///
/// Thompson policies draw one posterior sample per unmeasured cell (in index
/// order) and take the largest; UCB takes the largest index; the baseline
/// draws uniformly; the oracle takes the highest true rate. Ties go to the
/// lowest index.
pub fn select_next_cell(
    policy: PolicyKind,
    learning: &LearningState,
    measured: &[bool],
    true_rates: &[f64],
    ucb_alpha: f64,
    rng: &mut RngStream,
) -> Result<usize> {
    let open = measured.iter().filter(|&&m| !m).count();
    if open == 0 {
        return Err(Error::AllMeasured(measured.len()));
    }
    let cell = match policy {
        PolicyKind::OpportunisticTs | PolicyKind::ClassicTs => {
            argmax_unmeasured(measured, |k| learning.posteriors[k].sample(rng))
        }
        PolicyKind::ClassicUcb => {
            let total = learning.total_pulls;
            argmax_unmeasured(measured, |k| ucb_index(&learning.stats[k], total, ucb_alpha))
        }
        PolicyKind::Baseline => {
            let pick = rng.index(open);
            (0..measured.len())
                .filter(|&k| !measured[k])
                .nth(pick)
                .expect("pick < open")
        }
        PolicyKind::Oracle => argmax_unmeasured(measured, |k| true_rates[k]),
    };
    Ok(cell)
}
