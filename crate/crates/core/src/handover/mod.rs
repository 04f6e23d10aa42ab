//! Target-cell measurement ordering for a single handover, and campaigns of
//! many users sharing one learner.
//!
//! Each user's environment randomness (serving trace, neighbour signals,
//! pseudo-reward and outcome uniforms) is pre-drawn into [`UserDraws`] from
//! streams keyed by the user index. Policies never touch those streams, so
//! any two policies run against the same environment stream see the same
//! world and differ only through their decisions.

mod campaign;
mod episode;
mod policy;

pub use campaign::{regret_series, run_campaign, run_campaigns, CampaignMetrics, UserRecord};
pub use episode::{
    opportunistic_ts_budget1, run_episode, run_episode_baseline, run_episode_opportunistic,
    EpisodeResult, EpisodeState, StepLog,
};
pub use policy::{select_next_cell, LearningState, PolicyKind};

use crate::bandit::{BetaPosterior, DEFAULT_UCB_ALPHA};
use crate::env::{gen_serving_trace, FailureCurve, NeighborCellSet, ServingTraceParams};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Everything about the world a handover happens in.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverEnv {
    pub curve: FailureCurve,
    pub cells: NeighborCellSet,
    pub trace: ServingTraceParams,
    /// Measurement starts at the first serving value strictly below this.
    pub trigger: f64,
    rates: Vec<f64>,
}

impl HandoverEnv {
    pub fn new(
        curve: FailureCurve,
        cells: NeighborCellSet,
        trace: ServingTraceParams,
        trigger: f64,
    ) -> Result<Self> {
        trace.validate()?;
        if !trigger.is_finite() {
            return Err(Error::invalid("handover env", "trigger must be finite"));
        }
        let rates = cells.true_rates();
        Ok(Self {
            curve,
            cells,
            trace,
            trigger,
            rates,
        })
    }

    pub fn true_rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}

/// What the learner is told after measuring a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoReward {
    /// `1{X >= M_hat}`: whether the measured signal clears the threshold.
    ThresholdIndicator,
    /// A Bernoulli draw with the target leg's success probability at `X`.
    TargetBernoulli,
}

/// Learner and decision-rule settings shared by all policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub m_hat: f64,
    pub c: f64,
    pub ucb_alpha: f64,
    pub prior: BetaPosterior,
    pub pseudo_reward: PseudoReward,
    /// Forces a handover after this many measurements.
    pub measurement_budget: Option<usize>,
}

impl PolicyParams {
    pub fn new(m_hat: f64, c: f64) -> Self {
        Self {
            m_hat,
            c,
            ucb_alpha: DEFAULT_UCB_ALPHA,
            prior: BetaPosterior::uniform(),
            pseudo_reward: PseudoReward::ThresholdIndicator,
            measurement_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m_hat.is_finite() || !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(
                "policy params",
                format!("M_hat = {} and c = {} must be finite, c >= 0", self.m_hat, self.c),
            ));
        }
        if self.ucb_alpha.is_nan() || self.ucb_alpha <= 0.0 {
            return Err(Error::invalid("policy params", "UCB alpha must be positive"));
        }
        if self.measurement_budget == Some(0) {
            return Err(Error::invalid("policy params", "measurement budget must be positive"));
        }
        Ok(())
    }
}

/// Pre-drawn environment randomness for one user.
#[derive(Debug, Clone)]
pub struct UserDraws {
    /// Serving signal from the trigger point on; `serving[n]` is observed
    /// together with the `n`-th measurement.
    pub serving: Vec<f64>,
    /// Signal each neighbour would show if measured.
    pub neighbor: Vec<f64>,
    /// Per-cell uniforms for [`PseudoReward::TargetBernoulli`].
    pub reward_uniforms: Vec<f64>,
    /// Feeds the handover outcome draw.
    pub outcome: RngStream,
}

const SERVING_LABEL: u64 = 0;
const NEIGHBOR_LABEL: u64 = 1;
const REWARD_LABEL: u64 = 2;
const OUTCOME_LABEL: u64 = 3;

impl UserDraws {
    pub fn generate(env: &HandoverEnv, env_stream: &RngStream, user: u64) -> Result<Self> {
        let user_stream = env_stream.substream(user);
        let trace = gen_serving_trace(&env.trace, &mut user_stream.substream(SERVING_LABEL))?;
        // Without a crossing the user is triggered on the last sample.
        let start = trace
            .iter()
            .position(|&y| y < env.trigger)
            .unwrap_or(trace.len() - 1);
        let serving = trace[start..].to_vec();

        let mut nrng = user_stream.substream(NEIGHBOR_LABEL);
        let neighbor = (0..env.num_cells())
            .map(|k| env.cells.sample_signal(k, &mut nrng))
            .collect::<Result<Vec<_>>>()?;

        let mut rrng = user_stream.substream(REWARD_LABEL);
        let reward_uniforms = (0..env.num_cells()).map(|_| rrng.uniform()).collect();

        Ok(Self {
            serving,
            neighbor,
            reward_uniforms,
            outcome: user_stream.substream(OUTCOME_LABEL),
        })
    }

    /// Serving signal at measurement `n`; holds the last value past the end.
    pub fn serving_at(&self, n: usize) -> f64 {
        self.serving[n.min(self.serving.len() - 1)]
    }
}
