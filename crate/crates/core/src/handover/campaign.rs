use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::episode::run_episode;
use super::policy::{LearningState, PolicyKind};
use super::{HandoverEnv, PolicyParams, UserDraws};

/// Per-user outcome row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRecord {
    pub user: u64,
    pub target: usize,
    pub n_measurements: usize,
    pub free_measurements: usize,
    pub y_at_handover: f64,
    pub x_at_handover: f64,
    pub success: bool,
    pub cum_successes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignMetrics {
    pub policy: PolicyKind,
    pub records: Vec<UserRecord>,
    /// `oracle cumulative successes - policy cumulative successes` after each
    /// user, when an oracle reference was run alongside.
    pub cum_regret_vs_oracle: Option<Vec<f64>>,
    pub total_measurements: u64,
    pub posterior_updates: u64,
}

impl CampaignMetrics {
    pub fn successes(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cum_successes)
    }

    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.successes() as f64 / self.records.len() as f64
        }
    }

    pub fn free_measurements(&self) -> u64 {
        self.records.iter().map(|r| r.free_measurements as u64).sum()
    }
}

/// Cumulative success gap `reference - other` after each user.
pub fn regret_series(reference: &CampaignMetrics, other: &CampaignMetrics) -> Vec<f64> {
    reference
        .records
        .iter()
        .zip(&other.records)
        .map(|(a, b)| a.cum_successes as f64 - b.cum_successes as f64)
        .collect()
}

struct Runner {
    policy: PolicyKind,
    learning: LearningState,
    rng: RngStream,
    records: Vec<UserRecord>,
    successes: u64,
    measurements: u64,
}

/// Runs several policies over the same `users` environments in lock step.
///
/// Every policy keeps its own learner, carried from one user to the next.
/// Policy `i` draws its decisions from `policy_stream.substream(i)`; the
/// environment comes from `env_stream`. If [`PolicyKind::Oracle`] is among
/// `policies`, every result carries its regret against the oracle.
pub fn run_campaigns(
    policies: &[PolicyKind],
    env: &HandoverEnv,
    params: &PolicyParams,
    users: u64,
    env_stream: &RngStream,
    policy_stream: &RngStream,
) -> Result<Vec<CampaignMetrics>> {
    let streams: Vec<RngStream> = (0..policies.len())
        .map(|i| policy_stream.substream(i as u64))
        .collect();
    run_campaigns_with_streams(policies, env, params, users, env_stream, streams)
}

fn run_campaigns_with_streams(
    policies: &[PolicyKind],
    env: &HandoverEnv,
    params: &PolicyParams,
    users: u64,
    env_stream: &RngStream,
    streams: Vec<RngStream>,
) -> Result<Vec<CampaignMetrics>> {
    params.validate()?;
    if users == 0 {
        return Err(Error::invalid("campaign", "needs at least one user"));
    }
    let mut runners: Vec<Runner> = policies
        .iter()
        .zip(streams)
        .map(|(&policy, rng)| Runner {
            policy,
            learning: LearningState::new(env.num_cells(), params.prior),
            rng,
            records: Vec::with_capacity(users as usize),
            successes: 0,
            measurements: 0,
        })
        .collect();

    for user in 0..users {
        let draws = UserDraws::generate(env, env_stream, user)?;
        for r in &mut runners {
            let ep = run_episode(r.policy, env, params, &draws, &mut r.learning, &mut r.rng)?;
            r.successes += u64::from(ep.success);
            r.measurements += ep.n_measurements as u64;
            r.records.push(UserRecord {
                user,
                target: ep.handover_target,
                n_measurements: ep.n_measurements,
                free_measurements: ep.free_measurements,
                y_at_handover: ep.y_at_handover,
                x_at_handover: ep.x_at_handover,
                success: ep.success,
                cum_successes: r.successes,
            });
        }
    }

    let mut out: Vec<CampaignMetrics> = runners
        .into_iter()
        .map(|r| CampaignMetrics {
            policy: r.policy,
            records: r.records,
            cum_regret_vs_oracle: None,
            total_measurements: r.measurements,
            posterior_updates: r.learning.total_pulls(),
        })
        .collect();
    if let Some(oracle) = out.iter().position(|m| m.policy == PolicyKind::Oracle) {
        let reference = out[oracle].clone();
        for m in &mut out {
            m.cum_regret_vs_oracle = Some(regret_series(&reference, m));
        }
    }
    Ok(out)
}

/// One policy's campaign, with the oracle run alongside as the regret
/// reference. `policy_stream` drives the policy's own decisions.
pub fn run_campaign(
    policy: PolicyKind,
    env: &HandoverEnv,
    params: &PolicyParams,
    users: u64,
    env_stream: &RngStream,
    policy_stream: RngStream,
) -> Result<CampaignMetrics> {
    let (policies, streams) = if policy == PolicyKind::Oracle {
        (vec![policy], vec![policy_stream])
    } else {
        // The oracle's decisions are deterministic; its stream is never read.
        let spare = policy_stream.substream(u64::MAX);
        (vec![policy, PolicyKind::Oracle], vec![policy_stream, spare])
    };
    let mut out = run_campaigns_with_streams(&policies, env, params, users, env_stream, streams)?;
    Ok(out.swap_remove(0))
}
