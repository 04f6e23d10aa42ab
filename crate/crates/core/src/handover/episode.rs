use crate::env::draw_handover_outcome;
use crate::error::Result;
use crate::rng::RngStream;

use super::policy::{select_next_cell, LearningState, PolicyKind};
use super::{HandoverEnv, PolicyParams, PseudoReward, UserDraws};

/// One user's measurement loop.
///
/// `x_best` starts at `-inf` and `y_current` at `+inf`, so the first pass
/// through the loop always measures.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub n: usize,
    pub y_current: f64,
    pub x_best: f64,
    pub best_cell: Option<usize>,
    pub measured: Vec<bool>,
    pub m_hat: f64,
    pub c: f64,
}

impl EpisodeState {
    pub fn new(cells: usize, m_hat: f64, c: f64) -> Self {
        Self {
            n: 0,
            y_current: f64::INFINITY,
            x_best: f64::NEG_INFINITY,
            best_cell: None,
            measured: vec![false; cells],
            m_hat,
            c,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.n == self.measured.len()
    }

    /// Decision made by the opportunistic rule in the current state.
    pub fn opportunistic_decision(&self) -> Decision {
        if self.x_best < self.m_hat {
            if self.y_current > self.x_best {
                Decision::Measure { free: false }
            } else {
                Decision::Handover
            }
        } else if self.y_current >= self.m_hat + self.c {
            Decision::Measure { free: true }
        } else {
            Decision::Handover
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Measure { free: bool },
    Handover,
}

/// One measurement as seen at decision time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub n: usize,
    pub cell: usize,
    /// Measured target signal.
    pub x: f64,
    /// Serving signal received with the measurement.
    pub y: f64,
    pub x_best_before: f64,
    pub y_before: f64,
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub handover_target: usize,
    pub x_at_handover: f64,
    pub y_at_handover: f64,
    pub n_measurements: usize,
    pub success: bool,
    pub free_measurements: usize,
    /// Handover forced by exhausting the cells or the measurement budget.
    pub forced: bool,
    pub steps: Vec<StepLog>,
}

struct Episode<'a> {
    env: &'a HandoverEnv,
    params: &'a PolicyParams,
    draws: &'a UserDraws,
    state: EpisodeState,
    steps: Vec<StepLog>,
}

impl<'a> Episode<'a> {
    fn new(env: &'a HandoverEnv, params: &'a PolicyParams, draws: &'a UserDraws) -> Self {
        Self {
            env,
            params,
            draws,
            state: EpisodeState::new(env.num_cells(), params.m_hat, params.c),
            steps: Vec::new(),
        }
    }

    fn out_of_budget(&self) -> bool {
        self.state.exhausted()
            || self
                .params
                .measurement_budget
                .is_some_and(|b| self.state.n >= b)
    }

    fn measure(
        &mut self,
        policy: PolicyKind,
        learning: &mut LearningState,
        rng: &mut RngStream,
        free: bool,
    ) -> Result<()> {
        let cell = select_next_cell(
            policy,
            learning,
            &self.state.measured,
            self.env.true_rates(),
            self.params.ucb_alpha,
            rng,
        )?;
        let x = self.draws.neighbor[cell];
        let y = self.draws.serving_at(self.state.n);
        self.steps.push(StepLog {
            n: self.state.n,
            cell,
            x,
            y,
            x_best_before: self.state.x_best,
            y_before: self.state.y_current,
            free,
        });
        if x > self.state.x_best {
            self.state.x_best = x;
            self.state.best_cell = Some(cell);
        }
        self.state.y_current = y;
        self.state.n += 1;
        self.state.measured[cell] = true;
        let reward = match self.params.pseudo_reward {
            PseudoReward::ThresholdIndicator => x >= self.params.m_hat,
            PseudoReward::TargetBernoulli => {
                self.draws.reward_uniforms[cell] < self.env.curve.success(x)
            }
        };
        learning.update(cell, reward);
        Ok(())
    }

    fn handover(self, forced: bool) -> EpisodeResult {
        let target = self
            .state
            .best_cell
            .expect("the first loop iteration always measures");
        let mut outcome = self.draws.outcome.clone();
        let success = draw_handover_outcome(
            &self.env.curve,
            self.state.y_current,
            self.state.x_best,
            &mut outcome,
        );
        EpisodeResult {
            handover_target: target,
            x_at_handover: self.state.x_best,
            y_at_handover: self.state.y_current,
            n_measurements: self.state.n,
            success,
            free_measurements: self.steps.iter().filter(|s| s.free).count(),
            forced,
            steps: self.steps,
        }
    }
}

/// Measurement loop with the threshold-aware handover rule.
///
/// While the best target is below `M_hat`, keep measuring as long as the
/// serving cell is still stronger than it and hand over otherwise. Once a
/// target clears `M_hat`, further measurements are taken only while the
/// serving signal is at least `M_hat + c`; each such measurement is counted
/// as free.
pub fn run_episode_opportunistic(
    env: &HandoverEnv,
    params: &PolicyParams,
    draws: &UserDraws,
    learning: &mut LearningState,
    rng: &mut RngStream,
) -> Result<EpisodeResult> {
    let mut ep = Episode::new(env, params, draws);
    loop {
        if ep.state.n > 0 && ep.out_of_budget() {
            return Ok(ep.handover(true));
        }
        match ep.state.opportunistic_decision() {
            Decision::Measure { free } => {
                ep.measure(PolicyKind::OpportunisticTs, learning, rng, free)?
            }
            Decision::Handover => return Ok(ep.handover(false)),
        }
    }
}

/// Measurement loop with the conventional rule: hand over as soon as the
/// best measured target is stronger than the serving cell.
pub fn run_episode_baseline(
    policy: PolicyKind,
    env: &HandoverEnv,
    params: &PolicyParams,
    draws: &UserDraws,
    learning: &mut LearningState,
    rng: &mut RngStream,
) -> Result<EpisodeResult> {
    let mut ep = Episode::new(env, params, draws);
    loop {
        ep.measure(policy, learning, rng, false)?;
        if ep.state.x_best > ep.state.y_current {
            return Ok(ep.handover(false));
        }
        if ep.out_of_budget() {
            return Ok(ep.handover(true));
        }
    }
}

/// Dispatches to the loop that belongs to `policy`.
pub fn run_episode(
    policy: PolicyKind,
    env: &HandoverEnv,
    params: &PolicyParams,
    draws: &UserDraws,
    learning: &mut LearningState,
    rng: &mut RngStream,
) -> Result<EpisodeResult> {
    match policy {
        PolicyKind::OpportunisticTs => run_episode_opportunistic(env, params, draws, learning, rng),
        other => run_episode_baseline(other, env, params, draws, learning, rng),
    }
}

/// The opportunistic loop restricted to a single measurement: measure one
/// Thompson-selected cell and hand over to it.
pub fn opportunistic_ts_budget1(
    env: &HandoverEnv,
    params: &PolicyParams,
    draws: &UserDraws,
    learning: &mut LearningState,
    rng: &mut RngStream,
) -> Result<EpisodeResult> {
    let one = PolicyParams {
        measurement_budget: Some(1),
        ..*params
    };
    run_episode_opportunistic(env, &one, draws, learning, rng)
}
