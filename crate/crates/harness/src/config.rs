//! Experiment configuration: the TOML schema and its validation.
//!
//! [`ExperimentConfig`] mirrors the file one-to-one so that loading and
//! re-serialising gives back the same values. [`ExperimentConfig::resolve`]
//! checks every field and builds the core objects; errors name the key that
//! caused them.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use batt_core::analysis::optimal_epsilon;
use batt_core::bandit::BetaPosterior;
use batt_core::env::{FailureCurve, NeighborCellSet, ServingTraceParams, ThresholdGrid};
use batt_core::handover::{HandoverEnv, PolicyKind, PolicyParams, PseudoReward};
use batt_core::search::true_optimal_arm;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Threshold,
    Handover,
    Sweep,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Threshold => "threshold",
            ExperimentKind::Handover => "handover",
            ExperimentKind::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub env: EnvConfig,
    pub algo: AlgoConfig,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// `(signal dBm, failure probability)` knots of the failure curve.
    pub curve: Vec<[f64; 2]>,
    /// Serving level that starts a user's measurements; defaults to
    /// `m_hat + 2c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<f64>,
    pub grid: GridConfig,
    pub trace: TraceConfig,
    pub cells: Vec<CellConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub arms: usize,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub y_start: f64,
    pub drift_per_step: f64,
    pub noise_half_width: f64,
    pub c: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub mean: f64,
    pub half_width: f64,
}

/// A fixed exploration fraction or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSetting {
    Fixed(f64),
    Auto,
}

impl fmt::Display for EpsilonSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSetting::Fixed(v) => write!(f, "{v}"),
            EpsilonSetting::Auto => f.write_str("auto"),
        }
    }
}

impl Serialize for EpsilonSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EpsilonSetting::Fixed(v) => s.serialize_f64(*v),
            EpsilonSetting::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for EpsilonSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(EpsilonSetting::Fixed(v)),
            Raw::Text(t) if t == "auto" => Ok(EpsilonSetting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "epsilon must be a number or \"auto\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoRewardSetting {
    ThresholdIndicator,
    TargetBernoulli,
}

impl From<PseudoRewardSetting> for PseudoReward {
    fn from(s: PseudoRewardSetting) -> Self {
        match s {
            PseudoRewardSetting::ThresholdIndicator => PseudoReward::ThresholdIndicator,
            PseudoRewardSetting::TargetBernoulli => PseudoReward::TargetBernoulli,
        }
    }
}

fn default_ucb_alpha() -> f64 {
    batt_core::bandit::DEFAULT_UCB_ALPHA
}

fn default_prior() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_pseudo_reward() -> PseudoRewardSetting {
    PseudoRewardSetting::ThresholdIndicator
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    /// Target success probability `R`. Give this or `failure_tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_threshold: Option<f64>,
    /// Tolerated failure probability; `R = 1 - failure_tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_tolerance: Option<f64>,
    pub epsilon: EpsilonSetting,
    /// Gap used by `epsilon = "auto"`; derived from the grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub m_hat: f64,
    pub c: f64,
    #[serde(default = "default_ucb_alpha")]
    pub ucb_alpha: f64,
    #[serde(default = "default_prior")]
    pub prior: [f64; 2],
    #[serde(default = "default_pseudo_reward")]
    pub pseudo_reward: PseudoRewardSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_budget: Option<usize>,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trials: u64,
    /// Rounds per threshold trial.
    pub rounds: u64,
    /// Users per handover trial.
    pub users: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Handover policies to compare, by name; all five when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<String>>,
    /// Write the per-round and per-user CSVs.
    #[serde(default = "default_true")]
    pub write_records: bool,
    /// Spacing of the rows in the series CSVs.
    #[serde(default = "default_stride")]
    pub series_stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<EpsilonSetting>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_tolerance: Option<Vec<f64>>,
    /// Neighbour counts; a point with `k` keeps the first `k` cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
}

/// The default experiment setup, shipped as `configs/default.toml`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e
                .span()
                .map(|s| field_at(text, s.start))
                .unwrap_or_else(|| "<file>".into());
            ConfigError::new(field, msg)
        })
    }
}

/// Best-effort name of the key whose value starts near `offset`.
fn field_at(text: &str, offset: usize) -> String {
    let head = &text[..offset.min(text.len())];
    let mut table = String::new();
    for line in head.lines() {
        let t = line.trim();
        if t.starts_with('[') {
            table = t.trim_matches(|c| c == '[' || c == ']').to_string();
        }
    }
    let line = head.rsplit('\n').next().unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    match (table.is_empty(), key.is_empty() || line.trim_start().starts_with('[')) {
        (true, true) => "<file>".into(),
        (true, false) => key.into(),
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn default_setup() -> Self {
        DEFAULT_CONFIG.parse().expect("shipped default config parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Success target `R`, from whichever of the two keys is set.
    pub fn success_threshold(&self) -> Result<f64, ConfigError> {
        let r = match (self.algo.success_threshold, self.algo.failure_tolerance) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "algo.failure_tolerance",
                    "set either success_threshold or failure_tolerance, not both",
                ))
            }
            (Some(r), None) => r,
            (None, Some(tol)) => {
                if !(0.0..=1.0).contains(&tol) {
                    return Err(ConfigError::new(
                        "algo.failure_tolerance",
                        format!("{tol} is outside [0, 1]"),
                    ));
                }
                1.0 - tol
            }
            (None, None) => {
                return Err(ConfigError::new(
                    "algo.success_threshold",
                    "one of success_threshold or failure_tolerance is required",
                ))
            }
        };
        if !(0.0..=1.0).contains(&r) {
            return Err(ConfigError::new(
                "algo.success_threshold",
                format!("{r} is outside [0, 1]"),
            ));
        }
        Ok(r)
    }

    /// Checks every field and builds the core objects.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let run = &self.run;
        if run.trials == 0 {
            return Err(ConfigError::new("run.trials", "must be at least 1"));
        }
        if run.series_stride == 0 {
            return Err(ConfigError::new("run.series_stride", "must be at least 1"));
        }
        let needs_threshold = self.uses(ExperimentKind::Threshold);
        let needs_handover = self.uses(ExperimentKind::Handover);
        if needs_threshold && run.rounds == 0 {
            return Err(ConfigError::new("run.rounds", "must be at least 1"));
        }
        if needs_handover && run.users == 0 {
            return Err(ConfigError::new("run.users", "must be at least 1"));
        }

        let knots = self.env.curve.iter().map(|k| (k[0], k[1])).collect();
        let curve = FailureCurve::new(knots).map_err(|e| ConfigError::core("env.curve", e))?;
        let g = self.env.grid;
        if g.arms == 0 {
            return Err(ConfigError::new("env.grid.arms", "must be at least 1"));
        }
        if g.z_min.partial_cmp(&g.z_max) != Some(std::cmp::Ordering::Less) && g.arms > 1 {
            return Err(ConfigError::new("env.grid.z_max", "must exceed z_min"));
        }
        let grid = ThresholdGrid::from_curve(&curve, g.z_min, g.z_max, g.arms)
            .map_err(|e| ConfigError::core("env.grid", e))?;

        let threshold = self.success_threshold()?;
        let epsilon = match self.algo.epsilon {
            EpsilonSetting::Fixed(e) => {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(ConfigError::new(
                        "algo.epsilon",
                        format!("{e} is outside (0, 1]"),
                    ));
                }
                e
            }
            EpsilonSetting::Auto if needs_threshold => {
                self.auto_epsilon(&grid, threshold, run.rounds)?
            }
            // Unused by handover runs.
            EpsilonSetting::Auto => 1.0,
        };
        if needs_threshold && grid.success_probs().iter().all(|&p| p < threshold) {
            return Err(ConfigError::new(
                "algo.success_threshold",
                format!("no grid arm reaches success {threshold}"),
            ));
        }

        let a = &self.algo;
        let prior = BetaPosterior::new(a.prior[0], a.prior[1])
            .map_err(|e| ConfigError::core("algo.prior", e))?;
        let params = PolicyParams {
            m_hat: a.m_hat,
            c: a.c,
            ucb_alpha: a.ucb_alpha,
            prior,
            pseudo_reward: a.pseudo_reward.into(),
            measurement_budget: a.measurement_budget,
        };
        if !a.m_hat.is_finite() {
            return Err(ConfigError::new("algo.m_hat", "must be finite"));
        }
        if !(a.c >= 0.0 && a.c.is_finite()) {
            return Err(ConfigError::new("algo.c", "must be finite and nonnegative"));
        }
        if !(a.ucb_alpha > 0.0 && a.ucb_alpha.is_finite()) {
            return Err(ConfigError::new("algo.ucb_alpha", "must be positive"));
        }
        if a.measurement_budget == Some(0) {
            return Err(ConfigError::new("algo.measurement_budget", "must be at least 1"));
        }

        if self.env.cells.is_empty() {
            return Err(ConfigError::new("env.cells", "need at least one neighbour cell"));
        }
        let signals: Vec<(f64, f64)> =
            self.env.cells.iter().map(|c| (c.mean, c.half_width)).collect();
        let cells = NeighborCellSet::calibrated(&curve, &signals)
            .map_err(|e| ConfigError::core("env.cells", e))?;
        let t = self.env.trace;
        let trace = ServingTraceParams {
            y_start: t.y_start,
            drift_per_step: t.drift_per_step,
            noise_half_width: t.noise_half_width,
            c: t.c,
            max_steps: t.max_steps,
        };
        let trigger = self.env.trigger.unwrap_or(a.m_hat + 2.0 * a.c);
        let handover = HandoverEnv::new(curve.clone(), cells, trace, trigger)
            .map_err(|e| ConfigError::core("env.trace", e))?;

        let policies = match &run.policies {
            None => PolicyKind::ALL.to_vec(),
            Some(names) if names.is_empty() => {
                return Err(ConfigError::new("run.policies", "list is empty"))
            }
            Some(names) => names
                .iter()
                .map(|n| {
                    n.parse::<PolicyKind>()
                        .map_err(|_| ConfigError::new("run.policies", format!("unknown policy {n:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };

        if self.experiment == ExperimentKind::Sweep {
            self.check_sweep()?;
        }

        Ok(Resolved {
            curve,
            grid,
            threshold,
            epsilon,
            handover,
            params,
            policies,
        })
    }

    fn uses(&self, kind: ExperimentKind) -> bool {
        self.experiment == kind
            || (self.experiment == ExperimentKind::Sweep
                && self.sweep.as_ref().is_some_and(|s| s.base == kind))
    }

    /// Closed-form exploration fraction, raised if needed so every searched
    /// arm gets at least one pull.
    fn auto_epsilon(
        &self,
        grid: &ThresholdGrid,
        threshold: f64,
        rounds: u64,
    ) -> Result<f64, ConfigError> {
        let delta = match self.algo.delta {
            Some(d) => d,
            None => grid_delta(grid, threshold).ok_or_else(|| {
                ConfigError::new(
                    "algo.epsilon",
                    "\"auto\" needs algo.delta: the grid gives no positive gap",
                )
            })?,
        };
        if delta.is_nan() || delta <= 0.0 {
            return Err(ConfigError::new("algo.delta", "must be positive"));
        }
        let arms = grid.len();
        if arms < 2 {
            return Ok(1.0);
        }
        let eps = optimal_epsilon(arms, rounds, delta)
            .map_err(|e| ConfigError::core("algo.epsilon", e))?;
        let floor = (arms as f64).log2() / rounds as f64;
        Ok(eps.max(floor).min(1.0))
    }

    fn check_sweep(&self) -> Result<(), ConfigError> {
        let Some(s) = &self.sweep else {
            return Err(ConfigError::new("sweep", "experiment = \"sweep\" needs a [sweep] table"));
        };
        if s.base == ExperimentKind::Sweep {
            return Err(ConfigError::new("sweep.base", "must be threshold or handover"));
        }
        let lists = [
            ("sweep.c", s.c.as_ref().map(Vec::len)),
            ("sweep.epsilon", s.epsilon.as_ref().map(Vec::len)),
            ("sweep.failure_tolerance", s.failure_tolerance.as_ref().map(Vec::len)),
            ("sweep.cells", s.cells.as_ref().map(Vec::len)),
        ];
        if lists.iter().all(|(_, n)| n.is_none()) {
            return Err(ConfigError::new("sweep", "no parameter list given"));
        }
        for (field, n) in lists {
            if n == Some(0) {
                return Err(ConfigError::new(field, "list is empty"));
            }
        }
        if let Some(ks) = &s.cells {
            for &k in ks {
                if k == 0 || k > self.env.cells.len() {
                    return Err(ConfigError::new(
                        "sweep.cells",
                        format!("{k} is outside 1..={}", self.env.cells.len()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `min(r_M - R, D / 2)` where `D` is the smallest gap between `r_M` and any
/// other arm. `None` when either part is not positive.
pub fn grid_delta(grid: &ThresholdGrid, threshold: f64) -> Option<f64> {
    let m = true_optimal_arm(grid, threshold).ok()?;
    let probs = grid.success_probs();
    let big_delta = probs[m] - threshold;
    let d = probs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != m)
        .map(|(_, &p)| (probs[m] - p).abs())
        .fold(f64::INFINITY, f64::min);
    let delta = big_delta.min(d / 2.0);
    (delta > 0.0 && delta.is_finite()).then_some(delta)
}

/// Core objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub curve: FailureCurve,
    pub grid: ThresholdGrid,
    pub threshold: f64,
    pub epsilon: f64,
    pub handover: HandoverEnv,
    pub params: PolicyParams,
    pub policies: Vec<PolicyKind>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let cfg = ExperimentConfig::default_setup();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.grid.len(), 81);
        assert_eq!(r.handover.num_cells(), 9);
        assert!((r.threshold - 0.97).abs() < 1e-12);
        assert_eq!(r.handover.trigger, -112.0);
    }

    #[test]
    fn default_cells_reproduce_reward_vector() {
        let r = ExperimentConfig::default_setup().resolve().unwrap();
        let expected = [0.76, 0.88, 0.90, 0.91, 0.92, 0.93, 0.94, 0.95, 0.97];
        for (got, want) in r.handover.true_rates().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn field_lookup_names_table_and_key() {
        let text = "experiment = \"x\"\n[algo]\nm_hat = \"oops\"\n";
        let off = text.find("\"oops\"").unwrap();
        assert_eq!(field_at(text, off), "algo.m_hat");
        assert_eq!(field_at(text, 13), "experiment");
    }

    #[test]
    fn both_thresholds_rejected() {
        let mut cfg = ExperimentConfig::default_setup();
        cfg.algo.success_threshold = Some(0.9);
        let err = cfg.resolve().unwrap_err();
        assert_eq!(err.field, "algo.failure_tolerance");
    }

    #[test]
    fn auto_epsilon_uses_delta() {
        let mut cfg = ExperimentConfig::default_setup();
        cfg.experiment = ExperimentKind::Threshold;
        cfg.algo.epsilon = EpsilonSetting::Auto;
        cfg.algo.delta = Some(0.05);
        let r = cfg.resolve().unwrap();
        assert!((r.epsilon - 0.310_987_5).abs() < 1e-6, "{}", r.epsilon);
    }

    #[test]
    fn auto_epsilon_without_gap_is_an_error() {
        let mut cfg = ExperimentConfig::default_setup();
        cfg.experiment = ExperimentKind::Threshold;
        cfg.algo.epsilon = EpsilonSetting::Auto;
        cfg.algo.delta = None;
        // The default grid's optimal arm sits exactly on R.
        assert_eq!(cfg.resolve().unwrap_err().field, "algo.epsilon");
    }

    #[test]
    fn grid_delta_examples() {
        let grid = ThresholdGrid::from_probs(vec![0.5, 0.7, 0.9]).unwrap();
        let d = grid_delta(&grid, 0.65).unwrap();
        assert!((d - 0.05).abs() < 1e-12);
        assert!(grid_delta(&grid, 0.7).is_none());
    }
}
