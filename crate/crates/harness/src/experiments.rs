//! Multi-trial threshold, handover and sweep experiments.
//!
//! Trial `t` draws all of its randomness from
//! `RngStream::new(seed, 0).substream(t)`, so results do not depend on how
//! trials are scheduled. Trials run in parallel in chunks; each chunk is
//! collected in trial order before anything is written, which keeps the
//! output files byte-identical across reruns and thread counts.

use std::path::Path;

use batt_core::handover::{run_campaigns, CampaignMetrics, PolicyKind};
use batt_core::search::{
    eps_binary_search_first, uniform_search_first, Feedback, SearchConfig, ThresholdRun,
    ThresholdRunStats,
};
use batt_core::RngStream;
use rayon::prelude::*;

use crate::config::{EpsilonSetting, ExperimentConfig, ExperimentKind, Resolved};
use crate::error::{ConfigError, Result};
use crate::output::{self, num, CsvWriter, SummaryRow};

/// Root stream of trial `t`.
pub fn trial_stream(seed: u64, trial: u64) -> RngStream {
    RngStream::new(seed, 0).substream(trial)
}

/// Runs `run` for every trial and hands the results to `sink` in trial order.
fn for_each_trial<T, R, S>(trials: u64, run: R, mut sink: S) -> Result<()>
where
    T: Send,
    R: Fn(u64) -> Result<T> + Sync,
    S: FnMut(u64, T) -> Result<()>,
{
    let chunk = rayon::current_num_threads().max(1) as u64;
    let mut start = 0;
    while start < trials {
        let end = (start + chunk).min(trials);
        let results: Vec<Result<T>> = (start..end).into_par_iter().map(&run).collect();
        for (t, r) in (start..end).zip(results) {
            sink(t, r?)?;
        }
        start = end;
    }
    Ok(())
}

/// Indices `stride-1, 2*stride-1, ...` below `len`, always ending at `len-1`.
fn sample_points(len: usize, stride: u64) -> Vec<usize> {
    let stride = stride.max(1) as usize;
    let mut pts: Vec<usize> = (stride - 1..len).step_by(stride).collect();
    if len > 0 && pts.last() != Some(&(len - 1)) {
        pts.push(len - 1);
    }
    pts
}

// ---------------------------------------------------------------- threshold

pub const SEARCHERS: [&str; 2] = ["eps_bsf", "uniform"];

/// One trial of both searchers, run on the same feedback stream.
pub fn threshold_trial(res: &Resolved, rounds: u64, seed: u64, trial: u64) -> Result<[ThresholdRun; 2]> {
    let cfg = SearchConfig::new(res.grid.len(), rounds, res.threshold, res.epsilon)?;
    let stream = trial_stream(seed, trial).substream(0);
    let bsf = eps_binary_search_first(&cfg, &res.grid, &mut Feedback::Bernoulli(stream.clone()))?;
    let uniform = uniform_search_first(&cfg, &res.grid, &mut Feedback::Bernoulli(stream))?;
    Ok([bsf, uniform])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTrialSummary {
    pub trial: u64,
    /// Indexed like [`SEARCHERS`].
    pub stats: [ThresholdRunStats; 2],
    /// `(round, cumulative violations, cumulative signed difference)` at the
    /// sampled rounds, per searcher.
    pub series: [Vec<(u64, u64, f64)>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub epsilon: f64,
    pub threshold: f64,
    pub optimal_arm: usize,
    pub trials: Vec<ThresholdTrialSummary>,
}

impl ThresholdReport {
    fn values(&self, s: usize, f: impl Fn(&ThresholdRunStats) -> f64) -> Vec<f64> {
        self.trials.iter().map(|t| f(&t.stats[s])).collect()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for (s, name) in SEARCHERS.iter().enumerate() {
            let metrics: [(&str, Vec<f64>); 6] = [
                ("violations", self.values(s, |st| st.violations as f64)),
                ("abs_cum_signed_diff", self.values(s, |st| st.cum_signed_diff.abs())),
                ("cum_signed_diff", self.values(s, |st| st.cum_signed_diff)),
                ("coarse_regret", self.values(s, |st| st.coarse_regret as f64)),
                ("selected_arm", self.values(s, |st| st.selected_arm as f64)),
                ("exploration_rounds", self.values(s, |st| st.exploration_rounds as f64)),
            ];
            for (metric, vals) in metrics {
                rows.push(SummaryRow::from_values(name, metric, &vals));
            }
        }
        rows
    }

    /// Mean of one statistic over trials.
    pub fn mean(&self, searcher: usize, f: impl Fn(&ThresholdRunStats) -> f64) -> f64 {
        output::mean_std(&self.values(searcher, f)).0
    }
}

struct ThresholdFiles {
    rounds: [CsvWriter; 2],
    trials: CsvWriter,
}

impl ThresholdFiles {
    fn open(dir: &Path) -> Result<Self> {
        let rounds = [
            output::create(
                dir,
                "threshold_rounds_eps_bsf.csv",
                "threshold-rounds",
                &["trial", "round", "arm", "Z_dBm", "outcome", "phase"],
            )?,
            output::create(
                dir,
                "threshold_rounds_uniform.csv",
                "threshold-rounds",
                &["trial", "round", "arm", "Z_dBm", "outcome", "phase"],
            )?,
        ];
        let trials = output::create(
            dir,
            "threshold_trials.csv",
            "threshold-trials",
            &[
                "trial",
                "searcher",
                "selected_arm",
                "optimal_arm",
                "searched_arms",
                "exploration_rounds",
                "violations",
                "cum_signed_diff",
                "coarse_regret",
            ],
        )?;
        Ok(Self { rounds, trials })
    }
}

/// Runs the threshold experiment; writes its CSVs under `out` when given.
pub fn run_threshold(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ThresholdReport> {
    let res = cfg.resolve()?;
    let run = &cfg.run;
    let optimal_arm = batt_core::search::true_optimal_arm(&res.grid, res.threshold)?;
    let mut files = match out {
        Some(dir) => Some(ThresholdFiles::open(dir)?),
        None => None,
    };
    let mut trials = Vec::with_capacity(run.trials as usize);
    for_each_trial(
        run.trials,
        |t| threshold_trial(&res, run.rounds, run.seed, t),
        |t, runs| {
            if let Some(f) = files.as_mut() {
                write_threshold_trial(f, &res, t, &runs, run.write_records)?;
            }
            let pts = sample_points(run.rounds as usize, run.series_stride);
            let series = runs.each_ref().map(|r| {
                let v = r.violation_series(&res.grid, res.threshold);
                let d = r.signed_diff_series(&res.grid);
                pts.iter().map(|&i| (i as u64 + 1, v[i], d[i])).collect()
            });
            let [a, b] = runs;
            trials.push(ThresholdTrialSummary {
                trial: t,
                stats: [a.stats, b.stats],
                series,
            });
            Ok(())
        },
    )?;
    let report = ThresholdReport {
        epsilon: res.epsilon,
        threshold: res.threshold,
        optimal_arm,
        trials,
    };
    if let (Some(dir), Some(mut f)) = (out, files) {
        for w in f.rounds.iter_mut() {
            w.flush()?;
        }
        f.trials.flush()?;
        output::write_summary(dir, "threshold_summary.csv", "threshold-summary", &report.summary())?;
        write_threshold_series(dir, &report)?;
    }
    Ok(report)
}

fn write_threshold_trial(
    f: &mut ThresholdFiles,
    res: &Resolved,
    trial: u64,
    runs: &[ThresholdRun; 2],
    records: bool,
) -> Result<()> {
    let t = trial.to_string();
    for (s, r) in runs.iter().enumerate() {
        if records {
            for rec in &r.rounds {
                f.rounds[s].write_record([
                    t.as_str(),
                    &rec.round.to_string(),
                    &rec.arm.to_string(),
                    &num(res.grid.level(rec.arm)),
                    &num(rec.reward),
                    rec.phase.as_str(),
                ])?;
            }
        }
        let st = &r.stats;
        let searched: Vec<String> = st.searched.iter().map(usize::to_string).collect();
        f.trials.write_record([
            t.as_str(),
            SEARCHERS[s],
            &st.selected_arm.to_string(),
            &st.optimal_arm.to_string(),
            &searched.join(" "),
            &st.exploration_rounds.to_string(),
            &st.violations.to_string(),
            &num(st.cum_signed_diff),
            &st.coarse_regret.to_string(),
        ])?;
    }
    Ok(())
}

fn write_threshold_series(dir: &Path, report: &ThresholdReport) -> Result<()> {
    let mut w = output::create(
        dir,
        "threshold_series.csv",
        "threshold-series",
        &[
            "searcher",
            "round",
            "violations_mean",
            "violations_stddev",
            "cum_signed_diff_mean",
            "cum_signed_diff_stddev",
        ],
    )?;
    for (s, name) in SEARCHERS.iter().enumerate() {
        let Some(first) = report.trials.first() else {
            continue;
        };
        for (i, &(round, _, _)) in first.series[s].iter().enumerate() {
            let v: Vec<f64> = report.trials.iter().map(|t| t.series[s][i].1 as f64).collect();
            let d: Vec<f64> = report.trials.iter().map(|t| t.series[s][i].2).collect();
            let (vm, vs) = output::mean_std(&v);
            let (dm, ds) = output::mean_std(&d);
            w.write_record([*name, &round.to_string(), &num(vm), &num(vs), &num(dm), &num(ds)])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ----------------------------------------------------------------- handover

/// One trial of every configured policy over the same users.
pub fn handover_trial(res: &Resolved, users: u64, seed: u64, trial: u64) -> Result<Vec<CampaignMetrics>> {
    let root = trial_stream(seed, trial);
    let env_stream = root.substream(1);
    let policy_stream = root.substream(2);
    Ok(run_campaigns(
        &res.policies,
        &res.handover,
        &res.params,
        users,
        &env_stream,
        &policy_stream,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrial {
    pub policy: PolicyKind,
    pub users: u64,
    pub successes: u64,
    pub free_measurements: u64,
    pub total_measurements: u64,
    /// `(users so far, cumulative regret against the oracle)` at the sampled
    /// users; empty when the oracle was not run.
    pub regret: Vec<(u64, f64)>,
}

impl PolicyTrial {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.users as f64
    }

    fn from_metrics(m: &CampaignMetrics, stride: u64) -> Self {
        let regret = m
            .cum_regret_vs_oracle
            .as_ref()
            .map(|series| {
                sample_points(series.len(), stride)
                    .into_iter()
                    .map(|i| (i as u64 + 1, series[i]))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            policy: m.policy,
            users: m.records.len() as u64,
            successes: m.successes(),
            free_measurements: m.free_measurements(),
            total_measurements: m.total_measurements,
            regret,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverReport {
    pub policies: Vec<PolicyKind>,
    /// `trials[t][i]` is policy `policies[i]` in trial `t`.
    pub trials: Vec<Vec<PolicyTrial>>,
}

impl HandoverReport {
    fn column(&self, policy: PolicyKind, f: impl Fn(&PolicyTrial) -> f64) -> Option<Vec<f64>> {
        let i = self.policies.iter().position(|&p| p == policy)?;
        Some(self.trials.iter().map(|t| f(&t[i])).collect())
    }

    /// Per-trial success rates of `policy`.
    pub fn success_rates(&self, policy: PolicyKind) -> Option<Vec<f64>> {
        self.column(policy, PolicyTrial::success_rate)
    }

    pub fn mean_success(&self, policy: PolicyKind) -> Option<f64> {
        self.success_rates(policy).map(|v| output::mean_std(&v).0)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for &p in &self.policies {
            let name = p.name();
            let per_user = |x: u64, pt: &PolicyTrial| x as f64 / pt.users as f64;
            let mut metrics: Vec<(&str, Vec<f64>)> = vec![
                ("success_rate", self.column(p, PolicyTrial::success_rate).unwrap()),
                (
                    "meas_per_user",
                    self.column(p, |pt| per_user(pt.total_measurements, pt)).unwrap(),
                ),
                (
                    "free_meas_per_user",
                    self.column(p, |pt| per_user(pt.free_measurements, pt)).unwrap(),
                ),
            ];
            if self.policies.contains(&PolicyKind::Oracle) {
                let regret = self
                    .column(p, |pt| pt.regret.last().map_or(0.0, |r| r.1))
                    .unwrap();
                metrics.push(("final_regret", regret));
            }
            for (metric, vals) in metrics {
                rows.push(SummaryRow::from_values(name, metric, &vals));
            }
        }
        rows
    }
}

struct HandoverFiles {
    users: Option<CsvWriter>,
    trials: CsvWriter,
}

/// Runs the handover experiment; writes its CSVs under `out` when given.
pub fn run_handover(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<HandoverReport> {
    let res = cfg.resolve()?;
    let run = &cfg.run;
    let mut files = match out {
        Some(dir) => Some(HandoverFiles {
            users: if run.write_records {
                Some(output::create(
                    dir,
                    "handover_users.csv",
                    "handover-users",
                    &[
                        "trial", "user", "policy", "n_meas", "free_meas", "y_ho", "x_ho",
                        "success", "cum_success",
                    ],
                )?)
            } else {
                None
            },
            trials: output::create(
                dir,
                "handover_trials.csv",
                "handover-trials",
                &[
                    "trial",
                    "policy",
                    "users",
                    "successes",
                    "success_rate",
                    "measurements",
                    "free_measurements",
                    "final_regret",
                ],
            )?,
        }),
        None => None,
    };
    let mut trials = Vec::with_capacity(run.trials as usize);
    for_each_trial(
        run.trials,
        |t| handover_trial(&res, run.users, run.seed, t),
        |t, metrics| {
            let summary: Vec<PolicyTrial> = metrics
                .iter()
                .map(|m| PolicyTrial::from_metrics(m, run.series_stride))
                .collect();
            if let Some(f) = files.as_mut() {
                write_handover_trial(f, t, &metrics, &summary)?;
            }
            trials.push(summary);
            Ok(())
        },
    )?;
    let report = HandoverReport {
        policies: res.policies.clone(),
        trials,
    };
    if let (Some(dir), Some(mut f)) = (out, files) {
        if let Some(w) = f.users.as_mut() {
            w.flush()?;
        }
        f.trials.flush()?;
        output::write_summary(dir, "handover_summary.csv", "handover-summary", &report.summary())?;
        write_regret_series(dir, &report)?;
    }
    Ok(report)
}

fn write_handover_trial(
    f: &mut HandoverFiles,
    trial: u64,
    metrics: &[CampaignMetrics],
    summary: &[PolicyTrial],
) -> Result<()> {
    let t = trial.to_string();
    if let Some(w) = f.users.as_mut() {
        for m in metrics {
            let name = m.policy.name();
            for r in &m.records {
                w.write_record([
                    t.as_str(),
                    &r.user.to_string(),
                    name,
                    &r.n_measurements.to_string(),
                    &r.free_measurements.to_string(),
                    &num(r.y_at_handover),
                    &num(r.x_at_handover),
                    if r.success { "1" } else { "0" },
                    &r.cum_successes.to_string(),
                ])?;
            }
        }
    }
    for s in summary {
        let regret = s.regret.last().map_or(String::new(), |r| num(r.1));
        f.trials.write_record([
            t.as_str(),
            s.policy.name(),
            &s.users.to_string(),
            &s.successes.to_string(),
            &num(s.success_rate()),
            &s.total_measurements.to_string(),
            &s.free_measurements.to_string(),
            &regret,
        ])?;
    }
    Ok(())
}

fn write_regret_series(dir: &Path, report: &HandoverReport) -> Result<()> {
    let mut w = output::create(
        dir,
        "handover_regret.csv",
        "handover-regret",
        &["policy", "user", "cum_regret_mean", "cum_regret_stddev"],
    )?;
    for (i, p) in report.policies.iter().enumerate() {
        let Some(first) = report.trials.first() else {
            continue;
        };
        for (k, &(user, _)) in first[i].regret.iter().enumerate() {
            let vals: Vec<f64> = report.trials.iter().map(|t| t[i].regret[k].1).collect();
            let (m, s) = output::mean_std(&vals);
            w.write_record([p.name(), &user.to_string(), &num(m), &num(s)])?;
        }
    }
    w.flush()?;
    Ok(())
}

// -------------------------------------------------------------------- sweep

/// Parameter values of one sweep point; `None` keeps the base value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub c: Option<f64>,
    pub epsilon: Option<EpsilonSetting>,
    pub failure_tolerance: Option<f64>,
    pub cells: Option<usize>,
}

impl SweepPoint {
    /// The base config with this point's values substituted.
    pub fn apply(&self, base: &ExperimentConfig, kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.experiment = kind;
        cfg.sweep = None;
        if let Some(c) = self.c {
            cfg.algo.c = c;
        }
        if let Some(e) = self.epsilon {
            cfg.algo.epsilon = e;
        }
        if let Some(tol) = self.failure_tolerance {
            cfg.algo.failure_tolerance = Some(tol);
            cfg.algo.success_threshold = None;
        }
        if let Some(k) = self.cells {
            cfg.env.cells.truncate(k);
        }
        cfg
    }
}

/// Cartesian product of the sweep lists, first list varying slowest.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new("sweep", "missing [sweep] table"))?;
    fn opts<T: Copy>(v: &Option<Vec<T>>) -> Vec<Option<T>> {
        match v {
            Some(v) => v.iter().map(|&x| Some(x)).collect(),
            None => vec![None],
        }
    }
    let mut points = Vec::new();
    for &c in &opts(&s.c) {
        for &epsilon in &opts(&s.epsilon) {
            for &failure_tolerance in &opts(&s.failure_tolerance) {
                for &cells in &opts(&s.cells) {
                    points.push(SweepPoint {
                        c,
                        epsilon,
                        failure_tolerance,
                        cells,
                    });
                }
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub base: ExperimentKind,
    pub points: Vec<(SweepPoint, Vec<SummaryRow>)>,
}

/// Runs the base experiment once per sweep point and writes one long-format
/// summary file. Per-point record files are not written.
pub fn run_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepReport> {
    cfg.resolve()?;
    let base = cfg.sweep.as_ref().expect("resolve checked [sweep]").base;
    let mut points = Vec::new();
    for point in sweep_points(cfg)? {
        let single = point.apply(cfg, base);
        let rows = match base {
            ExperimentKind::Threshold => run_threshold(&single, None)?.summary(),
            ExperimentKind::Handover => run_handover(&single, None)?.summary(),
            ExperimentKind::Sweep => unreachable!("resolve rejects nested sweeps"),
        };
        points.push((point, rows));
    }
    let report = SweepReport { base, points };
    if let Some(dir) = out {
        let mut w = output::create(
            dir,
            "sweep_summary.csv",
            &format!("sweep-summary {base}"),
            &[
                "point",
                "c",
                "epsilon",
                "failure_tolerance",
                "cells",
                "group",
                "metric",
                "mean",
                "stddev",
            ],
        )?;
        let show = |v: Option<String>| v.unwrap_or_else(|| "base".into());
        for (i, (p, rows)) in report.points.iter().enumerate() {
            for r in rows {
                w.write_record([
                    &i.to_string(),
                    &show(p.c.map(num)),
                    &show(p.epsilon.map(|e| e.to_string())),
                    &show(p.failure_tolerance.map(num)),
                    &show(p.cells.map(|k| k.to_string())),
                    &r.group,
                    &r.metric,
                    &num(r.mean),
                    &num(r.stddev),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(report)
}
