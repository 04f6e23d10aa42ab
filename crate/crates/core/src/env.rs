//! Synthetic handover environment: the signal-to-failure curve, the
//! threshold grid it induces, serving-signal traces and neighbour cells.
//!
//! Signal strengths are in dBm. Success probabilities are used throughout;
//! the curve itself stores failure probabilities because that is how the
//! calibration data is usually written down.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Piecewise-linear, nonincreasing map from signal strength to handover
/// failure probability. Evaluation clamps outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureCurve {
    knots: Vec<(f64, f64)>,
}

impl FailureCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("failure curve", "needs at least 2 knots"));
        }
        for &(s, p) in &knots {
            if !s.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(
                    "failure curve",
                    format!("knot ({s}, {p}) must have a finite signal and a probability in [0, 1]"),
                ));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(
                    "failure curve",
                    format!("signals must strictly increase ({} then {})", w[0].0, w[1].0),
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid(
                    "failure curve",
                    format!("failure must not increase ({} then {})", w[0].1, w[1].1),
                ));
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Failure probability at `signal`.
    pub fn eval(&self, signal: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if signal <= first.0 {
            return first.1;
        }
        if signal >= last.0 {
            return last.1;
        }
        // First knot strictly to the right of `signal`; exists by the checks above.
        let hi = self.knots.partition_point(|&(s, _)| s <= signal);
        let (s0, p0) = self.knots[hi - 1];
        let (s1, p1) = self.knots[hi];
        if signal == s0 {
            return p0;
        }
        let t = (signal - s0) / (s1 - s0);
        // Convex combination keeps the result inside [p1, p0].
        (p0 + t * (p1 - p0)).clamp(p1, p0)
    }

    /// Success probability at `signal`.
    pub fn success(&self, signal: f64) -> f64 {
        1.0 - self.eval(signal)
    }
}

/// The J-armed threshold instance: signal levels with nondecreasing success
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    levels: Vec<f64>,
    success_probs: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(levels: Vec<f64>, success_probs: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("threshold grid", "needs at least one level"));
        }
        if levels.len() != success_probs.len() {
            return Err(Error::invalid(
                "threshold grid",
                format!("{} levels but {} probabilities", levels.len(), success_probs.len()),
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("threshold grid", "levels must strictly increase"));
        }
        if success_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("threshold grid", "probabilities must lie in [0, 1]"));
        }
        if success_probs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid(
                "threshold grid",
                "success probabilities must be nondecreasing in signal",
            ));
        }
        Ok(Self {
            levels,
            success_probs,
        })
    }

    /// Grid with unit spacing in "level" (useful for abstract instances).
    pub fn from_probs(success_probs: Vec<f64>) -> Result<Self> {
        let levels = (0..success_probs.len()).map(|j| j as f64).collect();
        Self::new(levels, success_probs)
    }

    /// `count` evenly spaced levels on `[z_min, z_max]`, with success
    /// probabilities read off `curve`.
    pub fn from_curve(curve: &FailureCurve, z_min: f64, z_max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("threshold grid", "needs at least one level"));
        }
        if count > 1 && z_max <= z_min {
            return Err(Error::invalid("threshold grid", "z_max must exceed z_min"));
        }
        let step = if count > 1 {
            (z_max - z_min) / (count - 1) as f64
        } else {
            0.0
        };
        let levels: Vec<f64> = (0..count).map(|j| z_min + step * j as f64).collect();
        let probs = levels.iter().map(|&z| curve.success(z)).collect();
        Self::new(levels, probs)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn success_probs(&self) -> &[f64] {
        &self.success_probs
    }

    pub fn level(&self, j: usize) -> f64 {
        self.levels[j]
    }

    pub fn success_prob(&self, j: usize) -> f64 {
        self.success_probs[j]
    }

    /// One Bernoulli pull of arm `j`; `true` means handover success.
    pub fn pull(&self, j: usize, rng: &mut RngStream) -> Result<bool> {
        let p = *self.success_probs.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.len(),
        })?;
        Ok(rng.bernoulli(p))
    }
}

/// Serving-signal process: linear drift plus bounded uniform noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServingTraceParams {
    pub y_start: f64,
    pub drift_per_step: f64,
    pub noise_half_width: f64,
    pub c: f64,
    pub max_steps: usize,
}

impl ServingTraceParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.y_start, self.drift_per_step, self.noise_half_width, self.c]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("serving trace", "parameters must be finite"));
        }
        if self.drift_per_step < 0.0 || self.noise_half_width < 0.0 {
            return Err(Error::invalid(
                "serving trace",
                "drift and noise half-width must be nonnegative",
            ));
        }
        if self.drift_per_step + self.noise_half_width >= self.c {
            return Err(Error::invalid(
                "serving trace",
                format!(
                    "drift {} + noise {} must stay below c = {}",
                    self.drift_per_step, self.noise_half_width, self.c
                ),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("serving trace", "max_steps must be positive"));
        }
        Ok(())
    }
}

/// `max_steps` serving values starting at `y_start`; consecutive values
/// differ by less than `c`.
pub fn gen_serving_trace(params: &ServingTraceParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    params.validate()?;
    let mut trace = Vec::with_capacity(params.max_steps);
    let mut y = params.y_start;
    trace.push(y);
    for _ in 1..params.max_steps {
        let u = rng.uniform_in(-params.noise_half_width, params.noise_half_width);
        y = y - params.drift_per_step + u;
        trace.push(y);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborCell {
    pub signal_mean: f64,
    pub signal_half_width: f64,
    pub true_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborCellSet {
    cells: Vec<NeighborCell>,
}

impl NeighborCellSet {
    pub fn new(cells: Vec<NeighborCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("neighbour cells", "need at least one cell"));
        }
        for (k, c) in cells.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.true_success_rate) {
                return Err(Error::invalid(
                    "neighbour cells",
                    format!("cell {k}: success rate {} outside [0, 1]", c.true_success_rate),
                ));
            }
            if !c.signal_mean.is_finite() || c.signal_half_width.is_nan() || c.signal_half_width < 0.0 {
                return Err(Error::invalid(
                    "neighbour cells",
                    format!("cell {k}: bad signal distribution"),
                ));
            }
        }
        Ok(Self { cells })
    }

    /// Cells whose success rates are read off `curve` at their mean signal.
    pub fn calibrated(curve: &FailureCurve, signals: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            signals
                .iter()
                .map(|&(mean, half_width)| NeighborCell {
                    signal_mean: mean,
                    signal_half_width: half_width,
                    true_success_rate: curve.success(mean),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[NeighborCell] {
        &self.cells
    }

    pub fn true_rates(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.true_success_rate).collect()
    }

    /// Uniform draw on `[mean - half_width, mean + half_width]` for cell `k`.
    pub fn sample_signal(&self, k: usize, rng: &mut RngStream) -> Result<f64> {
        let cell = self.cells.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.len(),
        })?;
        Ok(rng.uniform_in(
            cell.signal_mean - cell.signal_half_width,
            cell.signal_mean + cell.signal_half_width,
        ))
    }
}

/// Handover succeeds iff the serving leg and the target leg both succeed.
///
/// Always consumes two uniforms (serving first, then target).
pub fn draw_handover_outcome(
    curve: &FailureCurve,
    y_at_handover: f64,
    x_best: f64,
    rng: &mut RngStream,
) -> bool {
    let serving_ok = rng.bernoulli(curve.success(y_at_handover));
    let target_ok = rng.bernoulli(curve.success(x_best));
    serving_ok && target_ok
}
