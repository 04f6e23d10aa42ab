//! Per-arm learning state: Beta posteriors for Thompson sampling and pull
//! counts for UCB.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Beta belief over a Bernoulli arm's success rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPosterior {
    alpha: f64,
    beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(
                "beta posterior",
                format!("alpha={alpha}, beta={beta}; both must be positive and finite"),
            ));
        }
        Ok(Self { alpha, beta })
    }

    /// The uninformative Beta(1, 1) prior.
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Conjugate update with one Bernoulli observation.
    #[must_use]
    pub fn update(self, reward: bool) -> Self {
        if reward {
            Self {
                alpha: self.alpha + 1.0,
                ..self
            }
        } else {
            Self {
                beta: self.beta + 1.0,
                ..self
            }
        }
    }

    /// One draw from Beta(alpha, beta).
    ///
    /// The parent stream advances by exactly one `u64`; the rejection sampler
    /// runs on a generator seeded from that word, so the number of draws it
    /// needs never shifts later draws from `rng`.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let mut local = ChaCha8Rng::seed_from_u64(rng.next_u64());
        // Parameters are validated on construction.
        let dist = Beta::new(self.alpha, self.beta).expect("valid beta parameters");
        dist.sample(&mut local)
    }
}

impl Default for BetaPosterior {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Pull and success counts for one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArmStats {
    pull_count: u64,
    success_count: u64,
}

impl ArmStats {
    pub fn new(pull_count: u64, success_count: u64) -> Result<Self> {
        if success_count > pull_count {
            return Err(Error::invalid(
                "arm stats",
                format!("{success_count} successes exceed {pull_count} pulls"),
            ));
        }
        Ok(Self {
            pull_count,
            success_count,
        })
    }

    pub fn pull_count(&self) -> u64 {
        self.pull_count
    }

    pub fn success_count(&self) -> u64 {
        self.success_count
    }

    /// `None` until the arm has been pulled.
    pub fn empirical_mean(&self) -> Option<f64> {
        (self.pull_count > 0).then(|| self.success_count as f64 / self.pull_count as f64)
    }

    pub fn record(&mut self, reward: bool) {
        self.pull_count += 1;
        if reward {
            self.success_count += 1;
        }
    }
}

/// Default exploration constant for [`ucb_index`].
pub const DEFAULT_UCB_ALPHA: f64 = 2.0;

/// UCB1-style index `mean + sqrt(alpha * ln(total_pulls) / pull_count)`.
///
/// Unpulled arms get `+inf` so each arm is tried once before the bonus
/// matters.
pub fn ucb_index(stats: &ArmStats, total_pulls: u64, alpha_ucb: f64) -> f64 {
    debug_assert!(total_pulls >= stats.pull_count);
    match stats.empirical_mean() {
        None => f64::INFINITY,
        Some(mean) => {
            let n = stats.pull_count as f64;
            mean + (alpha_ucb * (total_pulls as f64).ln() / n).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_increments_one_side() {
        let p = BetaPosterior::uniform();
        assert_eq!(p.update(true), BetaPosterior::new(2.0, 1.0).unwrap());
        assert_eq!(p.update(false), BetaPosterior::new(1.0, 2.0).unwrap());
    }

    #[test]
    fn update_sequence_hand_count() {
        let p = BetaPosterior::new(3.0, 2.0).unwrap();
        let p = [true, true, false].iter().fold(p, |p, &r| p.update(r));
        assert_eq!(p, BetaPosterior::new(5.0, 3.0).unwrap());
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(BetaPosterior::new(0.0, 1.0).is_err());
        assert!(BetaPosterior::new(1.0, -2.0).is_err());
        assert!(BetaPosterior::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn uniform_prior_sample_mean() {
        let mut rng = RngStream::new(11, 0);
        let p = BetaPosterior::uniform();
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn concentrated_posterior_samples_high() {
        let mut rng = RngStream::new(5, 2);
        let p = BetaPosterior::new(1e6, 1.0).unwrap();
        for _ in 0..1000 {
            assert!(p.sample(&mut rng) > 0.99);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = BetaPosterior::new(2.0, 3.0).unwrap();
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 0);
        assert_eq!(p.sample(&mut a).to_bits(), p.sample(&mut b).to_bits());
        assert_eq!(p.sample(&mut a).to_bits(), p.sample(&mut b).to_bits());
    }

    #[test]
    fn sample_advances_parent_by_one_word() {
        let p = BetaPosterior::new(0.3, 0.2).unwrap();
        let mut a = RngStream::new(9, 4);
        let mut b = RngStream::new(9, 4);
        p.sample(&mut a);
        b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn ucb_cold_start_is_infinite() {
        assert_eq!(ucb_index(&ArmStats::default(), 10, 2.0), f64::INFINITY);
    }

    #[test]
    fn ucb_direct_evaluation() {
        // 0.5 + sqrt(2 * ln 100 / 4), evaluated independently: 2.017427...
        let stats = ArmStats::new(4, 2).unwrap();
        let idx = ucb_index(&stats, 100, 2.0);
        assert!((idx - 2.017_427_129_385_147).abs() < 1e-9, "{idx}");
    }

    #[test]
    fn ucb_no_bonus_at_one_pull() {
        let stats = ArmStats::new(1, 1).unwrap();
        assert_eq!(ucb_index(&stats, 1, 2.0), 1.0);
    }

    #[test]
    fn arm_stats_rejects_excess_successes() {
        assert!(ArmStats::new(2, 3).is_err());
        assert_eq!(ArmStats::default().empirical_mean(), None);
    }
}
