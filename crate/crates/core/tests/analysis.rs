use batt_core::analysis::{epsilon_objective, optimal_epsilon, regret_bound, GapParams};
use batt_core::bandit::{ucb_index, ArmStats, BetaPosterior};
use batt_core::env::ThresholdGrid;
use batt_core::search::{eps_binary_search_first, Feedback, SearchConfig};
use batt_core::verify::{grid_min_epsilon, grid_objective};
use batt_core::RngStream;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn closed_form_matches_scan(arms in 4usize..=512, log_t in 3.0f64..6.0, delta in 0.01f64..0.3) {
        let rounds = 10f64.powf(log_t).round() as u64;
        let closed = optimal_epsilon(arms, rounds, delta).unwrap();
        let scanned = grid_min_epsilon(arms, rounds, delta, 1e-4).unwrap();
        prop_assert!((closed - scanned).abs() <= 1e-4 + 1e-9, "{} vs {}", closed, scanned);
        // Both objective implementations agree.
        let e = 0.5 * (closed + 1e-3);
        let a = epsilon_objective(arms, rounds, delta, e);
        let b = grid_objective(arms, rounds, delta, e);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn bound_is_the_objective_at_the_optimum(arms in 4usize..=512, rounds in 1000u64..1_000_000, delta in 0.01f64..0.3) {
        let eps = optimal_epsilon(arms, rounds, delta).unwrap();
        let bound = regret_bound(arms, rounds, delta).unwrap();
        let h = epsilon_objective(arms, rounds, delta, eps);
        prop_assert!((bound - h).abs() <= 1e-9 * h.abs().max(1.0));
        // No grid point beats the closed form by more than rounding.
        for k in 1..=100 {
            let other = epsilon_objective(arms, rounds, delta, k as f64 / 100.0);
            prop_assert!(other >= h * (1.0 - 1e-12));
        }
    }

    /// Conjugate updates depend only on the counts, not their order.
    #[test]
    fn posterior_updates_commute(rewards in prop::collection::vec(any::<bool>(), 0..200), a0 in 0.1f64..10.0, b0 in 0.1f64..10.0) {
        let prior = BetaPosterior::new(a0, b0).unwrap();
        let forward = rewards.iter().fold(prior, |p, &r| p.update(r));
        let backward = rewards.iter().rev().fold(prior, |p, &r| p.update(r));
        let ones = rewards.iter().filter(|&&r| r).count() as f64;
        let zeros = rewards.len() as f64 - ones;
        prop_assert_eq!(forward, backward);
        prop_assert!((forward.alpha() - (a0 + ones)).abs() < 1e-9);
        prop_assert!((forward.beta() - (b0 + zeros)).abs() < 1e-9);
    }

    /// With the empirical mean held fixed, more pulls mean a smaller index.
    #[test]
    fn ucb_decreases_in_pull_count(den in 1u64..10, num_frac in 0.0f64..=1.0, k in 1u64..100, extra in 1u64..10_000) {
        let num = (num_frac * den as f64).round() as u64;
        let a = ArmStats::new(den * k, num * k).unwrap();
        let b = ArmStats::new(den * (k + 1), num * (k + 1)).unwrap();
        prop_assert_eq!(a.empirical_mean(), b.empirical_mean());
        let total = den * (k + 1) + extra;
        prop_assert!(ucb_index(&b, total, 2.0) < ucb_index(&a, total, 2.0));
    }

    #[test]
    fn beta_sampling_is_reproducible(seed in any::<u64>(), stream in any::<u64>(), a in 0.5f64..20.0, b in 0.5f64..20.0) {
        let p = BetaPosterior::new(a, b).unwrap();
        let x = p.sample(&mut RngStream::new(seed, stream));
        let y = p.sample(&mut RngStream::new(seed, stream));
        prop_assert_eq!(x.to_bits(), y.to_bits());
        prop_assert!((0.0..=1.0).contains(&x));
    }
}

#[test]
fn gap_parameters_follow_their_definitions() {
    let grid = ThresholdGrid::from_probs(vec![0.5, 0.6, 0.75, 0.9, 0.95]).unwrap();
    let tp = GapParams::new(&grid, 0.7, &[2, 1, 3]).unwrap();
    assert!((tp.big_delta - 0.05).abs() < 1e-12);
    assert!((tp.min_gap - 0.15).abs() < 1e-12);
    assert!((tp.d - 0.05).abs() < 1e-12);
    assert!((tp.delta - tp.big_delta.min(tp.min_gap / 2.0)).abs() < 1e-15);
}

/// Monte-Carlo coarse regret stays under the analytical bound on an instance
/// where the bound's condition holds.
#[test]
fn coarse_regret_is_below_the_bound() {
    let probs: Vec<f64> = (0..16).map(|j| 0.3 + 0.04 * j as f64).collect();
    let grid = ThresholdGrid::from_probs(probs).unwrap();
    let r = 0.72;
    let searched = {
        let cfg = SearchConfig::new(16, 20_000, r, 0.5).unwrap();
        let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Noiseless).unwrap();
        run.stats.searched.clone()
    };
    let tp = GapParams::new(&grid, r, &searched).unwrap();
    let rounds = 20_000;
    let eps = optimal_epsilon(16, rounds, tp.delta).unwrap();
    let cfg = SearchConfig::new(16, rounds, r, eps).unwrap();
    assert!(tp.condition_holds(16, rounds, cfg.pulls_per_arm()));
    let bound = regret_bound(16, rounds, tp.delta).unwrap();
    let mean: f64 = (0..20)
        .map(|s| {
            let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(s, 0))).unwrap();
            run.stats.coarse_regret as f64
        })
        .sum::<f64>()
        / 20.0;
    assert!(mean <= bound, "{mean} > {bound}");
}
