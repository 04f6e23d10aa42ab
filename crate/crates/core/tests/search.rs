use batt_core::env::{FailureCurve, ThresholdGrid};
use batt_core::search::{
    coarse_regret, eps_binary_search_first, true_optimal_arm, uniform_search_first, Feedback,
    Phase, SearchConfig,
};
use batt_core::verify::brute_force_threshold;
use batt_core::RngStream;
use proptest::prelude::*;

/// Sorted probabilities with at least one at or above the returned threshold.
fn grid_and_threshold() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(0.0f64..=1.0, 1..40), 0.0f64..1.0).prop_map(|(mut p, u)| {
        p.sort_by(f64::total_cmp);
        let r = u * p[p.len() - 1];
        (p, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn runs_last_exactly_t_rounds(
        (probs, r) in grid_and_threshold(),
        rounds in 1u64..3000,
        eps in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let j = probs.len();
        let grid = ThresholdGrid::from_probs(probs).unwrap();
        let cfg = SearchConfig::new(j, rounds, r, eps);
        prop_assume!(cfg.is_ok());
        let cfg = cfg.unwrap();
        let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(seed, 0))).unwrap();
        let s = &run.stats;
        prop_assert_eq!(s.pulls.iter().sum::<u64>(), rounds);
        prop_assert_eq!(run.rounds.len() as u64, rounds);
        prop_assert_eq!(s.coarse_regret, coarse_regret(&s.pulls, s.optimal_arm));
        prop_assert_eq!(s.coarse_regret, rounds - s.pulls[s.optimal_arm]);
        // Search depth.
        let cap = if j < 2 { 1 } else { (j as f64).log2().ceil() as usize + 1 };
        prop_assert!(s.searched.len() <= cap);
        // Exploration is |S| * P unless the horizon cut it short.
        let explore = run.rounds.iter().filter(|r| r.phase == Phase::Explore).count() as u64;
        prop_assert_eq!(explore, s.exploration_rounds);
        prop_assert_eq!(explore, (s.searched.len() as u64 * cfg.pulls_per_arm()).min(rounds));
        // Violations recounted from the round log.
        let v = run.rounds.iter().filter(|x| grid.success_prob(x.arm) < r).count() as u64;
        prop_assert_eq!(v, s.violations);
        // Exploit rounds all go to the selected arm.
        prop_assert!(run.rounds.iter().filter(|x| x.phase == Phase::Exploit).all(|x| x.arm == s.selected_arm));
        prop_assert_eq!(s.optimal_arm, brute_force_threshold(grid.success_probs(), r).unwrap());
    }

    /// Whenever every searched arm's estimate falls on the same side of R as
    /// its true mean, the closest sufficient arm is among those searched.
    #[test]
    fn well_measured_runs_contain_the_optimum(
        (probs, r) in grid_and_threshold(),
        pulls in 1u64..30,
        seed in any::<u64>(),
    ) {
        let j = probs.len();
        prop_assume!(j >= 2);
        let grid = ThresholdGrid::from_probs(probs).unwrap();
        let rounds = pulls * 64;
        let eps = (pulls as f64 * (j as f64).log2() / rounds as f64 * 1.000001).min(1.0);
        let cfg = SearchConfig::new(j, rounds, r, eps);
        prop_assume!(cfg.is_ok());
        let cfg = cfg.unwrap();
        let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(seed, 1))).unwrap();
        let trace = run.trace.as_ref().unwrap();
        if trace.all_well_measured(&grid, r) {
            prop_assert!(trace.searched_arms().contains(&run.stats.optimal_arm));
        }
    }

    #[test]
    fn runs_are_deterministic(
        (probs, r) in grid_and_threshold(),
        seed in any::<u64>(),
    ) {
        let j = probs.len();
        let grid = ThresholdGrid::from_probs(probs).unwrap();
        let cfg = SearchConfig::new(j, 2000, r, 0.5).unwrap();
        prop_assume!(cfg.uniform_pulls_per_arm() >= 1);
        for searcher in [eps_binary_search_first, uniform_search_first] {
            let a = searcher(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(seed, 2))).unwrap();
            let b = searcher(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(seed, 2))).unwrap();
            prop_assert_eq!(&a.rounds, &b.rounds);
            prop_assert_eq!(&a.stats, &b.stats);
        }
    }
}

/// Every nondecreasing grid of up to six arms over five distinct levels.
#[test]
fn noiseless_selection_is_exact_on_small_grids() {
    let levels = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut checked = 0;
    for j in 1..=5usize {
        // Strictly increasing subsets, so means are distinct.
        for mask in 0u32..(1 << levels.len()) {
            if mask.count_ones() as usize != j {
                continue;
            }
            let probs: Vec<f64> = (0..levels.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| levels[i])
                .collect();
            let grid = ThresholdGrid::from_probs(probs.clone()).unwrap();
            for r in [0.0, 0.1, 0.2, 0.3, 0.5, 0.6, 0.7, 0.9, 1.0] {
                let Ok(m) = true_optimal_arm(&grid, r) else {
                    continue;
                };
                let cfg = SearchConfig::new(j, 100, r, 0.5).unwrap();
                let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Noiseless).unwrap();
                assert_eq!(run.stats.selected_arm, m, "{probs:?} R={r}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn sufficient_selection_without_insufficient_exploration_has_no_violations() {
    // Every arm is sufficient, so nothing can ever violate.
    let grid = ThresholdGrid::from_probs(vec![0.95, 0.96, 0.97, 0.99]).unwrap();
    let cfg = SearchConfig::new(4, 1000, 0.9, 0.3).unwrap();
    let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(3, 0))).unwrap();
    assert_eq!(run.stats.violations, 0);
}

#[test]
fn curve_built_grid_is_monotone() {
    let curve = FailureCurve::new(vec![(-140.0, 0.4), (-110.0, 0.1), (-90.0, 0.0)]).unwrap();
    let grid = ThresholdGrid::from_curve(&curve, -140.0, -60.0, 81).unwrap();
    assert!(grid.success_probs().windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(grid.level(0), -140.0);
    assert_eq!(grid.level(80), -60.0);
}

/// On a well-separated grid the binary searcher finds the optimum in
/// almost every trial and its violations stop once exploration ends.
#[test]
fn monte_carlo_selection_accuracy() {
    let probs: Vec<f64> = (0..10).map(|j| 0.5 + 0.05 * j as f64).collect();
    let grid = ThresholdGrid::from_probs(probs).unwrap();
    let r = 0.775;
    let m = true_optimal_arm(&grid, r).unwrap();
    assert_eq!(m, 6);
    let cfg = SearchConfig::new(10, 20_000, r, 0.3).unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let run = eps_binary_search_first(&cfg, &grid, &mut Feedback::Bernoulli(RngStream::new(seed, 0))).unwrap();
        if run.stats.selected_arm == m {
            hits += 1;
        }
        if grid.success_prob(run.stats.selected_arm) >= r {
            let series = run.violation_series(&grid, r);
            let after = run.stats.exploration_rounds as usize;
            assert!(series[after..].iter().all(|&v| v == series[after - 1]));
        }
    }
    assert!(hits >= 90, "{hits}");
}
