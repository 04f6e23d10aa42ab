use batt_harness::config::{EpsilonSetting, ExperimentConfig, PseudoRewardSetting};
use proptest::prelude::*;

#[test]
fn default_round_trips_through_toml() {
    let cfg = ExperimentConfig::default_setup();
    let text = cfg.to_toml();
    let back: ExperimentConfig = text.parse().unwrap();
    assert_eq!(back, cfg);
    // And once more, so serialisation itself is stable.
    assert_eq!(back.to_toml(), text);
}

#[test]
fn unknown_keys_are_rejected_with_their_table() {
    let text = batt_harness::config::DEFAULT_CONFIG.replace("[algo]\n", "[algo]\nbogus = 1\n");
    let err = text.parse::<ExperimentConfig>().unwrap_err();
    assert!(err.field.starts_with("algo"), "{err}");
    assert!(err.reason.contains("bogus"), "{err}");
}

#[test]
fn wrong_type_names_the_key() {
    let text = batt_harness::config::DEFAULT_CONFIG.replace("y_start = -104.0", "y_start = true");
    let err = text.parse::<ExperimentConfig>().unwrap_err();
    assert_eq!(err.field, "env.trace.y_start");
}

#[test]
fn epsilon_accepts_auto_and_rejects_other_words() {
    let auto = batt_harness::config::DEFAULT_CONFIG.replace("epsilon = 0.3", "epsilon = \"auto\"");
    let cfg: ExperimentConfig = auto.parse().unwrap();
    assert_eq!(cfg.algo.epsilon, EpsilonSetting::Auto);
    let bad = batt_harness::config::DEFAULT_CONFIG.replace("epsilon = 0.3", "epsilon = \"max\"");
    assert_eq!(bad.parse::<ExperimentConfig>().unwrap_err().field, "algo.epsilon");
}

fn validation_field(edit: impl FnOnce(&mut ExperimentConfig)) -> String {
    let mut cfg = ExperimentConfig::default_setup();
    edit(&mut cfg);
    cfg.resolve().unwrap_err().field
}

#[test]
fn validation_errors_name_the_field() {
    use batt_harness::ExperimentKind::*;
    assert_eq!(validation_field(|c| c.run.trials = 0), "run.trials");
    assert_eq!(validation_field(|c| c.run.users = 0), "run.users");
    assert_eq!(
        validation_field(|c| {
            c.experiment = Threshold;
            c.run.rounds = 0
        }),
        "run.rounds"
    );
    assert_eq!(validation_field(|c| c.env.curve.clear()), "env.curve");
    assert_eq!(validation_field(|c| c.env.cells.clear()), "env.cells");
    assert_eq!(validation_field(|c| c.env.cells[0].half_width = -1.0), "env.cells");
    assert_eq!(validation_field(|c| c.env.trace.max_steps = 0), "env.trace");
    assert_eq!(validation_field(|c| c.algo.c = -1.0), "algo.c");
    assert_eq!(validation_field(|c| c.algo.prior = [0.0, 1.0]), "algo.prior");
    assert_eq!(validation_field(|c| c.algo.ucb_alpha = 0.0), "algo.ucb_alpha");
    assert_eq!(validation_field(|c| c.algo.measurement_budget = Some(0)), "algo.measurement_budget");
    assert_eq!(
        validation_field(|c| c.run.policies = Some(vec!["greedy".into()])),
        "run.policies"
    );
    assert_eq!(
        validation_field(|c| {
            c.experiment = Threshold;
            c.algo.epsilon = EpsilonSetting::Fixed(0.0)
        }),
        "algo.epsilon"
    );
    assert_eq!(
        validation_field(|c| {
            c.experiment = Threshold;
            c.env.grid.z_max = -95.0
        }),
        "algo.success_threshold"
    );
    assert_eq!(
        validation_field(|c| {
            c.experiment = Sweep;
            c.sweep.as_mut().unwrap().cells = Some(vec![10]);
        }),
        "sweep.cells"
    );
    assert_eq!(
        validation_field(|c| {
            c.experiment = Sweep;
            c.sweep.as_mut().unwrap().c = Some(vec![]);
        }),
        "sweep.c"
    );
}

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any values written out by the serialiser come back unchanged.
    #[test]
    fn arbitrary_configs_round_trip(
        m_hat in finite(),
        c in 0.0f64..50.0,
        eps in prop_oneof![Just(EpsilonSetting::Auto), (1e-6f64..1.0).prop_map(EpsilonSetting::Fixed)],
        delta in proptest::option::of(1e-4f64..0.5),
        tol in 0.0f64..1.0,
        budget in proptest::option::of(1usize..20),
        seed in any::<u64>(),
        trials in 1u64..1000,
        trigger in proptest::option::of(finite()),
        indicator in any::<bool>(),
        means in proptest::collection::vec((finite(), 0.0f64..10.0), 1..6),
    ) {
        let mut cfg = ExperimentConfig::default_setup();
        cfg.algo.m_hat = m_hat;
        cfg.algo.c = c;
        cfg.algo.epsilon = eps;
        cfg.algo.delta = delta;
        cfg.algo.failure_tolerance = Some(tol);
        cfg.algo.measurement_budget = budget;
        cfg.algo.pseudo_reward = if indicator {
            PseudoRewardSetting::ThresholdIndicator
        } else {
            PseudoRewardSetting::TargetBernoulli
        };
        cfg.run.seed = seed;
        cfg.run.trials = trials;
        cfg.env.trigger = trigger;
        for (cell, (m, w)) in cfg.env.cells.iter_mut().zip(means) {
            cell.mean = m;
            cell.half_width = w;
        }
        let back: ExperimentConfig = cfg.to_toml().parse().unwrap();
        prop_assert_eq!(back, cfg);
    }
}
