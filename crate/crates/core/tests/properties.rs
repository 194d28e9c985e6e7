//! Run-level invariants over randomly drawn small experiments.

use proptest::prelude::*;

use corrupt_rl::adversary::AttackKind;
use corrupt_rl::harness::{run_replicate, AdversarySpec, EnvironmentSpec, ExperimentConfig, FeatureMode, LearnerSpec};

fn learner_strategy() -> impl Strategy<Value = LearnerSpec> {
    prop_oneof![
        Just(LearnerSpec::FixedOptimal),
        Just(LearnerSpec::Ucbvi { bonus_scale: 1.0 }),
        Just(LearnerSpec::SupervisedC { mode: FeatureMode::Tabular, lambda: 1.0, bonus_scale: 1.0, ell_max: None }),
        Just(LearnerSpec::SupervisedC { mode: FeatureMode::Linear, lambda: 1.0, bonus_scale: 1.0, ell_max: None }),
        Just(LearnerSpec::SupervisedUnif { epsilon: 0.3, bonus_scale: 1.0 }),
        Just(LearnerSpec::UniformElimination { bonus_scale: 1.0 }),
    ]
}

fn attack_strategy() -> impl Strategy<Value = AttackKind> {
    prop_oneof![
        Just(AttackKind::None),
        Just(AttackKind::ZeroBestArm),
        Just(AttackKind::LockDecoy),
        Just(AttackKind::FrontRandom),
    ]
}

fn experiment(
    states: usize,
    actions: usize,
    horizon: usize,
    env_seed: u64,
    learner: LearnerSpec,
    attack: AttackKind,
    budget: usize,
    episodes: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        environment: EnvironmentSpec::CanonicalEmbedding {
            base: Box::new(EnvironmentSpec::RandomTabular { num_states: states, num_actions: actions, horizon, seed: env_seed }),
        },
        adversary: AdversarySpec { attack, budget, seed: 3 },
        learner,
        episodes,
        delta: 0.1,
        replicates: 1,
        seed,
        output_dir: None,
        diagnostics_every: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn records_are_consistent(
        states in 2usize..5,
        actions in 2usize..4,
        horizon in 1usize..4,
        env_seed in 0u64..1000,
        learner in learner_strategy(),
        attack in attack_strategy(),
        budget in 0usize..8,
        episodes in 0usize..30,
        seed in 0u64..1000,
    ) {
        let cfg = experiment(states, actions, horizon, env_seed, learner, attack, budget, episodes, seed);
        let out = run_replicate(&cfg, 0).unwrap();
        prop_assert_eq!(out.records.len(), episodes);
        let (mut nominal, mut eq2, mut corrupted) = (0.0, 0.0, 0usize);
        for (k, r) in out.records.iter().enumerate() {
            prop_assert_eq!(r.k, k);
            prop_assert!(r.c_k <= 1);
            corrupted += r.c_k as usize;
            prop_assert!(r.inst_regret >= -1e-9);
            nominal += r.inst_regret;
            prop_assert!((r.cum_regret_nominal - nominal).abs() <= 1e-9);
            prop_assert!(r.cum_regret_eq2 - eq2 >= -1e-9);
            eq2 = r.cum_regret_eq2;
        }
        prop_assert!(corrupted <= budget);
        prop_assert_eq!(corrupted, out.log.corrupted_episodes);
        if matches!(attack, AttackKind::LockDecoy | AttackKind::FrontRandom) {
            prop_assert_eq!(corrupted, budget.min(episodes));
        }
        prop_assert!(out.log.corrupted_stages_global <= corrupted * horizon);
    }

    #[test]
    fn zero_budget_matches_no_adversary(
        env_seed in 0u64..1000,
        learner in learner_strategy(),
        attack in attack_strategy(),
        seed in 0u64..1000,
    ) {
        let clean = experiment(3, 2, 3, env_seed, learner.clone(), AttackKind::None, 0, 20, seed);
        let idle = experiment(3, 2, 3, env_seed, learner, attack, 0, 20, seed);
        let a = run_replicate(&clean, 0).unwrap();
        let b = run_replicate(&idle, 0).unwrap();
        prop_assert_eq!(a.records, b.records);
    }
}
