//! Cross-module invariants checked on logged rounds.

use proptest::prelude::*;

use skillforge::craftworld::{randomized_init_with, ProgressionTier, DEFAULT_TIER_WEIGHTS};
use skillforge::explorer::{collect_round, run_episode, RoundConfig, Trajectory};
use skillforge::policy::ScriptedExpertConfig;
use skillforge::skillgen::{build_records, detect_changes, validate, Labeler};
use skillforge::trainer::{examples_from_records, train, TrainConfig};

fn expert_round(base_seed: u64, episodes: u32, epsilon: f64) -> (RoundConfig, Vec<Trajectory>) {
    let cfg = RoundConfig { episodes, base_seed, ..RoundConfig::default() };
    let expert = ScriptedExpertConfig::survival_default().with_epsilon(epsilon);
    let trajs = collect_round(&cfg, &expert, None);
    (cfg, trajs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn template_labeled_records_are_valid(seed in any::<u64>(), eps in prop_oneof![Just(0.0), Just(0.2), Just(0.5)]) {
        let (cfg, trajs) = expert_round(seed, 6, eps);
        let records = build_records(&trajs, 0, cfg.mode, &Labeler::Template);
        for r in &records {
            prop_assert!(r.valid, "{:?}", r.instruction);
            prop_assert!(validate(r).valid);
        }
    }

    #[test]
    fn held_items_have_their_prerequisites(seed in any::<u64>()) {
        let (_, trajs) = expert_round(seed, 8, 0.1);
        for traj in &trajs {
            let mut seen = traj.init.inventory.clone();
            for t in 0..=traj.len() {
                let inv = &traj.obs(t).inventory;
                for (item, _) in inv.iter() {
                    seen.set(item, 1);
                }
                for (item, _) in inv.iter() {
                    if let Some(p) = item.prerequisite() {
                        prop_assert!(seen.has(p), "episode {} step {t}: {:?} without {:?}", traj.episode, item, p);
                    }
                }
            }
        }
    }
}

#[test]
fn execution_order_does_not_matter() {
    let (mut cfg, parallel) = expert_round(99, 12, 0.3);
    cfg.workers = 1;
    let expert = ScriptedExpertConfig::survival_default().with_epsilon(0.3);
    assert_eq!(collect_round(&cfg, &expert, None), parallel);
    for i in (0..cfg.episodes).rev() {
        assert_eq!(run_episode(&cfg, &expert, None, i), parallel[i as usize]);
    }
}

#[test]
fn changes_replay_from_the_serialized_trajectory() {
    let (_, trajs) = expert_round(5, 10, 0.2);
    for traj in &trajs {
        let back: Trajectory = serde_json::from_slice(&serde_json::to_vec(traj).unwrap()).unwrap();
        assert_eq!(detect_changes(&back), detect_changes(traj));
    }
}

#[test]
fn init_tiers_follow_configured_weights() {
    let n = 10_000;
    let mut counts = [0u32; 4];
    for seed in 0..n {
        let (tier, _) = randomized_init_with(seed, &DEFAULT_TIER_WEIGHTS);
        counts[ProgressionTier::ALL.iter().position(|t| *t == tier).unwrap()] += 1;
    }
    let mut chi2 = 0.0;
    for (c, w) in counts.iter().zip(DEFAULT_TIER_WEIGHTS) {
        let share = *c as f64 / n as f64;
        assert!((share - w).abs() <= 0.02, "{counts:?}");
        let expected = w * n as f64;
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    // 3 degrees of freedom, p = 0.001.
    assert!(chi2 < 16.27, "chi2 {chi2}");
}

#[test]
fn cloned_policy_agrees_with_the_expert() {
    let (cfg, trajs) = expert_round(2024, 50, 0.0);
    let records = build_records(&trajs, 0, cfg.mode, &Labeler::Template);
    let tc = TrainConfig::default();
    let examples = examples_from_records(&records, tc.history, tc.dim);
    let (model, _) = train(&tc, &examples, None, 0).unwrap();
    let hits = examples.iter().filter(|e| model.predict(&e.features) == e.action).count();
    let agreement = hits as f64 / examples.len() as f64;
    assert!(agreement >= 0.9, "agreement {agreement:.3} over {} pairs", examples.len());
}
