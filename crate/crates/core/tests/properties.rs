//! Property tests for the invariants the pipeline relies on.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use skillforge::craftworld::{new_world, randomized_init, AchievementId as A, Action, ITEM_MAX, METER_MAX};
use skillforge::feedback::{floor_tier, focus_tier, generate_feedback, select_targets, SkillHistogram, MAX_TARGETS};
use skillforge::policy::{condition_on_feedback, ScriptedExpertConfig};
use skillforge::seeds::derive;
use skillforge::trainer::{train, FeatureVector, TrainConfig, TrainExample};

fn histogram(attempts: u32, counts: &[u32]) -> SkillHistogram {
    let successes: BTreeMap<A, u32> = A::ALL.iter().zip(counts).map(|(a, c)| (*a, (*c).min(attempts))).collect();
    SkillHistogram { attempts, successes }
}

/// A histogram and one that dominates it: every count at least as high, one strictly higher.
fn dominance_pair() -> impl Strategy<Value = (SkillHistogram, SkillHistogram)> {
    (1u32..=20)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(prop_oneof![3 => Just(0u32), 2 => 0..=n], A::COUNT),
                prop::collection::vec(prop_oneof![3 => Just(0u32), 1 => 0..=n], A::COUNT),
                0..A::COUNT,
            )
        })
        .prop_map(|(n, base, extra, bump)| {
            let mut up: Vec<u32> = base.iter().zip(&extra).map(|(b, e)| (b + e).min(n)).collect();
            if up == base {
                up[bump] = (up[bump] + 1).min(n);
            }
            (histogram(n, &base), histogram(n, &up))
        })
}

fn any_histogram() -> impl Strategy<Value = SkillHistogram> {
    (1u32..=20).prop_flat_map(|n| prop::collection::vec(0..=n, A::COUNT).prop_map(move |c| histogram(n, &c)))
}

fn settled(h: &SkillHistogram) -> bool {
    focus_tier(h).is_some_and(|f| f >= floor_tier(h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn feedback_never_regresses_under_dominance((h1, h2) in dominance_pair()) {
        // Outside this region everything from the floor up is already mastered, and a
        // frontier skill below it has to be targeted instead.
        prop_assume!(settled(&h1) && settled(&h2));
        let (t1, t2) = (select_targets(&h1), select_targets(&h2));
        let hi = t1.iter().map(|a| a.tier()).max().unwrap_or(0);
        prop_assert!(t2.iter().all(|a| a.tier() >= hi), "{:?} then {:?}", t1, t2);
    }

    #[test]
    fn floor_is_monotone((h1, h2) in dominance_pair()) {
        prop_assert!(floor_tier(&h2) >= floor_tier(&h1));
    }

    #[test]
    fn emitted_feedback_is_well_formed(h in any_histogram(), k in 0u32..10) {
        let fb = generate_feedback(&h, k);
        prop_assert!(fb.validate().is_ok());
        prop_assert!(fb.target_skills.len() <= MAX_TARGETS);
        let allowed = h.candidates();
        prop_assert!(fb.target_skills.iter().all(|a| allowed.contains(a)));
    }

    #[test]
    fn feedback_boosts_something_unseen(h in any_histogram()) {
        prop_assume!(!h.frontier().is_empty());
        let base = ScriptedExpertConfig::survival_default();
        let boosted = condition_on_feedback(&base, &generate_feedback(&h, 0));
        let achieved = h.achieved();
        let total = |c: &ScriptedExpertConfig| A::ALL.iter().map(|a| c.weight(*a)).sum::<f64>();
        let share = |c: &ScriptedExpertConfig, a: A| c.weight(a) / total(c);
        prop_assert!(A::ALL.iter().any(|a| !achieved.contains(a) && share(&boosted, *a) > share(&base, *a)));
    }

    #[test]
    fn conditioning_keeps_support_and_lifts_targets(
        weights in prop::collection::vec(0.01f64..5.0, A::COUNT),
        picks in prop::collection::btree_set(0..A::COUNT, 1..=MAX_TARGETS),
    ) {
        let mut cfg = ScriptedExpertConfig::uniform();
        for (a, w) in A::ALL.iter().zip(&weights) {
            cfg.weights.insert(*a, *w);
        }
        let targets: Vec<A> = picks.iter().map(|i| A::ALL[*i]).collect();
        let fb = skillforge::feedback::Feedback::new(1, "x".into(), "Focus on it.".into(), targets.clone());
        let out = condition_on_feedback(&cfg, &fb);
        let share = |c: &ScriptedExpertConfig, a: A| c.weight(a) / A::ALL.iter().map(|b| c.weight(*b)).sum::<f64>();
        for a in A::ALL {
            prop_assert!(out.weight(a) > 0.0);
        }
        for t in &targets {
            prop_assert!(share(&out, *t) > share(&cfg, *t));
        }
    }

    #[test]
    fn training_ignores_example_order(
        raw in prop::collection::vec((prop::collection::btree_set(0u32..64, 1..5), 0..Action::COUNT), 1..30),
        rot in 0usize..30,
    ) {
        let data: Vec<TrainExample> = raw
            .iter()
            .map(|(idx, a)| TrainExample {
                features: FeatureVector { dim: 64, idx: idx.iter().copied().collect(), val: vec![0.5; idx.len()] },
                action: Action::ALL[*a],
            })
            .collect();
        let mut shuffled = data.clone();
        shuffled.rotate_left(rot % data.len());
        shuffled.reverse();
        let cfg = TrainConfig { dim: 64, epochs: 3, batch_size: 4, learning_rate: 0.5, ..TrainConfig::default() };
        let (m1, _) = train(&cfg, &data, None, 0).unwrap();
        let (m2, _) = train(&cfg, &shuffled, None, 0).unwrap();
        prop_assert_eq!(m1.to_bytes(), m2.to_bytes());
    }

    #[test]
    fn derived_seeds_are_stable_and_separate(seed in any::<u64>(), a in "[a-z/0-9]{1,12}", b in "[a-z/0-9]{1,12}") {
        prop_assert_eq!(derive(seed, &a), derive(seed, &a));
        if a != b {
            prop_assert_ne!(derive(seed, &a), derive(seed, &b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn world_stays_within_bounds(seed in any::<u64>(), actions in prop::collection::vec(0..Action::COUNT, 1..200)) {
        let mut world = new_world(seed, &randomized_init(seed)).unwrap();
        let mut unlocked: BTreeSet<A> = world.unlocked.clone();
        for a in actions {
            if world.is_terminal() {
                break;
            }
            world.advance(Action::ALL[a]).unwrap();
            let s = world.agent.status;
            for m in [s.health, s.food, s.drink, s.energy] {
                prop_assert!(m <= METER_MAX);
            }
            for (_, n) in world.agent.inventory.iter() {
                prop_assert!(n <= ITEM_MAX);
            }
            prop_assert!(world.tile(world.agent.pos).walkable());
            prop_assert!(world.unlocked.is_superset(&unlocked));
            unlocked = world.unlocked.clone();
        }
    }
}
