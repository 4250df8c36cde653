mod common;

use belief_bound::analysis::{evaluate_policy, MemorylessObsPolicy};
use belief_bound::explorer::serialize_abstraction;
use belief_bound::model::{parse_pomdp, serialize_pomdp};
use belief_bound::numeric::to_f64;
use belief_bound::report::{run_analyze, AnalyzeOptions, Direction, Objective};
use belief_bound::Extended;
use common::*;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bound_never_exceeds_optimum(
        seed in 0u64..10_000,
        negative in any::<bool>(),
        clipping in any::<bool>(),
        eta in 1u32..4,
        size_factor in 0.0f64..1.5,
    ) {
        let variant = if negative { Variant::Negative } else { Variant::Positive };
        let rm = random_model(seed, variant);
        let exact = Oracle::new(&rm.model.pomdp, &rm.model.rewards, &rm.goal).initial_value();
        let out = run_analyze(&rm.model, "p", &AnalyzeOptions {
            clipping,
            eta,
            size_factor,
            omit_timing: true,
            ..Default::default()
        }).unwrap();
        let bound = out.report.bound.finite().cloned().unwrap();
        prop_assert!(bound <= exact);
        if out.abstraction.is_complete() {
            prop_assert_eq!(bound, exact);
        }
    }

    #[test]
    fn minimisation_bounds_from_above(seed in 0u64..10_000) {
        let rm = random_model(seed, Variant::Positive);
        let negated = belief_bound::model::negate_rewards(&rm.model.rewards);
        // min of R is minus the max of -R
        let min = -Oracle::new(&rm.model.pomdp, &negated, &rm.goal).initial_value();
        let out = run_analyze(&rm.model, "p", &AnalyzeOptions {
            direction: Direction::Min,
            size_factor: 0.5,
            omit_timing: true,
            ..Default::default()
        }).unwrap();
        prop_assert!(out.report.bound >= Extended::Finite(min));
    }

    #[test]
    fn model_text_round_trips(seed in 0u64..10_000) {
        let rm = random_model(seed, Variant::SharedGoals);
        let text = serialize_pomdp(&rm.model);
        let again = parse_pomdp(&text).unwrap();
        prop_assert_eq!(&again, &rm.model);
        prop_assert_eq!(serialize_pomdp(&again), text);
    }
}

#[test]
fn reachability_is_a_probability() {
    for seed in 0..30 {
        let rm = random_model(seed, Variant::Positive);
        let out = run_analyze(
            &rm.model,
            "p",
            &AnalyzeOptions {
                objective: Objective::Reachability,
                size_factor: 4.0,
                omit_timing: true,
                ..Default::default()
            },
        )
        .unwrap();
        let v = out.report.bound.to_f64();
        assert!((0.0..=1.0).contains(&v), "seed {seed}: {v}");
    }
}

#[test]
fn abstraction_serializes_to_a_valid_model() {
    let rm = random_model(7, Variant::Positive);
    let out = run_analyze(
        &rm.model,
        "p",
        &AnalyzeOptions {
            clipping: true,
            size_factor: 0.0,
            omit_timing: true,
            ..Default::default()
        },
    )
    .unwrap();
    let text = serialize_abstraction(&out.abstraction).unwrap();
    let parsed = parse_pomdp(&text).unwrap();
    assert_eq!(parsed.pomdp.num_states(), out.abstraction.num_states());
}

/// Simulates the induced chain and compares the sample mean with the exact policy value.
#[test]
fn policy_value_matches_simulation() {
    let rm = random_model(3, Variant::Positive);
    let pomdp = &rm.model.pomdp;
    let policy = MemorylessObsPolicy {
        choice: vec![Some(0); pomdp.num_observations()],
    };
    let exact = evaluate_policy(pomdp, &policy, &rm.model.rewards, &rm.goal).unwrap();
    let expected = exact.values[pomdp.mdp().initial()].to_f64();
    let mut rng = rng(99);
    let runs = 20_000;
    let mut total = 0.0;
    for _ in 0..runs {
        let mut s = pomdp.mdp().initial();
        for _ in 0..64 {
            if rm.goal[s] {
                break;
            }
            let a = policy.action(pomdp, s);
            let choice = pomdp.mdp().choice(s, a).unwrap();
            let mut x: f64 = rng.random();
            let mut next = choice.successors.last().unwrap().0;
            for (t, p) in &choice.successors {
                let p = to_f64(p);
                if x < p {
                    next = *t;
                    break;
                }
                x -= p;
            }
            total += to_f64(&rm.model.rewards.get(s, a, next));
            s = next;
        }
    }
    let mean = total / runs as f64;
    assert!(
        (mean - expected).abs() < 0.05,
        "sampled {mean}, exact {expected}"
    );
}
