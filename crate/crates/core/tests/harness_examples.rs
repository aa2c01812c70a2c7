//! Worked examples for regret accounting and experiment orchestration.

mod common;

use common::*;
use nalgebra::DVector;
use prefrl::features::policy_features;
use prefrl::harness::regret::policy_scores;
use prefrl::harness::{
    best_policy, preference_regret_increment, run_on_instance, score_regret_increment,
    sublinearity_metric, Aggregate, Algorithm, Instance, RunParams,
};
use prefrl::{
    sigmoid, FeatureMap, MarkovPolicy, Mdp, Policy, PolicyClass, PreferenceModel, TransitionModel,
};

#[test]
fn best_policy_matches_brute_force_rescan() {
    for k in 0..50 {
        let inst = instance(&spec(3, 2, 3, 3, 6), 20_000 + k);
        let w = inst.model.w_star();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in inst.policies.iter().enumerate() {
            let s = policy_features(&inst.map, &inst.mdp, p).unwrap().dot(w);
            if s > best.1 {
                best = (i, s);
            }
        }
        let got = best_policy(&inst.policies, &inst.map, &inst.mdp, &inst.model).unwrap();
        assert_eq!(got.0, best.0);
        assert!((got.1 - best.1).abs() < 1e-12);
    }
}

#[test]
fn zero_parameter_picks_the_first_policy() {
    let inst = instance(&spec(3, 2, 3, 3, 6), 21);
    let zero = PreferenceModel::new(DVector::zeros(3), 1.0).unwrap();
    assert_eq!(
        best_policy(&inst.policies, &inst.map, &inst.mdp, &zero).unwrap(),
        (0, 0.0)
    );
}

#[test]
fn score_regret_is_nonnegative_over_random_instances() {
    for k in 0..1000 {
        let inst = instance(&spec(2, 2, 2, 2, 4), 30_000 + k);
        let scores = policy_scores(&inst.policies, &inst.map, &inst.mdp, &inst.model).unwrap();
        let (_, best) = best_policy(&inst.policies, &inst.map, &inst.mdp, &inst.model).unwrap();
        for &a in &scores {
            for &b in &scores {
                assert!(score_regret_increment(best, a, b) >= 0.0);
            }
        }
    }
}

#[test]
fn preference_regret_matches_raw_features() {
    for k in 0..20 {
        let inst = instance(&spec(3, 2, 3, 3, 5), 40_000 + k);
        let (best, _) = best_policy(&inst.policies, &inst.map, &inst.mdp, &inst.model).unwrap();
        let phi: Vec<_> = inst
            .policies
            .iter()
            .map(|p| policy_features(&inst.map, &inst.mdp, p).unwrap())
            .collect();
        let w = inst.model.w_star();
        for i in 0..5 {
            for j in 0..5 {
                let expected = (sigmoid((&phi[best] - &phi[i]).dot(w))
                    + sigmoid((&phi[best] - &phi[j]).dot(w))
                    - 1.0)
                    / 2.0;
                let got = preference_regret_increment(
                    &inst.model,
                    &inst.map,
                    &inst.mdp,
                    inst.policies.get(best),
                    inst.policies.get(i),
                    inst.policies.get(j),
                )
                .unwrap();
                assert!((got - expected).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn slope_of_exact_power_laws() {
    let linear: Vec<f64> = (1..=400).map(|t| 3.0 * t as f64).collect();
    let root: Vec<f64> = (1..=400).map(|t| 2.0 * (t as f64).sqrt()).collect();
    assert!((sublinearity_metric(&linear).unwrap() - 1.0).abs() < 1e-6);
    assert!((sublinearity_metric(&root).unwrap() - 0.5).abs() < 1e-6);
}

fn two_policy_instance() -> Instance {
    let p = TransitionModel::from_rows(&[vec![vec![1.0], vec![1.0]]]).unwrap();
    let mdp = Mdp::new(vec![1.0], p, 1).unwrap();
    let map = FeatureMap::decomposed(&[vec![vec![1.0], vec![-1.0]]]).unwrap();
    let policies = PolicyClass::new(vec![
        Policy::from(MarkovPolicy::new(vec![vec![0]])),
        Policy::from(MarkovPolicy::new(vec![vec![1]])),
    ])
    .unwrap();
    let model = PreferenceModel::new(DVector::from_vec(vec![1.0]), 1.0).unwrap();
    Instance::new(mdp, map, policies, model, None).unwrap()
}

/// Known-model learner beats uniform pairs by at least 3 standard errors
/// on a two-policy instance.
///
/// With two policies the candidate set stays `{0, 1}` while the `α` term
/// dominates the width, so the learner duels the two policies every round
/// and pays half the gap each time. Uniform pairs pay the same amount in
/// expectation, which makes the required margin unreachable at this `T`.
#[test]
fn known_model_beats_uniform_pairs_on_two_policies() {
    let inst = two_policy_instance();
    let rounds = 500;
    let finals = |algorithm| {
        let params = RunParams {
            algorithm,
            lambda: default_lambda(&inst),
            delta: 0.1,
            rounds,
        };
        (0..20u64)
            .map(|seed| {
                *run_on_instance(&inst, &params, seed)
                    .unwrap()
                    .cumulative_scr
                    .last()
                    .unwrap()
            })
            .collect::<Vec<_>>()
    };
    let known = Aggregate::of(&finals(Algorithm::Known));
    let uniform = Aggregate::of(&finals(Algorithm::Uniform));
    let se = (known.se * known.se + uniform.se * uniform.se).sqrt();
    assert!(
        uniform.mean - known.mean >= 3.0 * se,
        "known {:.2} ± {:.2}, uniform {:.2} ± {:.2}",
        known.mean,
        known.se,
        uniform.mean,
        uniform.se
    );
}
