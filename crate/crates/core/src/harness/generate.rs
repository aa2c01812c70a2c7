//! Random tabular instances with decomposed features and Markov policies.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_bound, FeatureMap};
use crate::mdp::{MarkovPolicy, Mdp, Policy, PolicyClass, TransitionModel};
use crate::oracle::PreferenceModel;

/// Everything a run needs about the environment and the hidden preference.
#[derive(Debug, Clone)]
pub struct Instance {
    pub mdp: Mdp,
    pub map: FeatureMap,
    pub policies: PolicyClass,
    pub model: PreferenceModel,
    /// `B`, an upper bound on `‖φ(τ)‖`.
    pub feature_bound: f64,
}

impl Instance {
    /// Checks that all parts agree on `d`, `|S|`, `|A|` and `H`.
    pub fn new(
        mdp: Mdp,
        map: FeatureMap,
        policies: PolicyClass,
        model: PreferenceModel,
        bound: Option<f64>,
    ) -> Result<Self> {
        if map.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                actual: model.dim(),
            });
        }
        policies.validate(&mdp)?;
        map.validate(&mdp, policies.policies())?;
        let exact = feature_bound(&map, &mdp).value();
        let feature_bound = match bound {
            Some(b) if b + 1e-12 < exact => {
                return Err(Error::Config(format!(
                    "B = {b} is below the feature norm bound {exact}"
                )));
            }
            Some(b) => b,
            None => exact,
        };
        Ok(Self {
            mdp,
            map,
            policies,
            model,
            feature_bound,
        })
    }
}

/// Shape of a random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInstanceSpec {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub dim: usize,
    pub policies: usize,
    /// `S`; `w*` is drawn with norm in `[S/2, S]`.
    pub param_bound: f64,
    /// Largest per-step feature norm; `B = H · step_norm` at most.
    pub step_norm: f64,
    /// Fixed instance across seeds when set; otherwise each seed draws its own.
    #[serde(default)]
    pub instance_seed: Option<u64>,
}

fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    // Normalized exponentials are uniform on the simplex.
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn ball_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, min_frac: f64, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            let r = radius * rng.random_range(min_frac..=1.0);
            return v.into_iter().map(|x| x * r / norm).collect();
        }
    }
}

/// Draws an instance of the given shape.
pub fn random_instance<R: Rng + ?Sized>(
    spec: &RandomInstanceSpec,
    rng: &mut R,
) -> Result<Instance> {
    let &RandomInstanceSpec {
        states,
        actions,
        horizon,
        dim,
        policies,
        param_bound,
        step_norm,
        ..
    } = spec;
    if states == 0 || actions == 0 || horizon == 0 || dim == 0 || policies == 0 {
        return Err(Error::Config(
            "random instance sizes must be positive".into(),
        ));
    }
    if !(param_bound > 0.0 && step_norm >= 0.0) {
        return Err(Error::Config(
            "random instance needs S > 0 and step_norm ≥ 0".into(),
        ));
    }
    let log_count = (states * horizon) as f64 * (actions as f64).ln();
    if log_count < (policies as f64).ln() - 1e-9 {
        return Err(Error::Config(format!(
            "cannot draw {policies} distinct Markov policies"
        )));
    }

    let initial = simplex(rng, states);
    let mut probs = Vec::with_capacity(states * actions * states);
    for _ in 0..states * actions {
        probs.extend(simplex(rng, states));
    }
    let transitions = TransitionModel::new(states, actions, probs)?;
    let mdp = Mdp::new(initial, transitions, horizon)?;

    let rows: Vec<Vec<Vec<f64>>> = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| ball_point(rng, dim, 0.0, step_norm))
                .collect()
        })
        .collect();
    let map = FeatureMap::decomposed(&rows)?;

    let mut seen = BTreeSet::new();
    let mut class = Vec::with_capacity(policies);
    while class.len() < policies {
        let table: Vec<Vec<usize>> = (0..horizon)
            .map(|_| (0..states).map(|_| rng.random_range(0..actions)).collect())
            .collect();
        if seen.insert(table.clone()) {
            class.push(Policy::from(MarkovPolicy::new(table)));
        }
    }
    let w = ball_point(rng, dim, 0.5, param_bound);
    let model = PreferenceModel::new(DVector::from_vec(w), param_bound)?;
    Instance::new(mdp, map, PolicyClass::new(class)?, model, None)
}
