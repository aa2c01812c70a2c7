//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "instance": { "kind": "random", "states": 3, "actions": 2, "horizon": 3,
//!                 "dim": 4, "policies": 8, "param_bound": 1.0, "step_norm": 0.3 },
//!   "algorithm": "known",
//!   "delta": 0.1,
//!   "rounds": 200,
//!   "seeds": [0, 1, 2]
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{random_instance, Instance, RandomInstanceSpec};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{
    HistoryPolicy, MarkovPolicy, Mdp, Policy, PolicyClass, Trajectory, TransitionModel,
};
use crate::oracle::{kappa, PreferenceModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Known,
    Unknown,
    /// Uniform-random pair selection; a comparator, not a learner.
    Uniform,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Known => "known",
            Algorithm::Unknown => "unknown",
            Algorithm::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub initial: Vec<f64>,
    /// `transitions[s][a][s']`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularEntry {
    pub trajectory: Vec<(usize, usize)>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FeatureSpec {
    /// `table[s][a]` is `φ(s, a)`.
    Decomposed { table: Vec<Vec<Vec<f64>>> },
    Tabular {
        dim: usize,
        entries: Vec<TabularEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryRule {
    pub prefix: Vec<(usize, usize)>,
    pub state: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PolicySpec {
    /// `actions[h][s]`.
    Markov {
        actions: Vec<Vec<usize>>,
    },
    /// One action per state, repeated for every step.
    Stationary {
        actions: Vec<usize>,
    },
    History {
        rules: Vec<HistoryRule>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInstance {
    pub mdp: MdpSpec,
    pub features: FeatureSpec,
    pub policies: Vec<PolicySpec>,
    pub w_star: Vec<f64>,
    pub param_bound: f64,
    /// Defaults to the exact bound computed from the features.
    #[serde(default)]
    pub feature_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSpec {
    Explicit(ExplicitInstance),
    Random(RandomInstanceSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub instance: InstanceSpec,
    pub algorithm: Algorithm,
    /// Defaults to `max(B/κ, 1/κ)`.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub delta: f64,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also write `curve.svg`.
    #[serde(default)]
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("δ = {} outside (0, 1)", self.delta)));
        }
        if self.algorithm == Algorithm::Known && self.delta > (-1f64).exp() {
            return Err(Error::Config(format!(
                "known-model runs need δ ≤ 1/e, got {}",
                self.delta
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("λ = {l} must be positive")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if let InstanceSpec::Explicit(e) = &self.instance {
            build_explicit(e)?;
        }
        Ok(())
    }

    /// Instance used for `seed`.
    pub fn instance(&self, seed: u64) -> Result<Instance> {
        match &self.instance {
            InstanceSpec::Explicit(e) => build_explicit(e),
            InstanceSpec::Random(spec) => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.instance_seed.unwrap_or(seed));
                // A separate stream keeps instance draws apart from run draws.
                rng.set_stream(1);
                random_instance(spec, &mut rng)
            }
        }
    }

    /// `λ` for an instance with bounds `S` and `B`.
    pub fn lambda_for(&self, param_bound: f64, feature_bound: f64) -> Result<f64> {
        let k = kappa(feature_bound, param_bound)?;
        let lambda = self.lambda.unwrap_or((feature_bound / k).max(1.0 / k));
        if self.algorithm == Algorithm::Known && lambda < feature_bound / k {
            return Err(Error::Config(format!(
                "known-model runs need λ ≥ B/κ = {}",
                feature_bound / k
            )));
        }
        Ok(lambda)
    }
}

fn build_policy(spec: &PolicySpec, horizon: usize) -> Policy {
    match spec {
        PolicySpec::Markov { actions } => MarkovPolicy::new(actions.clone()).into(),
        PolicySpec::Stationary { actions } => {
            MarkovPolicy::stationary(actions.clone(), horizon).into()
        }
        PolicySpec::History { rules } => {
            let mut p = HistoryPolicy::default();
            for r in rules {
                p.insert(r.prefix.clone(), r.state, r.action);
            }
            p.into()
        }
    }
}

fn build_explicit(e: &ExplicitInstance) -> Result<Instance> {
    let transitions = TransitionModel::from_rows(&e.mdp.transitions)?;
    let mdp = Mdp::new(e.mdp.initial.clone(), transitions, e.mdp.horizon)?;
    let map = match &e.features {
        FeatureSpec::Decomposed { table } => FeatureMap::decomposed(table)?,
        FeatureSpec::Tabular { dim, entries } => FeatureMap::tabular(
            *dim,
            entries
                .iter()
                .map(|x| (Trajectory::new(x.trajectory.clone()), x.phi.clone()))
                .collect(),
        )?,
    };
    let policies = PolicyClass::new(
        e.policies
            .iter()
            .map(|p| build_policy(p, e.mdp.horizon))
            .collect(),
    )?;
    let model = PreferenceModel::new(DVector::from_vec(e.w_star.clone()), e.param_bound)?;
    Instance::new(mdp, map, policies, model, e.feature_bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPLICIT: &str = r#"{
        "schema": 1,
        "instance": {
            "kind": "explicit",
            "mdp": { "initial": [1.0], "transitions": [[[1.0], [1.0]]], "horizon": 2 },
            "features": { "kind": "decomposed", "table": [[[0.5, 0.0], [0.0, 0.5]]] },
            "policies": [ { "kind": "stationary", "actions": [0] },
                          { "kind": "markov", "actions": [[1], [1]] } ],
            "w_star": [0.8, -0.2],
            "param_bound": 1.0
        },
        "algorithm": "known",
        "delta": 0.1,
        "rounds": 10,
        "seeds": [3, 4]
    }"#;

    #[test]
    fn parses_explicit_instance() {
        let cfg = ExperimentConfig::from_json(EXPLICIT).unwrap();
        let inst = cfg.instance(3).unwrap();
        assert_eq!(inst.policies.len(), 2);
        assert!((inst.feature_bound - 1.0).abs() < 1e-15);
        assert!(cfg.lambda_for(1.0, inst.feature_bound).unwrap() > 0.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let extra = EXPLICIT.replace("\"rounds\": 10", "\"rounds\": 10, \"colour\": 1");
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let nested = EXPLICIT.replace("\"horizon\": 2 }", "\"horizon\": 2, \"gamma\": 0.9 }");
        assert!(ExperimentConfig::from_json(&nested).is_err());
        let schema = EXPLICIT.replace("\"schema\": 1", "\"schema\": 2");
        assert!(ExperimentConfig::from_json(&schema).is_err());
        let dims = EXPLICIT.replace("[0.8, -0.2]", "[0.8, -0.2, 0.1]");
        assert!(ExperimentConfig::from_json(&dims).is_err());
        let seeds = EXPLICIT.replace("[3, 4]", "[3, 3]");
        assert!(ExperimentConfig::from_json(&seeds).is_err());
    }

    #[test]
    fn random_instance_is_seeded() {
        let text = r#"{ "schema": 1,
            "instance": { "kind": "random", "states": 2, "actions": 2, "horizon": 2, "dim": 3,
                          "policies": 4, "param_bound": 1.0, "step_norm": 0.4 },
            "algorithm": "unknown", "delta": 0.1, "rounds": 5, "seeds": [1, 2] }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let a = cfg.instance(1).unwrap();
        let b = cfg.instance(1).unwrap();
        assert_eq!(a.model.w_star(), b.model.w_star());
        assert_ne!(cfg.instance(2).unwrap().model.w_star(), a.model.w_star());
    }
}
