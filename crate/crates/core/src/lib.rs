//! Preference-based reinforcement learning with trajectory-level duels.
//!
//! The crate provides finite-horizon MDPs, feature embeddings, a logistic
//! preference oracle, a regularized MLE with a norm-ball projection, two
//! dueling learners (known and unknown dynamics) and an experiment harness
//! that tracks score and preference regret.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod features;
pub mod harness;
pub mod known;
pub mod learner;
pub mod mdp;
pub mod oracle;
pub mod unknown;

pub use error::{Error, Result};
pub use features::{FeatureBound, FeatureMap};
pub use known::{KnownModelConfig, KnownModelLearner, TieBreak};
pub use learner::{Diagnostics, DuelingLearner, StepOutcome};
pub use mdp::{MarkovPolicy, Mdp, Policy, PolicyClass, Trajectory, TransitionModel};
pub use oracle::{kappa, sigmoid, LogisticOracle, PreferenceModel};
pub use unknown::{UnknownModelConfig, UnknownModelLearner, UnknownModelOptions};
