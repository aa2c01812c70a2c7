//! Ground-truth logistic preference model.
//!
//! `P(τ₁ ≻ τ₂) = σ(⟨φ(τ₁) − φ(τ₂), w*⟩)`. Learners never see a
//! [`PreferenceModel`]; they only receive duel outcomes through the
//! [`DuelFeedback`] trait.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{policy_features, trajectory_features, FeatureMap};
use crate::mdp::{Mdp, Policy, Trajectory};

/// Logistic link, evaluated on the side that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// `σ'(x) = σ(x)(1 − σ(x))`.
pub fn sigmoid_derivative(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Largest `|wᵀx|` for which [`kappa`] is finite.
pub const KAPPA_MAX_ARGUMENT: f64 = 700.0;

/// `κ = sup 1/σ'(wᵀx)` over `‖x‖ ≤ B`, `‖w‖ ≤ S`, attained at `|wᵀx| = SB`.
///
/// Uses `1/σ'(y) = 2 + eʸ + e⁻ʸ`.
pub fn kappa(feature_bound: f64, param_bound: f64) -> Result<f64> {
    if !(feature_bound >= 0.0 && param_bound >= 0.0) {
        return Err(Error::InvalidArgument("B and S must be nonnegative".into()));
    }
    let y = feature_bound * param_bound;
    if y > KAPPA_MAX_ARGUMENT {
        return Err(Error::InvalidArgument(format!("S·B = {y} overflows κ")));
    }
    Ok(2.0 + y.exp() + (-y).exp())
}

/// Hidden parameter `w*` with its known norm bound `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    w_star: DVector<f64>,
    param_bound: f64,
}

impl PreferenceModel {
    pub fn new(w_star: DVector<f64>, param_bound: f64) -> Result<Self> {
        if !(param_bound > 0.0) {
            return Err(Error::InvalidArgument("S must be positive".into()));
        }
        if w_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("w* has non-finite entries".into()));
        }
        let norm = w_star.norm();
        if norm > param_bound {
            return Err(Error::InvalidArgument(format!(
                "‖w*‖ = {norm} exceeds S = {param_bound}"
            )));
        }
        Ok(Self {
            w_star,
            param_bound,
        })
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    fn score_of(&self, phi: &DVector<f64>) -> Result<f64> {
        if phi.len() != self.w_star.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w_star.len(),
                actual: phi.len(),
            });
        }
        Ok(phi.dot(&self.w_star))
    }
}

/// `s(τ) = ⟨φ(τ), w*⟩`.
pub fn trajectory_score(
    model: &PreferenceModel,
    map: &FeatureMap,
    tau: &Trajectory,
) -> Result<f64> {
    model.score_of(&trajectory_features(map, tau)?)
}

/// `s(π) = ⟨φ(π), w*⟩`.
pub fn policy_score(
    model: &PreferenceModel,
    map: &FeatureMap,
    mdp: &Mdp,
    policy: &Policy,
) -> Result<f64> {
    model.score_of(&policy_features(map, mdp, policy)?)
}

/// `P(τ₁ ≻ τ₂)`.
pub fn preference_prob(
    model: &PreferenceModel,
    map: &FeatureMap,
    first: &Trajectory,
    second: &Trajectory,
) -> Result<f64> {
    let diff = trajectory_features(map, first)? - trajectory_features(map, second)?;
    Ok(sigmoid(model.score_of(&diff)?))
}

/// Draws `o ~ Bernoulli(P(τ₁ ≻ τ₂))`; `true` means `τ₁` is preferred.
pub fn sample_preference<R: Rng + ?Sized>(
    rng: &mut R,
    model: &PreferenceModel,
    map: &FeatureMap,
    first: &Trajectory,
    second: &Trajectory,
) -> Result<bool> {
    let p = preference_prob(model, map, first, second)?;
    Ok(rng.random::<f64>() < p)
}

/// Source of duel outcomes for a learner.
pub trait DuelFeedback {
    /// Returns `true` when `first` beats `second`.
    fn compare<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        first: &Trajectory,
        second: &Trajectory,
    ) -> Result<bool>;
}

/// [`DuelFeedback`] backed by the logistic model.
#[derive(Debug, Clone, Copy)]
pub struct LogisticOracle<'a> {
    model: &'a PreferenceModel,
    map: &'a FeatureMap,
}

impl<'a> LogisticOracle<'a> {
    pub fn new(model: &'a PreferenceModel, map: &'a FeatureMap) -> Self {
        Self { model, map }
    }
}

impl DuelFeedback for LogisticOracle<'_> {
    fn compare<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        first: &Trajectory,
        second: &Trajectory,
    ) -> Result<bool> {
        sample_preference(rng, self.model, self.map, first, second)
    }
}
