//! Dueling learner for known transition dynamics.
//!
//! Each round refits `w^L`, keeps the policies that no other policy beats
//! by more than the confidence width, and duels the pair in that set whose
//! expected-feature difference is least explored under `V̄`:
//!
//! ```text
//!   S_t = { π¹ : (φ(π¹) − φ(π))ᵀ w^L + (2κβ_t + α) ‖φ(π¹) − φ(π)‖_{V̄⁻¹} ≥ 0  ∀π }
//!   (π¹, π²) = argmax_{S_t × S_t} ‖φ(π¹) − φ(π²)‖_{V̄⁻¹}
//! ```
//!
//! `V` accumulates trajectory-feature differences, `V̄` policy-feature
//! differences; both start at `κλI`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{beta, fit_estimate, BetaParams, DataMatrix, DuelDataset, Estimate};
use crate::features::{policy_features, trajectory_features, FeatureMap};
use crate::learner::{argmax_pair, pairwise_inv_norms, Diagnostics, DuelingLearner, StepOutcome};
use crate::mdp::{sample_trajectory, Mdp, PolicyClass};
use crate::oracle::DuelFeedback;

/// `α_{d,T}(δ) = 20 B S √(d log(T(1 + 2T)/δ))`.
pub fn alpha(
    dim: usize,
    horizon_rounds: usize,
    delta: f64,
    feature_bound: f64,
    param_bound: f64,
) -> Result<f64> {
    if horizon_rounds == 0 {
        return Err(Error::InvalidArgument("α needs T ≥ 1".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "δ = {delta} outside (0, 1]"
        )));
    }
    let t = horizon_rounds as f64;
    let log_term = (t * (1.0 + 2.0 * t) / delta).ln();
    Ok(20.0 * feature_bound * param_bound * (dim as f64 * log_term).sqrt())
}

/// Policies not significantly beaten by any other policy.
///
/// `features[i]` is `φ(πᵢ)`; membership is checked against every policy.
pub fn candidate_set(
    features: &[DVector<f64>],
    w: &DVector<f64>,
    vbar: &DataMatrix,
    threshold: f64,
) -> Vec<usize> {
    let norms = pairwise_inv_norms(features, vbar);
    candidate_set_with_norms(features, w, &norms, threshold, |_| 0.0)
}

/// Shared membership test; `bonus(i)` is added once for each side.
pub(crate) fn candidate_set_with_norms(
    features: &[DVector<f64>],
    w: &DVector<f64>,
    norms: &[Vec<f64>],
    threshold: f64,
    bonus: impl Fn(usize) -> f64,
) -> Vec<usize> {
    let scores: Vec<f64> = features.iter().map(|f| f.dot(w)).collect();
    (0..features.len())
        .filter(|&i| {
            (0..features.len()).all(|j| {
                let diff = (&features[i] - &features[j]).dot(w);
                debug_assert!((diff - (scores[i] - scores[j])).abs() <= 1e-9 * (1.0 + diff.abs()));
                diff + threshold * norms[i][j] + bonus(i) + bonus(j) >= 0.0
            })
        })
        .collect()
}

/// `argmax_{(π¹, π²) ∈ S_t²} ‖φ(π¹) − φ(π²)‖_{V̄⁻¹}`, lowest index pair on ties.
pub fn select_pair(
    set: &[usize],
    features: &[DVector<f64>],
    vbar: &DataMatrix,
) -> Result<(usize, usize)> {
    let (i, j, _) = argmax_pair(set, |i, j| {
        if i == j {
            0.0
        } else {
            vbar.inv_norm(&(&features[i] - &features[j]))
        }
    })?;
    Ok((i, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lexicographically smallest `(i, j)` among maximizers.
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownModelConfig {
    pub lambda: f64,
    pub delta: f64,
    pub horizon_rounds: usize,
    pub param_bound: f64,
    pub feature_bound: f64,
    pub dim: usize,
    pub kappa: f64,
    pub tie_break: TieBreak,
}

impl KnownModelConfig {
    /// Requires `λ ≥ B/κ` and `δ ∈ (0, 1/e]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || self.lambda < self.feature_bound / self.kappa * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "λ = {} must be positive and at least B/κ = {}",
                self.lambda,
                self.feature_bound / self.kappa
            )));
        }
        if !(self.delta > 0.0 && self.delta <= (-1.0f64).exp()) {
            return Err(Error::Config(format!(
                "δ = {} outside (0, 1/e]",
                self.delta
            )));
        }
        if self.dim == 0 || !(self.param_bound > 0.0) || !(self.feature_bound >= 0.0) {
            return Err(Error::Config("need d ≥ 1, S > 0, B ≥ 0".into()));
        }
        Ok(())
    }

    pub(crate) fn beta_params(&self) -> BetaParams {
        BetaParams {
            delta: self.delta,
            lambda: self.lambda,
            param_bound: self.param_bound,
            feature_bound: self.feature_bound,
            dim: self.dim,
            kappa: self.kappa,
        }
    }

    /// `α_{d,T}(δ)` for this configuration (0 when `T = 0`).
    pub fn alpha(&self) -> Result<f64> {
        if self.horizon_rounds == 0 {
            return Ok(0.0);
        }
        alpha(
            self.dim,
            self.horizon_rounds,
            self.delta,
            self.feature_bound,
            self.param_bound,
        )
    }
}

/// Mutable state of one known-model run.
#[derive(Debug, Clone)]
pub struct KnownModelState {
    pub t: usize,
    pub v: DataMatrix,
    pub vbar: DataMatrix,
    pub dataset: DuelDataset,
    pub estimate: Estimate,
    pub policy_features: Vec<DVector<f64>>,
    /// Rank-one terms added to `V̄`, in order.
    pub vbar_terms: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct KnownModelLearner {
    config: KnownModelConfig,
    policies: PolicyClass,
    alpha: f64,
    state: KnownModelState,
}

impl KnownModelLearner {
    /// Caches `φ(π)` for every policy in the true dynamics.
    pub fn new(
        config: KnownModelConfig,
        policies: PolicyClass,
        mdp: &Mdp,
        map: &FeatureMap,
    ) -> Result<Self> {
        config.validate()?;
        if map.dim() != config.dim {
            return Err(Error::DimensionMismatch {
                expected: config.dim,
                actual: map.dim(),
            });
        }
        let policy_features = policies
            .iter()
            .map(|p| policy_features(map, mdp, p))
            .collect::<Result<Vec<_>>>()?;
        let base = config.kappa * config.lambda;
        let state = KnownModelState {
            t: 0,
            v: DataMatrix::new(config.dim, base)?,
            vbar: DataMatrix::new(config.dim, base)?,
            dataset: DuelDataset::with_feature_bound(config.feature_bound),
            estimate: Estimate::initial(config.dim, config.lambda, config.param_bound),
            policy_features,
            vbar_terms: Vec::new(),
        };
        let alpha = config.alpha()?;
        Ok(Self {
            config,
            policies,
            alpha,
            state,
        })
    }

    pub fn config(&self) -> &KnownModelConfig {
        &self.config
    }

    pub fn state(&self) -> &KnownModelState {
        &self.state
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn policies(&self) -> &PolicyClass {
        &self.policies
    }

    /// Checks that `V` and `V̄` equal `κλI` plus their logged terms.
    pub fn check_matrix_log(&self, tol: f64) -> Result<()> {
        let base = self.config.kappa * self.config.lambda;
        let dim = self.config.dim;
        let v = DataMatrix::from_terms(
            dim,
            base,
            self.state.dataset.records().iter().map(|(z, _)| z),
        )?;
        let vbar = DataMatrix::from_terms(dim, base, self.state.vbar_terms.iter())?;
        let dv = (v.matrix() - self.state.v.matrix()).amax();
        let dvbar = (vbar.matrix() - self.state.vbar.matrix()).amax();
        if dv > tol || dvbar > tol {
            return Err(Error::Invariant(format!(
                "data matrices drifted from their logs ({dv:e}, {dvbar:e})"
            )));
        }
        Ok(())
    }
}

impl DuelingLearner for KnownModelLearner {
    fn step<F: DuelFeedback, R: Rng + ?Sized>(
        &mut self,
        mdp: &Mdp,
        map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let round = self.state.t + 1;
        self.step_inner(round, mdp, map, feedback, rng)
            .map_err(|e| Error::Round {
                round,
                source: Box::new(e),
            })
    }

    fn rounds(&self) -> usize {
        self.state.t
    }
}

impl KnownModelLearner {
    fn step_inner<F: DuelFeedback, R: Rng + ?Sized>(
        &mut self,
        round: usize,
        mdp: &Mdp,
        map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let st = &mut self.state;
        let cfg = &self.config;
        let previous = (st.t > 0).then_some(&st.estimate);
        let estimate = fit_estimate(&st.dataset, &st.v, cfg.lambda, cfg.param_bound, previous)?;
        let beta_t = beta(round as f64, &cfg.beta_params())?;
        let threshold = 2.0 * cfg.kappa * beta_t + self.alpha;
        let set = candidate_set(&st.policy_features, &estimate.w_proj, &st.vbar, threshold);
        let (i, j) = select_pair(&set, &st.policy_features, &st.vbar)?;

        let tau1 = sample_trajectory(mdp, self.policies.get(i), rng)?;
        let tau2 = sample_trajectory(mdp, self.policies.get(j), rng)?;
        let outcome = feedback.compare(rng, &tau1, &tau2)?;

        let z = trajectory_features(map, &tau1)? - trajectory_features(map, &tau2)?;
        st.v.update(&z)?;
        st.dataset.push(z, outcome)?;
        let zbar = &st.policy_features[i] - &st.policy_features[j];
        st.vbar.update(&zbar)?;
        st.vbar_terms.push(zbar);
        st.estimate = estimate.clone();
        st.t = round;

        Ok(StepOutcome {
            t: round,
            pair: (i, j),
            trajectories: (tau1, tau2),
            outcome,
            diagnostics: Diagnostics {
                radius: beta_t,
                candidate_set: set,
                grad_norm: estimate.grad_norm,
                projection_objective: estimate.projection_objective,
                max_xi: None,
                min_count: None,
            },
            estimate,
        })
    }
}
