//! Dueling learner for unknown transition dynamics.
//!
//! Policy embeddings are computed in the empirical model `P̂_t` built from
//! visit counts. Model error is covered by count-based bonuses
//!
//! ```text
//!   ξ(s, a)      = min(2η, 4η √(U / N(s, a)))
//!   B̂_t(π, η, δ) = E_{τ ~ P̂_t^π} [ Σ_{h=1}^{H−1} ξ(s_h, a_h) ]
//! ```
//!
//! and the confidence multiplier `γ_t`, which adds the root of the squared
//! bonuses of every previously played pair to the known-model width.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{beta, fit_estimate, BetaParams, DataMatrix, DuelDataset, Estimate};
use crate::features::{policy_features_in_model, trajectory_features, FeatureMap};
use crate::known::{alpha, candidate_set_with_norms, TieBreak};
use crate::learner::{argmax_pair, pairwise_inv_norms, Diagnostics, DuelingLearner, StepOutcome};
use crate::mdp::{
    enumerate_in_model, occupancy_in_model, sample_trajectory, Mdp, Policy, PolicyClass,
    Trajectory, TransitionModel, DEFAULT_ENUMERATION_CAP,
};
use crate::oracle::DuelFeedback;

/// Visit and transition counts.
///
/// `visits[s·|A| + a]` counts every step of every observed trajectory;
/// the last step of a trajectory has no successor and is tallied in
/// `terminal` instead of `transitions`, so
/// `Σ_{s'} transitions(s, a, s') + terminal(s, a) = visits(s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    num_states: usize,
    num_actions: usize,
    visits: Vec<u64>,
    terminal: Vec<u64>,
    transitions: Vec<u64>,
}

impl VisitCounts {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            visits: vec![0; num_states * num_actions],
            terminal: vec![0; num_states * num_actions],
            transitions: vec![0; num_states * num_actions * num_states],
        }
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.num_actions + a]
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> u64 {
        self.transitions[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Observed transitions out of `(s, a)`.
    pub fn transitions_from(&self, s: usize, a: usize) -> u64 {
        let start = (s * self.num_actions + a) * self.num_states;
        self.transitions[start..start + self.num_states]
            .iter()
            .sum()
    }

    pub fn visit_table(&self) -> &[u64] {
        &self.visits
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Records all `H` steps of `τ` and its `H − 1` transitions.
    pub fn update(&mut self, tau: &Trajectory) {
        let steps = tau.steps();
        for (h, &(s, a)) in steps.iter().enumerate() {
            let sa = s * self.num_actions + a;
            self.visits[sa] += 1;
            match steps.get(h + 1) {
                Some(&(next, _)) => self.transitions[sa * self.num_states + next] += 1,
                None => self.terminal[sa] += 1,
            }
        }
    }

    pub fn check_consistency(&self) -> Result<()> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let sa = s * self.num_actions + a;
                if self.transitions_from(s, a) + self.terminal[sa] != self.visits[sa] {
                    return Err(Error::Invariant(format!(
                        "counts of ({s},{a}) are inconsistent"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `counts' = counts` updated with `τ`.
pub fn update_counts(counts: &VisitCounts, tau: &Trajectory) -> VisitCounts {
    let mut out = counts.clone();
    out.update(tau);
    out
}

/// Frequency estimate of the dynamics; unobserved rows are uniform.
pub fn empirical_model(counts: &VisitCounts) -> TransitionModel {
    let (ns, na) = (counts.num_states, counts.num_actions);
    let mut probs = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let start = (s * na + a) * ns;
            let total = counts.transitions_from(s, a);
            let row = &mut probs[start..start + ns];
            if total == 0 {
                row.fill(1.0 / ns as f64);
            } else {
                for (p, &m) in row.iter_mut().zip(&counts.transitions[start..start + ns]) {
                    *p = m as f64 / total as f64;
                }
            }
        }
    }
    TransitionModel::new_unchecked(ns, na, probs).expect("shape matches counts")
}

/// Arguments of the bonus terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusParams {
    pub eta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

impl BonusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.epsilon > 0.0 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(
                "bonus parameters need η, ε > 0 and δ ∈ (0, 1)".into(),
            ));
        }
        if self.horizon == 0 || self.num_states == 0 || self.num_actions == 0 {
            return Err(Error::InvalidArgument(
                "bonus parameters need H, |S|, |A| ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

fn xi_from_u(count: u64, eta: f64, u: f64) -> f64 {
    if count <= 1 {
        return 2.0 * eta;
    }
    (2.0 * eta).min(4.0 * eta * (u.max(0.0) / count as f64).sqrt())
}

/// `ξ(η, δ)` with the confidence level given as `log(1/δ)`.
pub fn xi_hat_log(
    count: u64,
    eta: f64,
    log_inv_delta: f64,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
) -> f64 {
    if count <= 1 {
        return 2.0 * eta;
    }
    let u = horizon as f64 * ((num_states * num_actions) as f64).ln()
        + 6f64.ln()
        + (count as f64).ln().ln()
        + log_inv_delta;
    xi_from_u(count, eta, u)
}

/// `ξ(η, δ) = min(2η, 4η√(U/N))`, `U = H log(|S||A|) + log(6 log N / δ)`.
/// Counts `N ≤ 1` return `2η`.
pub fn xi_hat(
    count: u64,
    eta: f64,
    delta: f64,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
) -> f64 {
    xi_hat_log(count, eta, -delta.ln(), horizon, num_states, num_actions)
}

/// `ξ(ε, η, δ)`, with `U = H log(|S||A|H) + |S| log⌈4ηH/ε⌉ + log(6 log N / δ)`.
pub fn xi_eps(count: u64, p: &BonusParams) -> f64 {
    if count <= 1 {
        return 2.0 * p.eta;
    }
    let h = p.horizon as f64;
    let u = h * ((p.num_states * p.num_actions) as f64 * h).ln()
        + p.num_states as f64 * (4.0 * p.eta * h / p.epsilon).ceil().ln()
        + (6.0 * (count as f64).ln() / p.delta).ln();
    xi_from_u(count, p.eta, u)
}

/// Per-(s, a) table of `ξ(η, δ)` for the given counts.
pub fn xi_hat_table(
    counts: &VisitCounts,
    eta: f64,
    log_inv_delta: f64,
    horizon: usize,
) -> Vec<f64> {
    counts
        .visits
        .iter()
        .map(|&n| {
            xi_hat_log(
                n,
                eta,
                log_inv_delta,
                horizon,
                counts.num_states,
                counts.num_actions,
            )
        })
        .collect()
}

/// `Σ_{h=1}^{H−1} d_h(s, a)` for a policy in `model`, flattened `s·|A| + a`.
pub fn bonus_weights(
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
) -> Result<Vec<f64>> {
    let na = model.num_actions();
    let mut weights = vec![0.0; model.num_states() * na];
    match policy {
        Policy::Markov(_) => {
            let occ = occupancy_in_model(model, initial_dist, horizon, policy)?;
            for layer in occ.layers().iter().take(horizon.saturating_sub(1)) {
                for (w, d) in weights.iter_mut().zip(layer) {
                    *w += d;
                }
            }
        }
        Policy::History(_) => {
            for (tau, p) in enumerate_in_model(
                model,
                initial_dist,
                horizon,
                policy,
                DEFAULT_ENUMERATION_CAP,
            )? {
                for &(s, a) in tau.steps().iter().take(horizon.saturating_sub(1)) {
                    weights[s * na + a] += p;
                }
            }
        }
    }
    Ok(weights)
}

/// `E_{τ ~ model^π}[Σ_{h=1}^{H−1} ξ(s_h, a_h)]` for a per-(s, a) bonus table.
///
/// With the empirical model and `ξ(η, δ)` this is `B̂_t(π, η, δ)`; with the
/// true model and `ξ(ε, η, δ)` it is `B_t(π, η, δ, ε)`.
pub fn bonus_expectation(
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
    xi: &[f64],
) -> Result<f64> {
    let weights = bonus_weights(model, initial_dist, horizon, policy)?;
    if xi.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: xi.len(),
        });
    }
    Ok(weights.iter().zip(xi).map(|(w, x)| w * x).sum())
}

/// `B_t(π, η, δ, ε)`: bonus expectation in the true dynamics with
/// `ξ(ε, η, δ)`. Diagnostic only; learners never call it.
pub fn true_model_bonus(
    mdp: &Mdp,
    policy: &Policy,
    counts: &VisitCounts,
    params: &BonusParams,
) -> Result<f64> {
    let xi: Vec<f64> = counts.visits.iter().map(|&n| xi_eps(n, params)).collect();
    bonus_expectation(
        mdp.transitions(),
        mdp.initial_dist(),
        mdp.horizon(),
        policy,
        &xi,
    )
}

/// `γ_t = √2(4κβ_t + α) + 2√(Σ_ℓ B̂²(π¹_ℓ) + B̂²(π²_ℓ)) + 1/t`, where
/// `logged[ℓ]` holds the two bonus values of round `ℓ`.
pub fn gamma(t: usize, kappa: f64, beta_t: f64, alpha: f64, logged: &[(f64, f64)]) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidArgument("γ_t needs t ≥ 1".into()));
    }
    let sq: f64 = logged.iter().map(|(a, b)| a * a + b * b).sum();
    Ok(2f64.sqrt() * (4.0 * kappa * beta_t + alpha) + 2.0 * sq.sqrt() + 1.0 / t as f64)
}

/// `log(1/δ_ℓ)` for the bonuses inside `γ_t`:
/// `δ_ℓ = δ′/(8ℓ³|A|^{|S|})`, `δ′ = δ/((1 + 4S)/ε)^d`,
/// `ε = 1/(t²κλ + 4B²t³)`. Evaluated in log space.
#[allow(clippy::too_many_arguments)]
pub fn gamma_log_inv_level(
    t: usize,
    ell: usize,
    delta: f64,
    kappa: f64,
    lambda: f64,
    param_bound: f64,
    feature_bound: f64,
    dim: usize,
    num_states: usize,
    num_actions: usize,
) -> f64 {
    let tf = t as f64;
    let epsilon_inv = tf * tf * kappa * lambda + 4.0 * feature_bound * feature_bound * tf * tf * tf;
    let log_inv_delta_prime =
        -delta.ln() + dim as f64 * ((1.0 + 4.0 * param_bound) * epsilon_inv).ln();
    log_inv_delta_prime
        + (8.0 * (ell as f64).powi(3)).ln()
        + num_states as f64 * (num_actions as f64).ln()
}

/// Membership test of the unknown-model candidate set; `bonus[i]` is
/// `B̂_t(πᵢ, 2SB, δ/(2|A|^{|S|}))`.
pub fn candidate_set_unknown(
    features: &[DVector<f64>],
    w: &DVector<f64>,
    vtilde: &DataMatrix,
    gamma_t: f64,
    bonus: &[f64],
) -> Vec<usize> {
    let norms = pairwise_inv_norms(features, vtilde);
    candidate_set_with_norms(features, w, &norms, gamma_t, |i| bonus[i])
}

/// `argmax γ_t‖φ(π¹) − φ(π²)‖_{Ṽ⁻¹} + 2B̂(π¹) + 2B̂(π²)` over `S_t²`.
pub fn select_pair_unknown(
    set: &[usize],
    features: &[DVector<f64>],
    vtilde: &DataMatrix,
    gamma_t: f64,
    bonus: &[f64],
) -> Result<(usize, usize)> {
    let norms = pairwise_inv_norms(features, vtilde);
    select_pair_with_norms(set, &norms, gamma_t, bonus)
}

fn select_pair_with_norms(
    set: &[usize],
    norms: &[Vec<f64>],
    gamma_t: f64,
    bonus: &[f64],
) -> Result<(usize, usize)> {
    let (i, j, _) = argmax_pair(set, |i, j| {
        gamma_t * norms[i][j] + 2.0 * (bonus[i] + bonus[j])
    })?;
    Ok((i, j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnknownModelConfig {
    pub lambda: f64,
    pub delta: f64,
    pub horizon_rounds: usize,
    pub param_bound: f64,
    pub feature_bound: f64,
    pub dim: usize,
    pub kappa: f64,
    pub tie_break: TieBreak,
}

impl UnknownModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config("λ must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("δ = {} outside (0, 1)", self.delta)));
        }
        if self.dim == 0 || !(self.param_bound > 0.0) || !(self.feature_bound >= 0.0) {
            return Err(Error::Config("need d ≥ 1, S > 0, B ≥ 0".into()));
        }
        Ok(())
    }

    /// Bonus scale `2SB` used by the candidate set and pair selection.
    pub fn eta(&self) -> f64 {
        2.0 * self.param_bound * self.feature_bound
    }
}

/// Confidence multiplier used in the candidate set and pair selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusRule {
    #[default]
    Gamma,
    /// The known-model width `2κβ_t + α`.
    KnownModelWidth,
}

/// Ablation switches. The defaults give the full algorithm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnknownModelOptions {
    /// Use this model instead of the empirical one.
    pub frozen_model: Option<TransitionModel>,
    /// Force every bonus term to zero.
    pub zero_bonuses: bool,
    pub radius: RadiusRule,
}

#[derive(Debug, Clone)]
pub struct UnknownModelState {
    pub t: usize,
    pub v: DataMatrix,
    pub vtilde: DataMatrix,
    pub counts: VisitCounts,
    pub dataset: DuelDataset,
    pub estimate: Estimate,
    /// Pairs played so far; their bonuses are re-evaluated each round for `γ_t`.
    pub played: Vec<(usize, usize)>,
    /// Rank-one terms added to `Ṽ`, in order.
    pub vtilde_terms: Vec<DVector<f64>>,
    /// Bonus values that entered the most recent `γ_t`.
    pub last_gamma_log: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct UnknownModelLearner {
    config: UnknownModelConfig,
    options: UnknownModelOptions,
    policies: PolicyClass,
    alpha: f64,
    state: UnknownModelState,
}

impl UnknownModelLearner {
    pub fn new(config: UnknownModelConfig, policies: PolicyClass, mdp: &Mdp) -> Result<Self> {
        Self::with_options(config, policies, mdp, UnknownModelOptions::default())
    }

    pub fn with_options(
        config: UnknownModelConfig,
        policies: PolicyClass,
        mdp: &Mdp,
        options: UnknownModelOptions,
    ) -> Result<Self> {
        config.validate()?;
        let base = config.kappa * config.lambda;
        let alpha = if config.horizon_rounds == 0 {
            0.0
        } else {
            alpha(
                config.dim,
                config.horizon_rounds,
                config.delta,
                config.feature_bound,
                config.param_bound,
            )?
        };
        let state = UnknownModelState {
            t: 0,
            v: DataMatrix::new(config.dim, base)?,
            vtilde: DataMatrix::new(config.dim, base)?,
            counts: VisitCounts::new(mdp.num_states(), mdp.num_actions()),
            dataset: DuelDataset::with_feature_bound(config.feature_bound),
            estimate: Estimate::initial(config.dim, config.lambda, config.param_bound),
            played: Vec::new(),
            vtilde_terms: Vec::new(),
            last_gamma_log: Vec::new(),
        };
        Ok(Self {
            config,
            options,
            policies,
            alpha,
            state,
        })
    }

    pub fn config(&self) -> &UnknownModelConfig {
        &self.config
    }

    pub fn state(&self) -> &UnknownModelState {
        &self.state
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Model used for the next decision.
    pub fn current_model(&self) -> TransitionModel {
        self.options
            .frozen_model
            .clone()
            .unwrap_or_else(|| empirical_model(&self.state.counts))
    }

    /// `B̂_t(π, η, δ)` for every policy under the current counts and model.
    pub fn bonus_hat(&self, mdp: &Mdp, eta: f64, delta: f64) -> Result<Vec<f64>> {
        let model = self.current_model();
        let xi = xi_hat_table(&self.state.counts, eta, -delta.ln(), mdp.horizon());
        self.policies
            .iter()
            .map(|p| bonus_expectation(&model, mdp.initial_dist(), mdp.horizon(), p, &xi))
            .collect()
    }

    pub fn check_matrix_log(&self, tol: f64) -> Result<()> {
        let base = self.config.kappa * self.config.lambda;
        let dim = self.config.dim;
        let v = DataMatrix::from_terms(
            dim,
            base,
            self.state.dataset.records().iter().map(|(z, _)| z),
        )?;
        let vt = DataMatrix::from_terms(dim, base, self.state.vtilde_terms.iter())?;
        let dv = (v.matrix() - self.state.v.matrix()).amax();
        let dvt = (vt.matrix() - self.state.vtilde.matrix()).amax();
        if dv > tol || dvt > tol {
            return Err(Error::Invariant(format!(
                "data matrices drifted from their logs ({dv:e}, {dvt:e})"
            )));
        }
        Ok(())
    }

    fn beta_params(&self) -> BetaParams {
        BetaParams {
            delta: self.config.delta,
            lambda: self.config.lambda,
            param_bound: self.config.param_bound,
            feature_bound: self.config.feature_bound,
            dim: self.config.dim,
            kappa: self.config.kappa,
        }
    }

    fn step_inner<F: DuelFeedback, R: Rng + ?Sized>(
        &mut self,
        round: usize,
        mdp: &Mdp,
        map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let cfg = self.config.clone();
        let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        let rho = mdp.initial_dist();
        let model = self.current_model();

        let features = self
            .policies
            .iter()
            .map(|p| policy_features_in_model(map, &model, rho, horizon, p))
            .collect::<Result<Vec<_>>>()?;
        let weights = self
            .policies
            .iter()
            .map(|p| bonus_weights(&model, rho, horizon, p))
            .collect::<Result<Vec<_>>>()?;
        let eta = cfg.eta();
        let zero = self.options.zero_bonuses;
        let counts = &self.state.counts;
        let bonus_at = |log_inv_delta: f64| -> (Vec<f64>, f64) {
            if zero {
                return (vec![0.0; weights.len()], 0.0);
            }
            let xi = xi_hat_table(counts, eta, log_inv_delta, horizon);
            let max_xi = xi.iter().copied().fold(0.0, f64::max);
            let b = weights
                .iter()
                .map(|w| w.iter().zip(&xi).map(|(a, x)| a * x).sum())
                .collect();
            (b, max_xi)
        };

        let previous = (self.state.t > 0).then_some(&self.state.estimate);
        let estimate = fit_estimate(
            &self.state.dataset,
            &self.state.v,
            cfg.lambda,
            cfg.param_bound,
            previous,
        )?;
        let beta_t = beta(round as f64, &self.beta_params())?;

        let mut gamma_log = Vec::with_capacity(self.state.played.len());
        for (idx, &(i, j)) in self.state.played.iter().enumerate() {
            let level = gamma_log_inv_level(
                round,
                idx + 1,
                cfg.delta,
                cfg.kappa,
                cfg.lambda,
                cfg.param_bound,
                cfg.feature_bound,
                cfg.dim,
                ns,
                na,
            );
            if zero {
                gamma_log.push((0.0, 0.0));
            } else {
                let xi = xi_hat_table(counts, eta, level, horizon);
                let b = |w: &Vec<f64>| w.iter().zip(&xi).map(|(a, x)| a * x).sum::<f64>();
                gamma_log.push((b(&weights[i]), b(&weights[j])));
            }
        }
        let gamma_t = gamma(round, cfg.kappa, beta_t, self.alpha, &gamma_log)?;
        let radius = match self.options.radius {
            RadiusRule::Gamma => gamma_t,
            RadiusRule::KnownModelWidth => 2.0 * cfg.kappa * beta_t + self.alpha,
        };

        let log_inv_delta = -cfg.delta.ln();
        let set_level = log_inv_delta + 2f64.ln() + ns as f64 * (na as f64).ln();
        let (set_bonus, _) = bonus_at(set_level);
        let (pair_bonus, max_xi) = bonus_at(log_inv_delta);

        let norms = pairwise_inv_norms(&features, &self.state.vtilde);
        let set = candidate_set_with_norms(&features, &estimate.w_proj, &norms, radius, |i| {
            set_bonus[i]
        });
        let (i, j) = select_pair_with_norms(&set, &norms, radius, &pair_bonus)?;

        let tau1 = sample_trajectory(mdp, self.policies.get(i), rng)?;
        let tau2 = sample_trajectory(mdp, self.policies.get(j), rng)?;
        let outcome = feedback.compare(rng, &tau1, &tau2)?;

        let st = &mut self.state;
        let z = trajectory_features(map, &tau1)? - trajectory_features(map, &tau2)?;
        st.v.update(&z)?;
        st.dataset.push(z, outcome)?;
        let ztilde = &features[i] - &features[j];
        st.vtilde.update(&ztilde)?;
        st.vtilde_terms.push(ztilde);
        st.counts.update(&tau1);
        st.counts.update(&tau2);
        st.played.push((i, j));
        st.last_gamma_log = gamma_log;
        st.estimate = estimate.clone();
        st.t = round;
        let min_count = st.counts.visits.iter().copied().min();

        Ok(StepOutcome {
            t: round,
            pair: (i, j),
            trajectories: (tau1, tau2),
            outcome,
            diagnostics: Diagnostics {
                radius,
                candidate_set: set,
                grad_norm: estimate.grad_norm,
                projection_objective: estimate.projection_objective,
                max_xi: Some(max_xi),
                min_count,
            },
            estimate,
        })
    }
}

impl DuelingLearner for UnknownModelLearner {
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
