//! Tabular episodic MDPs, deterministic policies, trajectory sampling and
//! exact occupancy measures.
//!
//! States and actions are dense indices. A transition table is stored
//! row-major as `[(s * |A| + a) * |S| + s']`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on `(|S|·|A|)^H` for exhaustive trajectory enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A table `(s, a) -> distribution over next states`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionModel {
    /// Builds a model from a flat row-major table, checking every row.
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let model = Self::new_unchecked(num_states, num_actions, probs)?;
        model.validate()?;
        Ok(model)
    }

    /// Like [`TransitionModel::new`] but only checks the table shape.
    pub(crate) fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp(
                "need at least one state and one action".into(),
            ));
        }
        let expected = num_states * num_actions * num_states;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: probs.len(),
            });
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }

    /// Builds a model from nested rows `rows[s][a][s']`.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} action rows, expected {num_actions}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::InvalidMdp(format!(
                        "row ({s},{a}) has length {}, expected {num_states}",
                        row.len()
                    )));
                }
                probs.extend_from_slice(row);
            }
        }
        Self::new(num_states, num_actions, probs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Reports the first row that is not a probability vector.
    pub fn validate(&self) -> Result<()> {
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                check_distribution(self.row(s, a), &format!("transition row ({s},{a})"))?;
            }
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if let Some((i, p)) = row
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::InvalidMdp(format!("{what}: entry {i} is {p}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidMdp(format!(
            "{what}: row sum {sum} (residual {:e})",
            sum - 1.0
        )));
    }
    Ok(())
}

/// A tabular episodic MDP `(ρ, P, H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    initial_dist: Vec<f64>,
    transitions: TransitionModel,
    horizon: usize,
}

impl Mdp {
    pub fn new(
        initial_dist: Vec<f64>,
        transitions: TransitionModel,
        horizon: usize,
    ) -> Result<Self> {
        let mdp = Self {
            initial_dist,
            transitions,
            horizon,
        };
        validate_mdp(&mdp)?;
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }
}

/// Checks shape, horizon and stochasticity of `ρ` and every transition row.
pub fn validate_mdp(mdp: &Mdp) -> Result<()> {
    if mdp.horizon == 0 {
        return Err(Error::InvalidMdp("horizon must be at least 1".into()));
    }
    if mdp.initial_dist.len() != mdp.num_states() {
        return Err(Error::InvalidMdp(format!(
            "initial distribution has length {}, expected {}",
            mdp.initial_dist.len(),
            mdp.num_states()
        )));
    }
    check_distribution(&mdp.initial_dist, "initial distribution")?;
    mdp.transitions.validate()
}

/// A length-`H` sequence of `(state, action)` pairs.
#[derive(
    Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(transparent)]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks length and index ranges against an MDP.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.steps.len() != mdp.horizon() {
            return Err(Error::InvalidArgument(format!(
                "trajectory length {} differs from horizon {}",
                self.steps.len(),
                mdp.horizon()
            )));
        }
        for (h, &(s, a)) in self.steps.iter().enumerate() {
            if s >= mdp.num_states() || a >= mdp.num_actions() {
                return Err(Error::InvalidArgument(format!(
                    "step {h}: ({s},{a}) out of range"
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (s, a)) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}:{a}")?;
        }
        Ok(())
    }
}

/// Time-inhomogeneous deterministic Markov rule, `actions[h][s]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkovPolicy {
    actions: Vec<Vec<usize>>,
}

impl MarkovPolicy {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        Self { actions }
    }

    /// The same action table at every step.
    pub fn stationary(per_state: Vec<usize>, horizon: usize) -> Self {
        Self {
            actions: vec![per_state; horizon],
        }
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h][s]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.actions
    }
}

/// Key of a history-dependent rule: the observed `(s, a)` prefix and the
/// current state.
pub type HistoryKey = (Vec<(usize, usize)>, usize);

/// Explicit finite table from observed prefixes to actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct HistoryPolicy {
    rules: BTreeMap<HistoryKey, usize>,
}

impl HistoryPolicy {
    pub fn new(rules: BTreeMap<HistoryKey, usize>) -> Self {
        Self { rules }
    }

    pub fn insert(&mut self, prefix: Vec<(usize, usize)>, state: usize, action: usize) {
        self.rules.insert((prefix, state), action);
    }

    pub fn rules(&self) -> &BTreeMap<HistoryKey, usize> {
        &self.rules
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Policy {
    Markov(MarkovPolicy),
    History(HistoryPolicy),
}

impl From<MarkovPolicy> for Policy {
    fn from(p: MarkovPolicy) -> Self {
        Policy::Markov(p)
    }
}

impl From<HistoryPolicy> for Policy {
    fn from(p: HistoryPolicy) -> Self {
        Policy::History(p)
    }
}

impl Policy {
    pub fn is_markov(&self) -> bool {
        matches!(self, Policy::Markov(_))
    }

    pub fn as_markov(&self) -> Option<&MarkovPolicy> {
        match self {
            Policy::Markov(p) => Some(p),
            Policy::History(_) => None,
        }
    }

    /// Action taken after observing `prefix` and arriving in `state`.
    pub fn action(&self, prefix: &[(usize, usize)], state: usize) -> Result<usize> {
        match self {
            Policy::Markov(p) => Ok(p.action(prefix.len(), state)),
            Policy::History(p) => {
                p.rules
                    .get(&(prefix.to_vec(), state))
                    .copied()
                    .ok_or_else(|| {
                        Error::InvalidPolicy(format!(
                            "no rule for prefix {prefix:?} in state {state}"
                        ))
                    })
            }
        }
    }

    /// Markov rules must cover every `(h, s)`; history rules must cover every
    /// prefix reachable with positive probability.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        match self {
            Policy::Markov(p) => {
                if p.actions.len() != mdp.horizon() {
                    return Err(Error::InvalidPolicy(format!(
                        "markov rule has {} steps, expected {}",
                        p.actions.len(),
                        mdp.horizon()
                    )));
                }
                for (h, row) in p.actions.iter().enumerate() {
                    if row.len() != mdp.num_states() {
                        return Err(Error::InvalidPolicy(format!(
                            "step {h} covers {} states, expected {}",
                            row.len(),
                            mdp.num_states()
                        )));
                    }
                    if let Some(a) = row.iter().find(|&&a| a >= mdp.num_actions()) {
                        return Err(Error::InvalidPolicy(format!(
                            "step {h}: action {a} out of range"
                        )));
                    }
                }
                Ok(())
            }
            Policy::History(_) => {
                for (tau, _) in enumerate_in_model(
                    mdp.transitions(),
                    mdp.initial_dist(),
                    mdp.horizon(),
                    self,
                    DEFAULT_ENUMERATION_CAP,
                )? {
                    if let Some(&(_, a)) = tau.steps().iter().find(|(_, a)| *a >= mdp.num_actions())
                    {
                        return Err(Error::InvalidPolicy(format!("action {a} out of range")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Explicit finite, ordered policy class.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyClass {
    policies: Vec<Policy>,
}

impl PolicyClass {
    pub fn new(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::InvalidPolicy("policy class is empty".into()));
        }
        for i in 0..policies.len() {
            for j in 0..i {
                if policies[i] == policies[j] {
                    return Err(Error::InvalidPolicy(format!(
                        "policies {j} and {i} are identical"
                    )));
                }
            }
        }
        Ok(Self { policies })
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        for (i, p) in self.policies.iter().enumerate() {
            p.validate(mdp)
                .map_err(|e| Error::InvalidPolicy(format!("policy {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn get(&self, i: usize) -> &Policy {
        &self.policies[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Policy> {
        self.policies.iter()
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Rolls out `policy` for `H` steps: `s₁ ~ ρ`, then `s_{h+1} ~ P(·|s_h, a_h)`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &Mdp,
    policy: &Policy,
    rng: &mut R,
) -> Result<Trajectory> {
    sample_in_model(
        mdp.transitions(),
        mdp.initial_dist(),
        mdp.horizon(),
        policy,
        rng,
    )
}

/// Rollout under an arbitrary transition model.
pub fn sample_in_model<R: Rng + ?Sized>(
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(horizon);
    let mut s = sample_index(rng, initial_dist);
    for h in 0..horizon {
        let a = policy.action(&steps, s)?;
        steps.push((s, a));
        if h + 1 < horizon {
            s = sample_index(rng, model.row(s, a));
        }
    }
    Ok(Trajectory { steps })
}

/// Per-step state-action occupancy `d_h(s, a)`, flattened as `s * |A| + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    num_actions: usize,
    layers: Vec<Vec<f64>>,
}

impl Occupancy {
    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.layers[h][s * self.num_actions + a]
    }

    pub fn horizon(&self) -> usize {
        self.layers.len()
    }
}

/// Exact occupancy measures of a Markov policy in the true dynamics.
pub fn occupancy_measures(mdp: &Mdp, policy: &Policy) -> Result<Occupancy> {
    occupancy_in_model(mdp.transitions(), mdp.initial_dist(), mdp.horizon(), policy)
}

/// Forward recursion `d_{h+1}(s', a') = Σ d_h(s, a) P(s'|s, a) 1[a' = π(h+1, s')]`.
pub fn occupancy_in_model(
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
) -> Result<Occupancy> {
    let Policy::Markov(policy) = policy else {
        return Err(Error::EnumerationRequired(
            "occupancy measures need a markov policy",
        ));
    };
    let (ns, na) = (model.num_states, model.num_actions);
    let mut layers = Vec::with_capacity(horizon);
    let mut state_mass = initial_dist.to_vec();
    for h in 0..horizon {
        let mut layer = vec![0.0; ns * na];
        for (s, &m) in state_mass.iter().enumerate() {
            layer[s * na + policy.action(h, s)] += m;
        }
        if h + 1 < horizon {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                let a = policy.action(h, s);
                let m = layer[s * na + a];
                if m == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(model.row(s, a)) {
                    *n += m * p;
                }
            }
            state_mass = next;
        }
        layers.push(layer);
    }
    Ok(Occupancy {
        num_actions: na,
        layers,
    })
}

/// All positive-probability trajectories of `policy` with their probabilities.
pub fn enumerate_trajectories(
    mdp: &Mdp,
    policy: &Policy,
    cap: usize,
) -> Result<Vec<(Trajectory, f64)>> {
    enumerate_in_model(
        mdp.transitions(),
        mdp.initial_dist(),
        mdp.horizon(),
        policy,
        cap,
    )
}

pub fn enumerate_in_model(
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
    cap: usize,
) -> Result<Vec<(Trajectory, f64)>> {
    let size = ((model.num_states * model.num_actions) as f64).powi(horizon as i32);
    if size > cap as f64 {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(horizon);
    for (s, &p) in initial_dist.iter().enumerate() {
        if p > 0.0 {
            expand(model, horizon, policy, &mut prefix, s, p, &mut out)?;
        }
    }
    Ok(out)
}

fn expand(
    model: &TransitionModel,
    horizon: usize,
    policy: &Policy,
    prefix: &mut Vec<(usize, usize)>,
    state: usize,
    prob: f64,
    out: &mut Vec<(Trajectory, f64)>,
) -> Result<()> {
    let a = policy.action(prefix, state)?;
    prefix.push((state, a));
    if prefix.len() == horizon {
        out.push((
            Trajectory {
                steps: prefix.clone(),
            },
            prob,
        ));
    } else {
        for (next, &p) in model.row(state, a).iter().enumerate() {
            if p > 0.0 {
                expand(model, horizon, policy, prefix, next, prob * p, out)?;
            }
        }
    }
    prefix.pop();
    Ok(())
}
