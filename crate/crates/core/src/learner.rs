//! Types shared by the dueling learners.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::{DataMatrix, Estimate};
use crate::features::FeatureMap;
use crate::mdp::{Mdp, Trajectory};
use crate::oracle::DuelFeedback;

/// Per-round diagnostics emitted alongside a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `β_t(δ)` for the known-model learner, `γ_t` for the unknown-model one.
    pub radius: f64,
    /// Members of the candidate set, ascending.
    pub candidate_set: Vec<usize>,
    pub grad_norm: f64,
    pub projection_objective: f64,
    /// Largest per-(s, a) bonus at the pair-selection confidence level.
    pub max_xi: Option<f64>,
    /// Fewest samples over all state-action pairs.
    pub min_count: Option<u64>,
}

/// What a learner did in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// 1-based round index.
    pub t: usize,
    pub pair: (usize, usize),
    pub trajectories: (Trajectory, Trajectory),
    /// `true` when the first trajectory won.
    pub outcome: bool,
    /// Estimate used to make this round's decision.
    pub estimate: Estimate,
    pub diagnostics: Diagnostics,
}

/// A learner that plays one duel per round.
pub trait DuelingLearner {
    fn step<F: DuelFeedback, R: Rng + ?Sized>(
        &mut self,
        mdp: &Mdp,
        map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome>;

    /// Rounds completed so far.
    fn rounds(&self) -> usize;
}

/// Exhaustive argmax of `objective(i, j)` over ordered pairs drawn from
/// `set` (ascending). Ties keep the lexicographically smallest pair.
pub fn argmax_pair(
    set: &[usize],
    mut objective: impl FnMut(usize, usize) -> f64,
) -> Result<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &i in set {
        for &j in set {
            let value = objective(i, j);
            if best.is_none_or(|(_, _, b)| value > b) {
                best = Some((i, j, value));
            }
        }
    }
    best.ok_or_else(|| Error::Invariant("candidate set is empty".into()))
}

/// Table of `‖φ(πᵢ) − φ(πⱼ)‖_{M⁻¹}` for all ordered pairs.
pub(crate) fn pairwise_inv_norms(features: &[DVector<f64>], m: &DataMatrix) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = m.inv_norm(&(&features[i] - &features[j]));
            out[i][j] = d;
            out[j][i] = d;
        }
    }
    out
}
