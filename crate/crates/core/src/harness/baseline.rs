//! Comparator that duels two policies drawn uniformly at random.

use rand::Rng;

use crate::error::Result;
use crate::estimation::Estimate;
use crate::features::FeatureMap;
use crate::learner::{Diagnostics, DuelingLearner, StepOutcome};
use crate::mdp::{sample_trajectory, Mdp, PolicyClass};
use crate::oracle::DuelFeedback;

#[derive(Debug, Clone)]
pub struct UniformPairLearner {
    policies: PolicyClass,
    dim: usize,
    t: usize,
}

impl UniformPairLearner {
    pub fn new(policies: PolicyClass, dim: usize) -> Self {
        Self {
            policies,
            dim,
            t: 0,
        }
    }
}

impl DuelingLearner for UniformPairLearner {
    fn step<F: DuelFeedback, R: Rng + ?Sized>(
        &mut self,
        mdp: &Mdp,
        _map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let n = self.policies.len();
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let tau1 = sample_trajectory(mdp, self.policies.get(i), rng)?;
        let tau2 = sample_trajectory(mdp, self.policies.get(j), rng)?;
        let outcome = feedback.compare(rng, &tau1, &tau2)?;
        self.t += 1;
        Ok(StepOutcome {
            t: self.t,
            pair: (i, j),
            trajectories: (tau1, tau2),
            outcome,
            estimate: Estimate::initial(self.dim, 0.0, 0.0),
            diagnostics: Diagnostics {
                radius: 0.0,
                candidate_set: (0..n).collect(),
                grad_norm: 0.0,
                projection_objective: 0.0,
                max_xi: None,
                min_count: None,
            },
        })
    }

    fn rounds(&self) -> usize {
        self.t
    }
}
