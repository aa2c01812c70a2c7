//! Trajectory and policy embeddings.
//!
//! A decomposed map sums per-step vectors `φ(s, a)` along a trajectory; a
//! tabular map stores `φ(τ)` directly. A policy's embedding is the
//! expected trajectory embedding under a given transition model.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mdp::{
    enumerate_in_model, occupancy_in_model, Mdp, Policy, Trajectory, TransitionModel,
    DEFAULT_ENUMERATION_CAP,
};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    /// `table[s * |A| + a] = φ(s, a)`.
    Decomposed {
        dim: usize,
        num_actions: usize,
        table: Vec<DVector<f64>>,
    },
    Tabular {
        dim: usize,
        table: HashMap<Trajectory, DVector<f64>>,
    },
}

impl FeatureMap {
    /// Decomposed map from nested rows `rows[s][a]`.
    pub fn decomposed(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        let dim = rows
            .first()
            .and_then(|r| r.first())
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidFeatures("empty feature table".into()))?;
        let mut table = Vec::with_capacity(rows.len() * num_actions);
        for (s, per_action) in rows.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::InvalidFeatures(format!(
                    "state {s}: ragged action rows"
                )));
            }
            for (a, v) in per_action.iter().enumerate() {
                check_vector(v, dim, &format!("φ({s},{a})"))?;
                table.push(DVector::from_column_slice(v));
            }
        }
        Ok(FeatureMap::Decomposed {
            dim,
            num_actions,
            table,
        })
    }

    pub fn tabular(dim: usize, entries: Vec<(Trajectory, Vec<f64>)>) -> Result<Self> {
        let mut table = HashMap::with_capacity(entries.len());
        for (tau, v) in entries {
            check_vector(&v, dim, &format!("φ({tau})"))?;
            table.insert(tau, DVector::from_vec(v));
        }
        Ok(FeatureMap::Tabular { dim, table })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Decomposed { dim, .. } | FeatureMap::Tabular { dim, .. } => *dim,
        }
    }

    pub fn is_decomposed(&self) -> bool {
        matches!(self, FeatureMap::Decomposed { .. })
    }

    /// `φ(s, a)` of a decomposed map.
    pub fn step_feature(&self, s: usize, a: usize) -> Option<&DVector<f64>> {
        match self {
            FeatureMap::Decomposed {
                num_actions, table, ..
            } => table.get(s * num_actions + a),
            FeatureMap::Tabular { .. } => None,
        }
    }

    /// Checks the map against an instance. A tabular map must cover every
    /// trajectory any policy in `policies` can produce.
    pub fn validate(&self, mdp: &Mdp, policies: &[Policy]) -> Result<()> {
        match self {
            FeatureMap::Decomposed {
                num_actions, table, ..
            } => {
                if *num_actions != mdp.num_actions()
                    || table.len() != mdp.num_states() * mdp.num_actions()
                {
                    return Err(Error::InvalidFeatures(format!(
                        "decomposed table has {} entries, expected {}",
                        table.len(),
                        mdp.num_states() * mdp.num_actions()
                    )));
                }
                Ok(())
            }
            FeatureMap::Tabular { table, .. } => {
                for (i, p) in policies.iter().enumerate() {
                    for (tau, _) in enumerate_in_model(
                        mdp.transitions(),
                        mdp.initial_dist(),
                        mdp.horizon(),
                        p,
                        DEFAULT_ENUMERATION_CAP,
                    )? {
                        if !table.contains_key(&tau) {
                            return Err(Error::Coverage(format!(
                                "{tau} (reachable by policy {i})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_vector(v: &[f64], dim: usize, what: &str) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidFeatures(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(())
}

/// Known upper bound `B ≥ ‖φ(τ)‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct FeatureBound(pub f64);

impl FeatureBound {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `φ(τ)`: sum of per-step vectors, or table lookup.
pub fn trajectory_features(map: &FeatureMap, tau: &Trajectory) -> Result<DVector<f64>> {
    match map {
        FeatureMap::Decomposed {
            dim,
            num_actions,
            table,
        } => {
            let mut out = DVector::zeros(*dim);
            for &(s, a) in tau.steps() {
                let v = table.get(s * num_actions + a).ok_or_else(|| {
                    Error::InvalidArgument(format!("({s},{a}) outside feature table"))
                })?;
                out += v;
            }
            Ok(out)
        }
        FeatureMap::Tabular { table, .. } => table
            .get(tau)
            .cloned()
            .ok_or_else(|| Error::Coverage(tau.to_string())),
    }
}

/// `φ(π) = E_{τ~π}[φ(τ)]` under the true dynamics.
pub fn policy_features(map: &FeatureMap, mdp: &Mdp, policy: &Policy) -> Result<DVector<f64>> {
    policy_features_in_model(
        map,
        mdp.transitions(),
        mdp.initial_dist(),
        mdp.horizon(),
        policy,
    )
}

/// `φ^P(π)` for an arbitrary transition model `P`. Decomposed maps with
/// Markov policies go through occupancy measures; everything else through
/// trajectory enumeration.
pub fn policy_features_in_model(
    map: &FeatureMap,
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
) -> Result<DVector<f64>> {
    match (map, policy) {
        (
            FeatureMap::Decomposed {
                dim,
                num_actions,
                table,
            },
            Policy::Markov(_),
        ) => {
            let occ = occupancy_in_model(model, initial_dist, horizon, policy)?;
            let mut out = DVector::zeros(*dim);
            for layer in occ.layers() {
                for (idx, &mass) in layer.iter().enumerate() {
                    if mass != 0.0 {
                        debug_assert!(idx / num_actions < model.num_states());
                        out.axpy(mass, &table[idx], 1.0);
                    }
                }
            }
            Ok(out)
        }
        _ => policy_features_by_enumeration(map, model, initial_dist, horizon, policy),
    }
}

/// Enumeration path of [`policy_features_in_model`], valid for any map.
pub fn policy_features_by_enumeration(
    map: &FeatureMap,
    model: &TransitionModel,
    initial_dist: &[f64],
    horizon: usize,
    policy: &Policy,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(map.dim());
    for (tau, p) in enumerate_in_model(
        model,
        initial_dist,
        horizon,
        policy,
        DEFAULT_ENUMERATION_CAP,
    )? {
        out.axpy(p, &trajectory_features(map, &tau)?, 1.0);
    }
    Ok(out)
}

/// Tabular: exact max norm over the table. Decomposed: `H · max ‖φ(s, a)‖`.
pub fn feature_bound(map: &FeatureMap, mdp: &Mdp) -> FeatureBound {
    match map {
        FeatureMap::Decomposed { table, .. } => {
            let max = table.iter().map(|v| v.norm()).fold(0.0, f64::max);
            FeatureBound(mdp.horizon() as f64 * max)
        }
        FeatureMap::Tabular { table, .. } => {
            FeatureBound(table.values().map(|v| v.norm()).fold(0.0, f64::max))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MarkovPolicy;

    fn uniform_mdp(ns: usize, na: usize, h: usize) -> Mdp {
        let row = vec![1.0 / ns as f64; ns];
        let rows = vec![vec![row; na]; ns];
        Mdp::new(
            vec![1.0 / ns as f64; ns],
            TransitionModel::from_rows(&rows).unwrap(),
            h,
        )
        .unwrap()
    }

    #[test]
    fn constant_step_feature_sums_over_horizon() {
        let rows = vec![vec![vec![1.0, 0.0, 0.0]; 2]; 2];
        let map = FeatureMap::decomposed(&rows).unwrap();
        let tau = Trajectory::new(vec![(0, 1), (1, 0)]);
        assert_eq!(
            trajectory_features(&map, &tau).unwrap().as_slice(),
            &[2.0, 0.0, 0.0]
        );
        let one = Trajectory::new(vec![(1, 1)]);
        assert_eq!(
            trajectory_features(&map, &one).unwrap().as_slice(),
            &[1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn tabular_lookup_miss_is_coverage_error() {
        let map = FeatureMap::tabular(1, vec![(Trajectory::new(vec![(0, 0)]), vec![1.0])]).unwrap();
        let err = trajectory_features(&map, &Trajectory::new(vec![(0, 1)])).unwrap_err();
        assert!(matches!(err, Error::Coverage(_)));
    }

    #[test]
    fn horizon_one_policy_features() {
        let rows = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![2.0, 0.0], vec![0.0, 3.0]],
        ];
        let map = FeatureMap::decomposed(&rows).unwrap();
        let m = TransitionModel::from_rows(&[vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 2]])
            .unwrap();
        let mdp = Mdp::new(vec![0.25, 0.75], m, 1).unwrap();
        let pi = Policy::from(MarkovPolicy::new(vec![vec![1, 0]]));
        // 0.25·φ(0,1) + 0.75·φ(1,0)
        let phi = policy_features(&map, &mdp, &pi).unwrap();
        assert!((phi[0] - 1.5).abs() < 1e-15);
        assert!((phi[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bounds() {
        let rows = vec![vec![vec![1.0, 0.0], vec![0.6, 0.8]]];
        let map = FeatureMap::decomposed(&rows).unwrap();
        assert_eq!(feature_bound(&map, &uniform_mdp(1, 2, 4)).value(), 4.0);
        let tab = FeatureMap::tabular(
            2,
            vec![
                (Trajectory::new(vec![(0, 0)]), vec![1.0, 0.0]),
                (Trajectory::new(vec![(0, 1)]), vec![0.0, 2.0]),
                (Trajectory::new(vec![(1, 0)]), vec![0.3, 0.4]),
            ],
        )
        .unwrap();
        assert_eq!(feature_bound(&tab, &uniform_mdp(2, 2, 1)).value(), 2.0);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(FeatureMap::decomposed(&[vec![vec![1.0], vec![1.0, 2.0]]]).is_err());
        assert!(FeatureMap::decomposed(&[vec![vec![f64::NAN]]]).is_err());
        assert!(FeatureMap::tabular(2, vec![(Trajectory::new(vec![(0, 0)]), vec![1.0])]).is_err());
    }

    #[test]
    fn tabular_validation_checks_reachable_coverage() {
        let mdp = uniform_mdp(2, 1, 1);
        let pi = Policy::from(MarkovPolicy::new(vec![vec![0, 0]]));
        let partial =
            FeatureMap::tabular(1, vec![(Trajectory::new(vec![(0, 0)]), vec![1.0])]).unwrap();
        assert!(partial.validate(&mdp, std::slice::from_ref(&pi)).is_err());
        let full = FeatureMap::tabular(
            1,
            vec![
                (Trajectory::new(vec![(0, 0)]), vec![1.0]),
                (Trajectory::new(vec![(1, 0)]), vec![2.0]),
            ],
        )
        .unwrap();
        assert!(full.validate(&mdp, &[pi]).is_ok());
    }
}
