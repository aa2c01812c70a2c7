//! Score and preference regret, plus the checks relating the two.
//!
//! Regret is measured against the explicit policy class `Π`. When `Π` is a
//! restricted set this is weaker than regret against every
//! history-dependent policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{Mdp, Policy, PolicyClass};
use crate::oracle::{policy_score, sigmoid, PreferenceModel};

/// Index and score of `argmax_{π ∈ Π} s(π)`; the lowest index wins ties.
pub fn best_policy(
    policies: &PolicyClass,
    map: &FeatureMap,
    mdp: &Mdp,
    model: &PreferenceModel,
) -> Result<(usize, f64)> {
    let scores = policy_scores(policies, map, mdp, model)?;
    Ok(argmax_first(&scores))
}

/// `s(π)` for every member of `Π`.
pub fn policy_scores(
    policies: &PolicyClass,
    map: &FeatureMap,
    mdp: &Mdp,
    model: &PreferenceModel,
) -> Result<Vec<f64>> {
    policies
        .iter()
        .map(|p| policy_score(model, map, mdp, p))
        .collect()
}

pub(crate) fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `(2s* − s₁ − s₂)/2`.
pub fn score_regret_increment(best: f64, first: f64, second: f64) -> f64 {
    (2.0 * best - first - second) / 2.0
}

/// `(σ(s* − s₁) + σ(s* − s₂) − 1)/2`.
pub fn preference_regret_from_scores(best: f64, first: f64, second: f64) -> f64 {
    (sigmoid(best - first) + sigmoid(best - second) - 1.0) / 2.0
}

/// `(P(π* ≻ π¹) + P(π* ≻ π²) − 1)/2` with `P(π ≻ π′) = σ(s(π) − s(π′))`.
pub fn preference_regret_increment(
    model: &PreferenceModel,
    map: &FeatureMap,
    mdp: &Mdp,
    best: &Policy,
    first: &Policy,
    second: &Policy,
) -> Result<f64> {
    let s = |p: &Policy| policy_score(model, map, mdp, p);
    Ok(preference_regret_from_scores(
        s(best)?,
        s(first)?,
        s(second)?,
    ))
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Self {
            name: name.to_string(),
            verdict,
            detail: detail.into(),
        }
    }

    pub fn not_applicable(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            verdict: Verdict::NotApplicable,
            detail: detail.into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Maximizers of the score and of the cumulative preference objective
/// `Σ_t (σ(s(π) − s₁ₜ) + σ(s(π) − s₂ₜ) − 1)/2` over the given pairs.
/// With no pairs, every ordered pair of `Π` is used instead.
pub fn claim_one(scores: &[f64], pairs: &[(usize, usize)]) -> (usize, usize) {
    let all: Vec<(usize, usize)>;
    let pairs = if pairs.is_empty() {
        all = (0..scores.len())
            .flat_map(|i| (0..scores.len()).map(move |j| (i, j)))
            .collect();
        &all
    } else {
        pairs
    };
    let objective: Vec<f64> = scores
        .iter()
        .map(|&s| {
            pairs
                .iter()
                .map(|&(i, j)| preference_regret_from_scores(s, scores[i], scores[j]))
                .sum()
        })
        .collect();
    (argmax_first(scores).0, argmax_first(&objective).0)
}

/// First prefix where `R^scr/(2(e + 1)) ≤ R^pref ≤ R^scr/2` fails, if any.
/// `tol` absorbs rounding in the cumulative sums.
pub fn sandwich_violation(scr: &[f64], pref: &[f64], tol: f64) -> Option<usize> {
    let lower = 1.0 / (2.0 * (std::f64::consts::E + 1.0));
    scr.iter()
        .zip(pref)
        .position(|(&r, &p)| p < r * lower - tol || p > r / 2.0 + tol)
}

/// Claim 1 and Claim 2 verdicts for one run; Claim 2 only applies when
/// `S·B < 1`.
pub fn claim_checks(
    scores: &[f64],
    pairs: &[(usize, usize)],
    scr: &[f64],
    pref: &[f64],
    param_bound: f64,
    feature_bound: f64,
) -> Vec<CheckResult> {
    let (by_score, by_pref) = claim_one(scores, pairs);
    let mut out = vec![CheckResult::new(
        "claim1_argmax",
        by_score == by_pref,
        format!("score argmax {by_score}, preference argmax {by_pref}"),
    )];
    let sb = param_bound * feature_bound;
    if sb < 1.0 {
        let v = sandwich_violation(scr, pref, 1e-12);
        out.push(CheckResult::new(
            "claim2_sandwich",
            v.is_none(),
            match v {
                Some(t) => format!("violated at t = {}", t + 1),
                None => format!("holds on all {} prefixes", scr.len()),
            },
        ));
    } else {
        out.push(CheckResult::not_applicable(
            "claim2_sandwich",
            format!("S·B = {sb} ≥ 1"),
        ));
    }
    out
}

/// Least-squares slope of `log R_t` against `log t` over `t ∈ [T/4, T]`
/// (1-based `t`, `curve[t − 1] = R_t`). Nonpositive values are skipped.
pub fn sublinearity_metric(curve: &[f64]) -> Result<f64> {
    let big_t = curve.len();
    let start = big_t.div_ceil(4).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (start..=big_t)
        .filter(|&t| curve[t - 1] > 0.0)
        .map(|t| ((t as f64).ln(), curve[t - 1].ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "slope needs two positive points in [T/4, T]".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
