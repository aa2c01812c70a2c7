//! Experiment orchestration: seeded runs, regret curves and artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::UniformPairLearner;
use super::config::{Algorithm, ExperimentConfig};
use super::generate::Instance;
use super::plot::write_svg;
use super::regret::{
    argmax_first, claim_checks, policy_scores, preference_regret_from_scores,
    score_regret_increment, sublinearity_metric, CheckResult, Verdict,
};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::known::{KnownModelConfig, KnownModelLearner, TieBreak};
use crate::learner::{DuelingLearner, StepOutcome};
use crate::mdp::{Mdp, Trajectory};
use crate::oracle::{kappa, LogisticOracle};
use crate::unknown::{UnknownModelConfig, UnknownModelLearner};

/// Tolerance for rebuilding data matrices from their logs.
const MATRIX_LOG_TOL: f64 = 1e-9;

/// Algorithm-level settings shared by all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub delta: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub pair: (usize, usize),
    pub trajectories: (Trajectory, Trajectory),
    pub outcome: bool,
    pub score_regret: f64,
    pub pref_regret: f64,
    /// `β_t` or `γ_t`.
    pub radius: f64,
    pub set_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub best: (usize, f64),
    pub rounds: Vec<RoundRecord>,
    pub cumulative_scr: Vec<f64>,
    pub cumulative_pref: Vec<f64>,
    pub checks: Vec<CheckResult>,
}

/// Learner selected by [`Algorithm`].
#[derive(Debug, Clone)]
pub enum AnyLearner {
    Known(KnownModelLearner),
    Unknown(UnknownModelLearner),
    Uniform(UniformPairLearner),
}

impl AnyLearner {
    pub fn build(instance: &Instance, params: &RunParams) -> Result<Self> {
        let s = instance.model.param_bound();
        let b = instance.feature_bound;
        let k = kappa(b, s)?;
        let dim = instance.map.dim();
        Ok(match params.algorithm {
            Algorithm::Known => {
                let cfg = KnownModelConfig {
                    lambda: params.lambda,
                    delta: params.delta,
                    horizon_rounds: params.rounds,
                    param_bound: s,
                    feature_bound: b,
                    dim,
                    kappa: k,
                    tie_break: TieBreak::LowestIndex,
                };
                AnyLearner::Known(KnownModelLearner::new(
                    cfg,
                    instance.policies.clone(),
                    &instance.mdp,
                    &instance.map,
                )?)
            }
            Algorithm::Unknown => {
                let cfg = UnknownModelConfig {
                    lambda: params.lambda,
                    delta: params.delta,
                    horizon_rounds: params.rounds,
                    param_bound: s,
                    feature_bound: b,
                    dim,
                    kappa: k,
                    tie_break: TieBreak::LowestIndex,
                };
                AnyLearner::Unknown(UnknownModelLearner::new(
                    cfg,
                    instance.policies.clone(),
                    &instance.mdp,
                )?)
            }
            Algorithm::Uniform => {
                AnyLearner::Uniform(UniformPairLearner::new(instance.policies.clone(), dim))
            }
        })
    }

    /// Data-matrix and count invariants of the learner state.
    pub fn check_state(&self) -> Result<()> {
        match self {
            AnyLearner::Known(l) => l.check_matrix_log(MATRIX_LOG_TOL),
            AnyLearner::Unknown(l) => {
                l.check_matrix_log(MATRIX_LOG_TOL)?;
                l.state().counts.check_consistency()
            }
            AnyLearner::Uniform(_) => Ok(()),
        }
    }
}

impl DuelingLearner for AnyLearner {
    fn step<F: crate::oracle::DuelFeedback, R: rand::Rng + ?Sized>(
        &mut self,
        mdp: &Mdp,
        map: &FeatureMap,
        feedback: &mut F,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        match self {
            AnyLearner::Known(l) => l.step(mdp, map, feedback, rng),
            AnyLearner::Unknown(l) => l.step(mdp, map, feedback, rng),
            AnyLearner::Uniform(l) => l.step(mdp, map, feedback, rng),
        }
    }

    fn rounds(&self) -> usize {
        match self {
            AnyLearner::Known(l) => l.rounds(),
            AnyLearner::Unknown(l) => l.rounds(),
            AnyLearner::Uniform(l) => l.rounds(),
        }
    }
}

/// RNG of a run; instance generation uses a different stream.
pub fn run_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `params.rounds` duels of the selected algorithm on `instance`.
pub fn run_on_instance(instance: &Instance, params: &RunParams, seed: u64) -> Result<RunRecord> {
    let scores = policy_scores(
        &instance.policies,
        &instance.map,
        &instance.mdp,
        &instance.model,
    )?;
    let best = argmax_first(&scores);
    let mut learner = AnyLearner::build(instance, params)?;
    let mut oracle = LogisticOracle::new(&instance.model, &instance.map);
    let mut rng = run_rng(seed);

    let mut rounds = Vec::with_capacity(params.rounds);
    let (mut scr, mut pref) = (0.0, 0.0);
    let mut cumulative_scr = Vec::with_capacity(params.rounds);
    let mut cumulative_pref = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let out = learner.step(&instance.mdp, &instance.map, &mut oracle, &mut rng)?;
        let (i, j) = out.pair;
        let r = score_regret_increment(best.1, scores[i], scores[j]);
        let p = preference_regret_from_scores(best.1, scores[i], scores[j]);
        scr += r;
        pref += p;
        cumulative_scr.push(scr);
        cumulative_pref.push(pref);
        rounds.push(RoundRecord {
            t: out.t,
            pair: out.pair,
            trajectories: out.trajectories,
            outcome: out.outcome,
            score_regret: r,
            pref_regret: p,
            radius: out.diagnostics.radius,
            set_size: out.diagnostics.candidate_set.len(),
        });
    }

    let mut checks = vec![
        CheckResult::new(
            "score_regret_nonnegative",
            rounds.iter().all(|r| r.score_regret >= -1e-12),
            "every r_t ≥ 0",
        ),
        CheckResult::new(
            "pref_regret_bounded",
            rounds.iter().all(|r| (-0.5..=0.5).contains(&r.pref_regret)),
            "every preference increment in [−0.5, 0.5]",
        ),
        CheckResult::new(
            "score_regret_nondecreasing",
            cumulative_scr.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "cumulative R^scr never decreases",
        ),
    ];
    let pairs: Vec<_> = rounds.iter().map(|r| r.pair).collect();
    checks.extend(claim_checks(
        &scores,
        &pairs,
        &cumulative_scr,
        &cumulative_pref,
        instance.model.param_bound(),
        instance.feature_bound,
    ));
    let state = learner.check_state();
    checks.push(CheckResult::new(
        "learner_state",
        state.is_ok(),
        state.err().map_or_else(
            || "matrices and counts match their logs".to_string(),
            |e| e.to_string(),
        ),
    ));

    Ok(RunRecord {
        seed,
        best,
        rounds,
        cumulative_scr,
        cumulative_pref,
        checks,
    })
}

/// Mean, standard error and median of one quantity across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub se: f64,
    pub median: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                se: 0.0,
                median: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Self { mean, se, median }
    }
}

/// Cumulative regret per seed and across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub seeds: Vec<u64>,
    /// `scr[k][t − 1]` is `R_t^scr` of seed `k`.
    pub scr: Vec<Vec<f64>>,
    pub pref: Vec<Vec<f64>>,
    pub scr_stats: Vec<Aggregate>,
    pub pref_stats: Vec<Aggregate>,
}

impl RegretCurve {
    pub fn from_runs(runs: &[RunRecord]) -> Self {
        let scr: Vec<Vec<f64>> = runs.iter().map(|r| r.cumulative_scr.clone()).collect();
        let pref: Vec<Vec<f64>> = runs.iter().map(|r| r.cumulative_pref.clone()).collect();
        let rounds = scr.iter().map(Vec::len).min().unwrap_or(0);
        let stats = |curves: &[Vec<f64>]| {
            (0..rounds)
                .map(|t| Aggregate::of(&curves.iter().map(|c| c[t]).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        Self {
            seeds: runs.iter().map(|r| r.seed).collect(),
            scr_stats: stats(&scr),
            pref_stats: stats(&pref),
            scr,
            pref,
        }
    }

    pub fn rounds(&self) -> usize {
        self.scr_stats.len()
    }

    pub fn mean_scr(&self) -> Vec<f64> {
        self.scr_stats.iter().map(|a| a.mean).collect()
    }

    pub fn mean_pref(&self) -> Vec<f64> {
        self.pref_stats.iter().map(|a| a.mean).collect()
    }

    pub fn final_scr(&self) -> Option<Aggregate> {
        self.scr_stats.last().copied()
    }

    pub fn final_pref(&self) -> Option<Aggregate> {
        self.pref_stats.last().copied()
    }
}

/// One line of `curve.csv`; regrets are cumulative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: usize,
    pub seed: u64,
    pub regret_scr: f64,
    pub regret_pref: f64,
    pub beta_or_gamma: f64,
    pub set_size: usize,
}

/// Rows in seed order, then by round.
pub fn curve_rows(runs: &[RunRecord]) -> Vec<CurveRow> {
    runs.iter()
        .flat_map(|run| {
            run.rounds.iter().enumerate().map(move |(k, r)| CurveRow {
                t: r.t,
                seed: run.seed,
                regret_scr: run.cumulative_scr[k],
                regret_pref: run.cumulative_pref[k],
                beta_or_gamma: r.radius,
                set_size: r.set_size,
            })
        })
        .collect()
}

/// Writes rows with a header. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_curve_csv<W: Write>(writer: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record([
        "t",
        "seed",
        "regret_scr",
        "regret_pref",
        "beta_or_gamma",
        "set_size",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<CurveRow>, _>>()?;
    Ok(rows)
}

/// Verdict of one check across all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub verdict: Verdict,
    pub failing_seeds: Vec<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub lambda: Vec<f64>,
    pub delta: f64,
    pub final_regret_scr: Option<Aggregate>,
    pub final_regret_pref: Option<Aggregate>,
    /// Slope of `log R^scr_t` against `log t` on the mean curve.
    pub sublinearity_metric: Option<f64>,
    pub checks: Vec<CheckSummary>,
    pub passed: bool,
}

fn summarize_checks(runs: &[RunRecord]) -> Vec<CheckSummary> {
    let mut names: Vec<String> = Vec::new();
    for c in runs.iter().flat_map(|r| &r.checks) {
        if !names.contains(&c.name) {
            names.push(c.name.clone());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<(u64, &CheckResult)> = runs
                .iter()
                .flat_map(|r| {
                    r.checks
                        .iter()
                        .filter(|c| c.name == name)
                        .map(move |c| (r.seed, c))
                })
                .collect();
            let failing_seeds: Vec<u64> = mine
                .iter()
                .filter(|(_, c)| c.failed())
                .map(|(s, _)| *s)
                .collect();
            let verdict = if !failing_seeds.is_empty() {
                Verdict::Fail
            } else if mine
                .iter()
                .all(|(_, c)| c.verdict == Verdict::NotApplicable)
            {
                Verdict::NotApplicable
            } else {
                Verdict::Pass
            };
            let detail = mine
                .iter()
                .find(|(_, c)| c.failed())
                .or(mine.first())
                .map(|(_, c)| c.detail.clone())
                .unwrap_or_default();
            CheckSummary {
                name,
                verdict,
                failing_seeds,
                detail,
            }
        })
        .collect()
}

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub curve: RegretCurve,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }
}

/// Runs every seed in parallel and aggregates in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outcomes: Vec<Result<(RunRecord, f64)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let instance = cfg.instance(seed)?;
            let lambda = cfg.lambda_for(instance.model.param_bound(), instance.feature_bound)?;
            let params = RunParams {
                algorithm: cfg.algorithm,
                lambda,
                delta: cfg.delta,
                rounds: cfg.rounds,
            };
            let run = run_on_instance(&instance, &params, seed).map_err(|e| Error::Seed {
                seed,
                source: Box::new(e),
            })?;
            Ok((run, lambda))
        })
        .collect();
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut lambdas = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (run, lambda) = o?;
        runs.push(run);
        lambdas.push(lambda);
    }
    let curve = RegretCurve::from_runs(&runs);
    let checks = summarize_checks(&runs);
    let passed = checks.iter().all(|c| c.verdict != Verdict::Fail);
    let summary = Summary {
        schema: cfg.schema,
        algorithm: cfg.algorithm,
        rounds: cfg.rounds,
        seeds: cfg.seeds.clone(),
        lambda: lambdas,
        delta: cfg.delta,
        final_regret_scr: curve.final_scr(),
        final_regret_pref: curve.final_pref(),
        sublinearity_metric: sublinearity_metric(&curve.mean_scr()).ok(),
        checks,
        passed,
    };
    Ok(ExperimentResult {
        runs,
        curve,
        summary,
    })
}

/// Writes `curve.csv`, `summary.json` and optionally `curve.svg` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path, plot: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_curve_csv(
        BufWriter::new(File::create(dir.join("curve.csv"))?),
        &curve_rows(&result.runs),
    )?;
    let mut summary = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut summary, &result.summary)?;
    summary.write_all(b"\n")?;
    summary.flush()?;
    if plot {
        write_svg(&dir.join("curve.svg"), &result.curve)?;
    }
    Ok(())
}
