//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::{DMatrix, DVector};
use prefrl::estimation::{
    beta, g_jacobian, g_transform, log_likelihood, log_likelihood_gradient, mle_fit,
    project_estimate, DataMatrix, DuelDataset, MLE_TOL,
};
use prefrl::harness::{
    curve_rows, read_curve_csv, run_experiment, run_on_instance, write_outputs, Algorithm,
    ExperimentConfig, InstanceSpec, RandomInstanceSpec, RunParams,
};
use prefrl::learner::DuelingLearner;
use prefrl::mdp::sample_in_model;
use prefrl::oracle::LogisticOracle;
use prefrl::unknown::{
    bonus_expectation, empirical_model, true_model_bonus, xi_hat_table, BonusParams, RadiusRule,
    UnknownModelOptions, VisitCounts,
};
use prefrl::{kappa, sigmoid};
use rand::Rng;
use rayon::prelude::*;

fn random_vec<R: Rng>(r: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| r.random_range(-scale..=scale)).collect()
}

fn dataset_from(records: &[(Vec<f64>, bool)]) -> DuelDataset {
    let mut data = DuelDataset::new();
    for (z, o) in records {
        data.push(DVector::from_vec(z.clone()), *o).unwrap();
    }
    data
}

/// Independent Eq. (3) objective for the grid oracle.
fn grid_objective(
    w: &[f64],
    target: &[f64],
    records: &[(Vec<f64>, bool)],
    lambda: f64,
    v: &DMatrix<f64>,
) -> f64 {
    let g = naive_g(w, records, lambda);
    let diff: Vec<f64> = g.iter().zip(target).map(|(a, b)| a - b).collect();
    naive_inv_norm(v, &diff)
}

#[test]
fn criterion_01_estimation_oracles() {
    let start = Instant::now();
    // Bisection root of 1 − σ(w) − w = 0 (single record z = 1, o = 1, λ = 1).
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - 1.0 / (1.0 + (-mid).exp()) - mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let data = dataset_from(&[(vec![1.0], true)]);
    let w = mle_fit(&data, 1, 1.0, MLE_TOL, 100).unwrap().w[0];
    let root_err = (w - root).abs();

    // Projection against a 2001² grid on the S-disc.
    let gaps: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(1000 + k);
            let lambda = r.random_range(0.2..1.5);
            let records: Vec<(Vec<f64>, bool)> = (0..5)
                .map(|_| (random_vec(&mut r, 2, 2.0), r.random_bool(0.5)))
                .collect();
            let data = dataset_from(&records);
            let w_hat = mle_fit(&data, 2, lambda, MLE_TOL, 200).unwrap().w;
            let s = r.random_range(0.2..0.9) * w_hat.norm();
            let kl = kappa(1.0, s).unwrap() * lambda;
            let mut v = DataMatrix::new(2, kl).unwrap();
            for (z, _) in &records {
                v.update(&DVector::from_vec(z.clone())).unwrap();
            }
            let est = project_estimate(&w_hat, &data, &v, lambda, s).unwrap();
            let target = naive_g(&to_vec(&w_hat), &records, lambda);
            let mut vm = DMatrix::zeros(2, 2);
            vm.copy_from(v.matrix());
            let ours = grid_objective(&to_vec(&est.w), &target, &records, lambda, &vm);
            assert!(est.w.norm() <= s + 1e-9);
            let n = 2001;
            let mut best = f64::INFINITY;
            for i in 0..n {
                let x = -s + 2.0 * s * i as f64 / (n - 1) as f64;
                for j in 0..n {
                    let y = -s + 2.0 * s * j as f64 / (n - 1) as f64;
                    if x * x + y * y <= s * s {
                        best = best.min(grid_objective(&[x, y], &target, &records, lambda, &vm));
                    }
                }
            }
            ours - best
        })
        .collect();
    let worst_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let ok = root_err <= 1e-8 && worst_gap <= 1e-3 && secs < 60.0;
    report(
        1,
        ok,
        &format!("mle root error {root_err:.2e} (≤ 1e-8); worst projection gap {worst_gap:.2e} over 50 grids (≤ 1e-3); {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_gradient_checks() {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    let mut worst_jac = 0.0f64;
    for k in 0..100u64 {
        let mut r = rng(2000 + k);
        let d = r.random_range(1..=4);
        let n = r.random_range(0..12);
        let lambda = r.random_range(0.1..2.0);
        let records: Vec<(Vec<f64>, bool)> = (0..n)
            .map(|_| (random_vec(&mut r, d, 1.5), r.random_bool(0.5)))
            .collect();
        let data = dataset_from(&records);
        let w = DVector::from_vec(random_vec(&mut r, d, 2.0));

        let grad = log_likelihood_gradient(&w, &data, lambda).unwrap();
        let jac = g_jacobian(&w, &data, lambda).unwrap();
        let mut fd_grad = DVector::zeros(d);
        let mut fd_jac = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut plus = to_vec(&w);
            let mut minus = to_vec(&w);
            plus[i] += h;
            minus[i] -= h;
            fd_grad[i] = (naive_log_likelihood(&plus, &records, lambda)
                - naive_log_likelihood(&minus, &records, lambda))
                / (2.0 * h);
            let gp = naive_g(&plus, &records, lambda);
            let gm = naive_g(&minus, &records, lambda);
            for row in 0..d {
                fd_jac[(row, i)] = (gp[row] - gm[row]) / (2.0 * h);
            }
        }
        worst_grad = worst_grad.max((&grad - &fd_grad).norm() / grad.norm().max(1e-12));
        worst_jac = worst_jac.max((&jac - &fd_jac).norm() / jac.norm());

        // The library's own L and g agree with the independent ones.
        let l = log_likelihood(&w, &data, lambda).unwrap();
        assert!(
            (l - naive_log_likelihood(&to_vec(&w), &records, lambda)).abs()
                <= 1e-9 * (1.0 + l.abs())
        );
        let g = g_transform(&w, &data, lambda).unwrap();
        let gn = DVector::from_vec(naive_g(&to_vec(&w), &records, lambda));
        assert!((g - &gn).norm() <= 1e-12 * (1.0 + gn.norm()));
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_grad <= 1e-6 && worst_jac <= 1e-6 && secs < 60.0;
    report(
        2,
        ok,
        &format!("worst relative error: gradient {worst_grad:.2e}, g Jacobian {worst_jac:.2e} (≤ 1e-6); {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_confidence_coverage() {
    let start = Instant::now();
    let runs = 500u64;
    let rounds = 200;
    let delta = 0.1;
    let sp = spec(3, 2, 3, 3, 8);
    let covered: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|seed| {
            let inst = instance(&sp, 3_000 + seed);
            let mut learner = known_learner(&inst, delta, rounds);
            let k = learner.config().kappa;
            let mut oracle = LogisticOracle::new(&inst.model, &inst.map);
            let mut r = rng(seed);
            let mut all = true;
            for _ in 0..rounds {
                let v = learner.state().v.clone();
                let out = learner
                    .step(&inst.mdp, &inst.map, &mut oracle, &mut r)
                    .unwrap();
                let radius = 2.0 * k * out.diagnostics.radius;
                let dist = v.norm(&(inst.model.w_star() - &out.estimate.w_proj));
                all &= dist <= radius;
            }
            all
        })
        .collect();
    let hits = covered.iter().filter(|&&c| c).count();
    let frac = hits as f64 / runs as f64;
    // H0: coverage ≥ 0.9; reject when P(X ≤ hits | p = 0.9) < 0.01.
    let p_value = binomial_cdf(hits, runs as usize, 0.9);
    let secs = start.elapsed().as_secs_f64();
    let ok = p_value >= 0.01 && secs < 600.0;
    report(
        3,
        ok,
        &format!("w* covered for all t in {hits}/{runs} runs ({frac:.3}); one-sided p = {p_value:.3e} vs 0.01; {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_optimism() {
    let start = Instant::now();
    let runs = 200u64;
    let rounds = 200;
    let delta = 0.05;
    let sp = spec(3, 2, 3, 3, 8);
    let violations = |unknown: bool| -> usize {
        (0..runs)
            .into_par_iter()
            .filter(|&seed| {
                let inst = instance(&sp, 4_000 + seed);
                let best =
                    prefrl::harness::best_policy(&inst.policies, &inst.map, &inst.mdp, &inst.model)
                        .unwrap()
                        .0;
                let mut oracle = LogisticOracle::new(&inst.model, &inst.map);
                let mut r = rng(seed);
                let mut missed = false;
                if unknown {
                    let mut l =
                        unknown_learner(&inst, delta, rounds, UnknownModelOptions::default());
                    for _ in 0..rounds {
                        let out = l.step(&inst.mdp, &inst.map, &mut oracle, &mut r).unwrap();
                        missed |= !out.diagnostics.candidate_set.contains(&best);
                    }
                } else {
                    let mut l = known_learner(&inst, delta, rounds);
                    for _ in 0..rounds {
                        let out = l.step(&inst.mdp, &inst.map, &mut oracle, &mut r).unwrap();
                        missed |= !out.diagnostics.candidate_set.contains(&best);
                    }
                }
                missed
            })
            .count()
    };
    let known = violations(false) as f64 / runs as f64;
    let unknown = violations(true) as f64 / runs as f64;
    let secs = start.elapsed().as_secs_f64();
    let ok = known <= delta + 0.05 && unknown <= 5.0 * delta + 0.05 && secs < 900.0;
    report(
        4,
        ok,
        &format!(
            "π* ∉ S_t run frequency: known {known:.3} (≤ {:.3}), unknown {unknown:.3} (≤ {:.3}); {secs:.1}s",
            delta + 0.05,
            5.0 * delta + 0.05
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_bonus_dp() {
    let start = Instant::now();
    let samples = 100_000;
    let mut worst_z = 0.0f64;
    let mut h1_zero = true;
    for k in 0..20u64 {
        let mut r = rng(5_000 + k);
        let horizon = r.random_range(2..=4);
        let sp = spec(r.random_range(2..=4), r.random_range(2..=3), horizon, 2, 3);
        let inst = instance(&sp, 5_100 + k);
        // Empirical model from a handful of rollouts, so rows differ from P.
        let mut counts = VisitCounts::new(sp.states, sp.actions);
        for _ in 0..30 {
            let p = inst.policies.get(r.random_range(0..inst.policies.len()));
            counts.update(&prefrl::mdp::sample_trajectory(&inst.mdp, p, &mut r).unwrap());
        }
        let model = empirical_model(&counts);
        let xi: Vec<f64> = (0..sp.states * sp.actions)
            .map(|_| r.random_range(0.0..2.0))
            .collect();
        let policy = inst.policies.get(0);
        let exact =
            bonus_expectation(&model, inst.mdp.initial_dist(), horizon, policy, &xi).unwrap();
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..samples {
            let tau =
                sample_in_model(&model, inst.mdp.initial_dist(), horizon, policy, &mut r).unwrap();
            let b: f64 = tau.steps()[..horizon - 1]
                .iter()
                .map(|&(s, a)| xi[s * sp.actions + a])
                .sum();
            sum += b;
            sq += b * b;
        }
        let n = samples as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
        let z = if se > 0.0 {
            (exact - mean).abs() / se
        } else if (exact - mean).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
        h1_zero &=
            bonus_expectation(&model, inst.mdp.initial_dist(), 1, policy, &xi).unwrap() == 0.0;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_z <= 3.0 && h1_zero && secs < 300.0;
    report(
        5,
        ok,
        &format!("worst |DP − MC| = {worst_z:.2}σ over 20 instances (≤ 3σ); H = 1 gives 0: {h1_zero}; {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_06_bonus_ordering() {
    let start = Instant::now();
    let runs = 200u64;
    let rounds = 200;
    let delta = 0.1;
    let sp = spec(3, 2, 3, 3, 8);
    let per_run: Vec<(usize, usize)> = (0..runs)
        .into_par_iter()
        .map(|seed| {
            let inst = instance(&sp, 6_000 + seed);
            let mut l = unknown_learner(&inst, delta, rounds, UnknownModelOptions::default());
            let cfg = l.config().clone();
            let eta = 2.0 * cfg.param_bound * cfg.feature_bound;
            let h = inst.mdp.horizon();
            let mut oracle = LogisticOracle::new(&inst.model, &inst.map);
            let mut r = rng(seed);
            let mut violated = 0;
            for t in 1..=rounds {
                let counts = l.state().counts.clone();
                let model = empirical_model(&counts);
                let tf = t as f64;
                let epsilon = 1.0
                    / (tf * tf * cfg.kappa * cfg.lambda
                        + 4.0 * cfg.feature_bound.powi(2) * tf.powi(3));
                let params = BonusParams {
                    eta: 2.0 * h as f64 * eta,
                    delta,
                    epsilon,
                    horizon: h,
                    num_states: sp.states,
                    num_actions: sp.actions,
                };
                let xi = xi_hat_table(&counts, eta, -delta.ln(), h);
                let bad = inst.policies.iter().any(|p| {
                    let b_hat =
                        bonus_expectation(&model, inst.mdp.initial_dist(), h, p, &xi).unwrap();
                    let b_true = true_model_bonus(&inst.mdp, p, &counts, &params).unwrap();
                    b_hat > 2.0 * b_true + epsilon
                });
                violated += usize::from(bad);
                l.step(&inst.mdp, &inst.map, &mut oracle, &mut r).unwrap();
            }
            (violated, rounds)
        })
        .collect();
    let (bad, total) = per_run.iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
    let freq = bad as f64 / total as f64;
    let secs = start.elapsed().as_secs_f64();
    let ok = freq <= 0.1 && secs < 600.0;
    report(
        6,
        ok,
        &format!("B̂ ≤ 2B + ε violated in {bad}/{total} rounds ({freq:.4}, ≤ 0.1); {secs:.1}s"),
    );
    assert!(ok);
}

fn regret_config(algorithm: Algorithm, rounds: usize, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        schema: 1,
        instance: InstanceSpec::Random(RandomInstanceSpec {
            states: 3,
            actions: 2,
            horizon: 3,
            dim: 4,
            policies: 8,
            param_bound: 1.0,
            step_norm: 0.3,
            instance_seed: Some(2024),
        }),
        algorithm,
        lambda: None,
        delta: 0.1,
        rounds,
        seeds,
        output: None,
        plot: false,
    }
}

#[test]
fn criterion_07_regret_sublinearity() {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..20).collect();
    let rounds = 2000;
    let baseline =
        run_experiment(&regret_config(Algorithm::Uniform, rounds, seeds.clone())).unwrap();
    let known = run_experiment(&regret_config(Algorithm::Known, rounds, seeds.clone())).unwrap();
    let unknown = run_experiment(&regret_config(Algorithm::Unknown, rounds, seeds)).unwrap();
    let base = baseline.curve.final_scr().unwrap();
    let margin = |res: &prefrl::harness::ExperimentResult| {
        let a = res.curve.final_scr().unwrap();
        let se = (a.se * a.se + base.se * base.se).sqrt();
        (a.mean, (base.mean - a.mean) / se.max(1e-300))
    };
    let known_slope = known.summary.sublinearity_metric.unwrap_or(f64::NAN);
    let unknown_slope = unknown.summary.sublinearity_metric.unwrap_or(f64::NAN);
    let (known_mean, known_z) = margin(&known);
    let (unknown_mean, unknown_z) = margin(&unknown);
    let secs = start.elapsed().as_secs_f64();
    let known_ok = known_slope <= 0.75 && known_z >= 3.0;
    let unknown_ok = unknown_slope <= 0.85 && unknown_z >= 2.0;
    let ok = known_ok && unknown_ok && secs < 1800.0;
    report(
        7,
        ok,
        &format!(
            "known: slope {known_slope:.3} (≤ 0.75), R_T {known_mean:.2} vs baseline {:.2}, margin {known_z:.1} SE (≥ 3); \
             unknown: slope {unknown_slope:.3} (≤ 0.85), R_T {unknown_mean:.2}, margin {unknown_z:.1} SE (≥ 2); \
             mean |S_T| known {:.1}, unknown {:.1}; {secs:.1}s",
            base.mean,
            known.runs.iter().map(|r| r.rounds.last().unwrap().set_size as f64).sum::<f64>() / 20.0,
            unknown.runs.iter().map(|r| r.rounds.last().unwrap().set_size as f64).sum::<f64>() / 20.0,
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_claim_two_sandwich() {
    let start = Instant::now();
    let rounds = 500;
    let results: Vec<(usize, usize, f64)> = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let sp = RandomInstanceSpec {
                step_norm: 0.25,
                ..spec(3, 2, 3, 3, 6)
            };
            let inst = instance(&sp, 8_000 + k);
            let sb = inst.model.param_bound() * inst.feature_bound;
            assert!(sb < 1.0);
            let algorithm = if k % 2 == 0 {
                Algorithm::Known
            } else {
                Algorithm::Uniform
            };
            let params = RunParams {
                algorithm,
                lambda: default_lambda(&inst),
                delta: 0.1,
                rounds,
            };
            let run = run_on_instance(&inst, &params, k).unwrap();
            let lower = 1.0 / (2.0 * (std::f64::consts::E + 1.0));
            let violations = run
                .cumulative_scr
                .iter()
                .zip(&run.cumulative_pref)
                .filter(|&(&r, &p)| {
                    let slack = 1e-12 * (1.0 + r.abs());
                    p < r * lower - slack || p > r / 2.0 + slack
                })
                .count();
            (violations, rounds, sb)
        })
        .collect();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let prefixes: usize = results.iter().map(|r| r.1).sum();
    let max_sb = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let ok = violations == 0 && secs < 300.0;
    report(
        8,
        ok,
        &format!("{violations} violations over {prefixes} prefixes of 20 runs (max S·B = {max_sb:.2}); {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_09_cross_module_equivalence() {
    let start = Instant::now();
    let rounds = 200;
    let sp = spec(3, 2, 3, 3, 8);
    let mismatches: Vec<usize> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let inst = instance(&sp, 9_000 + seed);
            let options = UnknownModelOptions {
                frozen_model: Some(inst.mdp.transitions().clone()),
                zero_bonuses: true,
                radius: RadiusRule::KnownModelWidth,
            };
            let mut known = known_learner(&inst, 0.1, rounds);
            let mut unknown = unknown_learner(&inst, 0.1, rounds, options);
            let mut o1 = LogisticOracle::new(&inst.model, &inst.map);
            let mut o2 = LogisticOracle::new(&inst.model, &inst.map);
            let (mut r1, mut r2) = (rng(seed), rng(seed));
            let mut mismatched = 0;
            for _ in 0..rounds {
                let a = known.step(&inst.mdp, &inst.map, &mut o1, &mut r1).unwrap();
                let b = unknown
                    .step(&inst.mdp, &inst.map, &mut o2, &mut r2)
                    .unwrap();
                let same = a.pair == b.pair
                    && a.trajectories == b.trajectories
                    && a.outcome == b.outcome
                    && a.diagnostics.candidate_set == b.diagnostics.candidate_set
                    && a.estimate.w_proj == b.estimate.w_proj;
                mismatched += usize::from(!same);
            }
            mismatched
        })
        .collect();
    let total: usize = mismatches.iter().sum();
    let secs = start.elapsed().as_secs_f64();
    let ok = total == 0 && secs < 120.0;
    report(
        9,
        ok,
        &format!("{total} mismatched rounds over 10 seeds × {rounds} rounds; {secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_determinism_and_io() {
    let start = Instant::now();
    let mut cfg = regret_config(Algorithm::Unknown, 150, vec![11, 12, 13]);
    cfg.plot = true;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run_experiment(&cfg).unwrap();
    write_outputs(&first, &a, true).unwrap();
    let second = run_experiment(&cfg).unwrap();
    write_outputs(&second, &b, true).unwrap();
    let bytes_a = std::fs::read(a.join("curve.csv")).unwrap();
    let bytes_b = std::fs::read(b.join("curve.csv")).unwrap();
    let identical = bytes_a == bytes_b;
    let round_trip = read_curve_csv(&a.join("curve.csv")).unwrap() == curve_rows(&first.runs);
    let summary_same = std::fs::read(a.join("summary.json")).unwrap()
        == std::fs::read(b.join("summary.json")).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = identical && round_trip && summary_same && secs < 60.0;
    report(
        10,
        ok,
        &format!(
            "curve.csv byte-identical: {identical} ({} bytes); CSV round-trip exact: {round_trip}; summary identical: {summary_same}; {secs:.1}s",
            bytes_a.len()
        ),
    );
    assert!(ok);
}

#[test]
fn beta_reference_value() {
    // Guards the radius used by criteria 3 and 4.
    let p = prefrl::estimation::BetaParams {
        delta: 0.1,
        lambda: 1.0,
        param_bound: 1.0,
        feature_bound: 1.0,
        dim: 2,
        kappa: 4.0,
    };
    let expected = 1.0 + (10f64.ln() + 4.0 * 1.125f64.ln()).sqrt();
    assert!((beta(1.0, &p).unwrap() - expected).abs() < 1e-12);
    assert_eq!(sigmoid(0.0), 0.5);
}
