#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use prefrl::harness::{random_instance, Instance, RandomInstanceSpec};
use prefrl::known::{KnownModelConfig, KnownModelLearner, TieBreak};
use prefrl::unknown::{UnknownModelConfig, UnknownModelLearner, UnknownModelOptions};
use prefrl::{kappa, sigmoid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spec(
    states: usize,
    actions: usize,
    horizon: usize,
    dim: usize,
    policies: usize,
) -> RandomInstanceSpec {
    RandomInstanceSpec {
        states,
        actions,
        horizon,
        dim,
        policies,
        param_bound: 1.0,
        step_norm: 0.3,
        instance_seed: None,
    }
}

pub fn instance(spec: &RandomInstanceSpec, seed: u64) -> Instance {
    let mut r = rng(seed);
    r.set_stream(7);
    random_instance(spec, &mut r).unwrap()
}

pub fn default_lambda(inst: &Instance) -> f64 {
    let k = kappa(inst.feature_bound, inst.model.param_bound()).unwrap();
    (inst.feature_bound / k).max(1.0 / k)
}

pub fn known_config(inst: &Instance, delta: f64, rounds: usize) -> KnownModelConfig {
    let s = inst.model.param_bound();
    KnownModelConfig {
        lambda: default_lambda(inst),
        delta,
        horizon_rounds: rounds,
        param_bound: s,
        feature_bound: inst.feature_bound,
        dim: inst.map.dim(),
        kappa: kappa(inst.feature_bound, s).unwrap(),
        tie_break: TieBreak::LowestIndex,
    }
}

pub fn unknown_config(inst: &Instance, delta: f64, rounds: usize) -> UnknownModelConfig {
    let k = known_config(inst, delta, rounds);
    UnknownModelConfig {
        lambda: k.lambda,
        delta,
        horizon_rounds: rounds,
        param_bound: k.param_bound,
        feature_bound: k.feature_bound,
        dim: k.dim,
        kappa: k.kappa,
        tie_break: TieBreak::LowestIndex,
    }
}

pub fn known_learner(inst: &Instance, delta: f64, rounds: usize) -> KnownModelLearner {
    KnownModelLearner::new(
        known_config(inst, delta, rounds),
        inst.policies.clone(),
        &inst.mdp,
        &inst.map,
    )
    .unwrap()
}

pub fn unknown_learner(
    inst: &Instance,
    delta: f64,
    rounds: usize,
    options: UnknownModelOptions,
) -> UnknownModelLearner {
    UnknownModelLearner::with_options(
        unknown_config(inst, delta, rounds),
        inst.policies.clone(),
        &inst.mdp,
        options,
    )
    .unwrap()
}

/// `P(X ≤ k)` for `X ~ Binomial(n, p)`, summed in log space.
pub fn binomial_cdf(k: usize, n: usize, p: f64) -> f64 {
    let mut log_pmf = n as f64 * (1.0 - p).ln();
    let mut total = 0.0;
    for i in 0..=k.min(n) {
        if i > 0 {
            log_pmf += ((n - i + 1) as f64).ln() - (i as f64).ln() + p.ln() - (1.0 - p).ln();
        }
        total += log_pmf.exp();
    }
    total.min(1.0)
}

/// Independent log-likelihood: direct evaluation of the logistic terms.
pub fn naive_log_likelihood(w: &[f64], data: &[(Vec<f64>, bool)], lambda: f64) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut l = -0.5 * lambda * dot(w, w);
    for (z, o) in data {
        let p = 1.0 / (1.0 + (-dot(z, w)).exp());
        l += if *o { p.ln() } else { (1.0 - p).ln() };
    }
    l
}

/// Independent `g(w) = Σ σ(zᵀw) z + λw`.
pub fn naive_g(w: &[f64], data: &[(Vec<f64>, bool)], lambda: f64) -> Vec<f64> {
    let mut out: Vec<f64> = w.iter().map(|x| lambda * x).collect();
    for (z, _) in data {
        let s = sigmoid(z.iter().zip(w).map(|(a, b)| a * b).sum());
        for (o, zi) in out.iter_mut().zip(z) {
            *o += s * zi;
        }
    }
    out
}

/// `√(xᵀ M⁻¹ x)` via an independent Gauss-Jordan inverse.
pub fn naive_inv_norm(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut a = m.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
            .unwrap();
        a.swap_rows(c, piv);
        inv.swap_rows(c, piv);
        let d = a[(c, c)];
        for k in 0..n {
            a[(c, k)] /= d;
            inv[(c, k)] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[(r, c)];
                for k in 0..n {
                    a[(r, k)] -= f * a[(c, k)];
                    inv[(r, k)] -= f * inv[(c, k)];
                }
            }
        }
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += x[i] * inv[(i, j)] * x[j];
        }
    }
    q.max(0.0).sqrt()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// One line per acceptance criterion, written past the test harness capture.
pub fn report(criterion: usize, ok: bool, detail: &str) {
    use std::io::Write;
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stdout(),
        "[criterion {criterion:>2}] {tag} {detail}"
    );
}
