//! Regularized logistic maximum likelihood, the constrained projection of
//! the MLE and the ellipsoidal confidence set around it.
//!
//! For records `(z_ℓ, o_ℓ)` with `z_ℓ = φ(τ¹_ℓ) − φ(τ²_ℓ)`:
//!
//! ```text
//!   L(w)   = Σ o log σ(zᵀw) + (1 − o) log(1 − σ(zᵀw)) − λ/2 ‖w‖²
//!   g(w)   = Σ σ(zᵀw) z + λ w
//!   w^L    = argmin_{‖w‖ ≤ S} ‖g(w) − g(ŵ)‖_{V⁻¹}
//!   C_t(δ) = { w : ‖w − w^L‖_V ≤ 2κ β_t(δ) }
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::oracle::{sigmoid, sigmoid_derivative};

/// Default gradient-norm tolerance of [`mle_fit`].
pub const MLE_TOL: f64 = 1e-10;
/// Default Newton iteration budget of [`mle_fit`].
pub const MLE_MAX_ITER: usize = 200;

/// Append-only list of `(z, o)` duel records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DuelDataset {
    records: Vec<(DVector<f64>, bool)>,
    diff_bound: Option<f64>,
}

impl DuelDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dataset whose differences are checked against `‖z‖ ≤ 2B`.
    pub fn with_feature_bound(bound: f64) -> Self {
        Self {
            records: Vec::new(),
            diff_bound: Some(2.0 * bound),
        }
    }

    pub fn push(&mut self, z: DVector<f64>, outcome: bool) -> Result<()> {
        if let Some(first) = self.records.first() {
            if first.0.len() != z.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.0.len(),
                    actual: z.len(),
                });
            }
        }
        if let Some(limit) = self.diff_bound {
            let norm = z.norm();
            if norm > limit * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Invariant(format!(
                    "‖z‖ = {norm} exceeds 2B = {limit}"
                )));
            }
        }
        self.records.push((z, outcome));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(DVector<f64>, bool)] {
        &self.records
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn check_dim(w: &DVector<f64>, data: &DuelDataset) -> Result<()> {
    match data.records.first() {
        Some((z, _)) if z.len() != w.len() => Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: w.len(),
        }),
        _ => Ok(()),
    }
}

/// Regularized log-likelihood `L(w)`. Strictly concave for `λ > 0`.
pub fn log_likelihood(w: &DVector<f64>, data: &DuelDataset, lambda: f64) -> Result<f64> {
    check_dim(w, data)?;
    let mut total = 0.0;
    for (z, o) in &data.records {
        let x = z.dot(w);
        total += if *o { log_sigmoid(x) } else { log_sigmoid(-x) };
    }
    Ok(total - 0.5 * lambda * w.norm_squared())
}

/// `∇L(w) = Σ (o − σ(zᵀw)) z − λw`.
pub fn log_likelihood_gradient(
    w: &DVector<f64>,
    data: &DuelDataset,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_dim(w, data)?;
    let mut grad = -lambda * w;
    for (z, o) in &data.records {
        let coef = if *o { 1.0 } else { 0.0 } - sigmoid(z.dot(w));
        grad.axpy(coef, z, 1.0);
    }
    Ok(grad)
}

/// `g(w) = Σ σ(zᵀw) z + λw`.
pub fn g_transform(w: &DVector<f64>, data: &DuelDataset, lambda: f64) -> Result<DVector<f64>> {
    check_dim(w, data)?;
    let mut out = lambda * w;
    for (z, _) in &data.records {
        out.axpy(sigmoid(z.dot(w)), z, 1.0);
    }
    Ok(out)
}

/// Jacobian of `g`, `Σ σ'(zᵀw) zzᵀ + λI`. Also the negated Hessian of `L`.
pub fn g_jacobian(w: &DVector<f64>, data: &DuelDataset, lambda: f64) -> Result<DMatrix<f64>> {
    check_dim(w, data)?;
    let d = w.len();
    let mut jac = DMatrix::identity(d, d) * lambda;
    for (z, _) in &data.records {
        jac.ger(sigmoid_derivative(z.dot(w)), z, z, 1.0);
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleSolution {
    pub w: DVector<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Maximizes `L` with damped Newton steps, starting from the origin.
pub fn mle_fit(
    data: &DuelDataset,
    dim: usize,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MleSolution> {
    mle_fit_from(data, DVector::zeros(dim), lambda, tol, max_iter)
}

/// [`mle_fit`] from an arbitrary starting point.
pub fn mle_fit_from(
    data: &DuelDataset,
    start: DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MleSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("λ must be positive".into()));
    }
    let mut w = start;
    let mut value = log_likelihood(&w, data, lambda)?;
    let mut grad = log_likelihood_gradient(&w, data, lambda)?;
    for iter in 0..max_iter {
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(MleSolution {
                w,
                grad_norm,
                iterations: iter,
            });
        }
        let hess = g_jacobian(&w, data, lambda)?;
        let step = Cholesky::new(hess)
            .ok_or(Error::NotPositiveDefinite)?
            .solve(&grad);
        let decrement = grad.dot(&step);
        // Once the predicted gain is near the rounding noise of L the Armijo
        // test is meaningless; the full Newton step is locally convergent.
        if decrement < 1e-9 * (1.0 + value.abs()) {
            w += &step;
            value = log_likelihood(&w, data, lambda)?;
            grad = log_likelihood_gradient(&w, data, lambda)?;
            continue;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &w + t * &step;
            let cand_value = log_likelihood(&cand, data, lambda)?;
            if cand_value >= value + 1e-4 * t * decrement {
                accepted = Some((cand, cand_value));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm,
            });
        };
        w = cand;
        value = cand_value;
        grad = log_likelihood_gradient(&w, data, lambda)?;
    }
    let grad_norm = grad.norm();
    if grad_norm <= tol {
        Ok(MleSolution {
            w,
            grad_norm,
            iterations: max_iter,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            grad_norm,
        })
    }
}

/// Symmetric positive-definite data matrix `M = base·I + Σ zzᵀ` with a cached
/// Cholesky factor kept in sync by rank-one updates.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    matrix: DMatrix<f64>,
    base: f64,
    factor: Cholesky<f64, Dyn>,
}

impl DataMatrix {
    pub fn new(dim: usize, base: f64) -> Result<Self> {
        if !(base > 0.0) || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "data matrix needs dim ≥ 1 and base > 0 (got {dim}, {base})"
            )));
        }
        let matrix = DMatrix::identity(dim, dim) * base;
        let factor = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            matrix,
            base,
            factor,
        })
    }

    /// Rebuilds `base·I + Σ zzᵀ` from a log of rank-one terms.
    pub fn from_terms<'a>(
        dim: usize,
        base: f64,
        terms: impl IntoIterator<Item = &'a DVector<f64>>,
    ) -> Result<Self> {
        let mut m = Self::new(dim, base)?;
        for z in terms {
            m.update(z)?;
        }
        Ok(m)
    }

    /// `M ← M + zzᵀ`.
    pub fn update(&mut self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z.len(),
            });
        }
        if z.iter().all(|x| *x == 0.0) {
            return Ok(());
        }
        self.matrix.ger(1.0, z, z, 1.0);
        self.factor.rank_one_update(z, 1.0);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `M⁻¹x` through the cached factor.
    pub fn solve(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(x)
    }

    /// `‖x‖_{M⁻¹} = ‖L⁻¹x‖` with `M = LLᵀ`.
    pub fn inv_norm(&self, x: &DVector<f64>) -> f64 {
        self.factor
            .l_dirty()
            .solve_lower_triangular(x)
            .map(|y| y.norm())
            .unwrap_or(f64::INFINITY)
    }

    /// `‖x‖_M`.
    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x)).max(0.0).sqrt()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }
}

/// `V' = V + zzᵀ`.
pub fn update_data_matrix(v: &DataMatrix, z: &DVector<f64>) -> Result<DataMatrix> {
    let mut out = v.clone();
    out.update(z)?;
    Ok(out)
}

/// `‖w₁ − w₂‖_M`.
pub fn weighted_distance(w1: &DVector<f64>, w2: &DVector<f64>, m: &DataMatrix) -> f64 {
    m.norm(&(w1 - w2))
}

/// Radius `2κβ_t(δ)` of the confidence ellipsoid.
pub fn confidence_radius(kappa: f64, beta: f64) -> f64 {
    2.0 * kappa * beta
}

/// `‖w − center‖_V ≤ radius`.
pub fn in_confidence_set(
    w: &DVector<f64>,
    center: &DVector<f64>,
    v: &DataMatrix,
    radius: f64,
) -> bool {
    weighted_distance(w, center, v) <= radius
}

/// Arguments of [`beta`] other than the round index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub delta: f64,
    pub lambda: f64,
    pub param_bound: f64,
    pub feature_bound: f64,
    pub dim: usize,
    pub kappa: f64,
}

/// `β_t(δ) = √λ S + √(log(1/δ) + 2d log(1 + tB/(κλd)))`.
pub fn beta(t: f64, p: &BetaParams) -> Result<f64> {
    if !(p.delta > 0.0 && p.delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "δ = {} outside (0, 1]",
            p.delta
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} is negative")));
    }
    let d = p.dim as f64;
    let inner =
        (1.0 / p.delta).ln() + 2.0 * d * (t * p.feature_bound / (p.kappa * p.lambda * d)).ln_1p();
    Ok(p.lambda.sqrt() * p.param_bound + inner.sqrt())
}

/// Result of [`project_estimate`]; `objective` is `‖g(w) − g(ŵ)‖_{V⁻¹}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: DVector<f64>,
    pub objective: f64,
}

fn project_to_ball(w: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = w.norm();
    if n > radius {
        w * (radius / n)
    } else {
        w.clone()
    }
}

struct ProjectionProblem<'a> {
    data: &'a DuelDataset,
    v: &'a DataMatrix,
    lambda: f64,
    target: DVector<f64>,
}

impl ProjectionProblem<'_> {
    /// Squared objective and its gradient `2 J V⁻¹ r`.
    fn value(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let r = g_transform(w, self.data, self.lambda)? - &self.target;
        let vr = self.v.solve(&r);
        Ok((r.dot(&vr), vr))
    }

    fn gradient(&self, w: &DVector<f64>, vr: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(2.0 * g_jacobian(w, self.data, self.lambda)? * vr)
    }

    fn descend(
        &self,
        start: DVector<f64>,
        radius: f64,
        max_iter: usize,
    ) -> Result<(DVector<f64>, f64)> {
        let mut w = project_to_ball(&start, radius);
        let (mut f, mut vr) = self.value(&w)?;
        let mut step = 1.0;
        for _ in 0..max_iter {
            let grad = self.gradient(&w, &vr)?;
            let mut moved = false;
            for _ in 0..80 {
                let cand = project_to_ball(&(&w - step * &grad), radius);
                let delta = &cand - &w;
                let (cf, cvr) = self.value(&cand)?;
                if cf <= f + grad.dot(&delta) + delta.norm_squared() / (2.0 * step) {
                    let small = delta.norm() <= 1e-13 * (1.0 + w.norm());
                    w = cand;
                    let old = f;
                    f = cf;
                    vr = cvr;
                    step *= 2.0;
                    moved = !small && (old - f) > 1e-16 * old.abs().max(1e-300);
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Ok((w, f))
    }
}

/// `w^L = argmin_{‖w‖ ≤ S} ‖g(w) − g(ŵ)‖_{V⁻¹}`.
///
/// Returns `ŵ` itself when it is feasible. Otherwise runs projected
/// gradient descent from several starts and keeps the best point.
pub fn project_estimate(
    w_hat: &DVector<f64>,
    data: &DuelDataset,
    v: &DataMatrix,
    lambda: f64,
    param_bound: f64,
) -> Result<Projection> {
    project_estimate_with_hint(w_hat, data, v, lambda, param_bound, None)
}

/// [`project_estimate`] with an extra warm start (typically the previous
/// round's projection).
pub fn project_estimate_with_hint(
    w_hat: &DVector<f64>,
    data: &DuelDataset,
    v: &DataMatrix,
    lambda: f64,
    param_bound: f64,
    hint: Option<&DVector<f64>>,
) -> Result<Projection> {
    let norm = w_hat.norm();
    if norm <= param_bound {
        return Ok(Projection {
            w: w_hat.clone(),
            objective: 0.0,
        });
    }
    let problem = ProjectionProblem {
        data,
        v,
        lambda,
        target: g_transform(w_hat, data, lambda)?,
    };
    let radial = w_hat * (param_bound / norm);
    let mut starts = vec![radial.clone(), DVector::zeros(w_hat.len())];
    if w_hat.len() > 1 {
        let perp = orthogonal_direction(w_hat) * (0.5 * param_bound);
        starts.push(&radial + &perp);
        starts.push(&radial - &perp);
    } else {
        starts.push(&radial * 0.5);
        starts.push(-&radial);
    }
    if let Some(h) = hint {
        starts.push(h.clone());
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for start in starts {
        let (w, f) = problem.descend(start, param_bound, 5_000)?;
        if f.is_finite() && best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((w, f));
        }
    }
    let (w, f) = best
        .ok_or_else(|| Error::ProjectionStagnation("no finite objective from any start".into()))?;
    Ok(Projection {
        w,
        objective: f.max(0.0).sqrt(),
    })
}

/// Unit vector orthogonal to `w`, built from the least aligned axis.
fn orthogonal_direction(w: &DVector<f64>) -> DVector<f64> {
    let axis = w.iamin();
    let mut e = DVector::zeros(w.len());
    e[axis] = 1.0;
    let unit = w.normalize();
    let mut u = &e - &unit * unit.dot(&e);
    let n = u.norm();
    if n > 0.0 {
        u /= n;
    }
    u
}

/// Projection objective `‖g(w) − g(ŵ)‖_{V⁻¹}` at an arbitrary point.
pub fn projection_objective(
    w: &DVector<f64>,
    w_hat: &DVector<f64>,
    data: &DuelDataset,
    v: &DataMatrix,
    lambda: f64,
) -> Result<f64> {
    let r = g_transform(w, data, lambda)? - g_transform(w_hat, data, lambda)?;
    Ok(v.inv_norm(&r))
}

/// MLE together with its projection onto the `S`-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub w_mle: DVector<f64>,
    pub w_proj: DVector<f64>,
    pub lambda: f64,
    pub param_bound: f64,
    pub grad_norm: f64,
    pub projection_objective: f64,
}

impl Estimate {
    /// Estimate before any data: both points at the origin.
    pub fn initial(dim: usize, lambda: f64, param_bound: f64) -> Self {
        Self {
            w_mle: DVector::zeros(dim),
            w_proj: DVector::zeros(dim),
            lambda,
            param_bound,
            grad_norm: 0.0,
            projection_objective: 0.0,
        }
    }
}

/// Fits the MLE (warm-started from `previous` when given) and projects it.
pub fn fit_estimate(
    data: &DuelDataset,
    v: &DataMatrix,
    lambda: f64,
    param_bound: f64,
    previous: Option<&Estimate>,
) -> Result<Estimate> {
    let dim = v.dim();
    let start = previous.map_or_else(|| DVector::zeros(dim), |e| e.w_mle.clone());
    let mle = match mle_fit_from(data, start, lambda, MLE_TOL, MLE_MAX_ITER) {
        Ok(m) => m,
        Err(_) if previous.is_some() => mle_fit(data, dim, lambda, MLE_TOL, MLE_MAX_ITER)?,
        Err(e) => return Err(e),
    };
    let proj = project_estimate_with_hint(
        &mle.w,
        data,
        v,
        lambda,
        param_bound,
        previous.map(|e| &e.w_proj),
    )?;
    Ok(Estimate {
        w_mle: mle.w,
        w_proj: proj.w,
        lambda,
        param_bound,
        grad_norm: mle.grad_norm,
        projection_objective: proj.objective,
    })
}
