//! Nuclear-norm minimization under a weighted data-fit constraint.
//!
//! The constrained problem
//!
//! ```text
//! minimize ||X||_*   subject to   ||W ⊙ P_Ω(X − Y)||_F <= δ
//! ```
//!
//! is solved through its penalized form `λ||X||_* + ½||W ⊙ P_Ω(X − Y)||_F²`
//! (accelerated proximal gradient, singular-value soft-thresholding as the
//! prox) with an outer bisection on `λ` that exploits monotonicity of the
//! data-fit residual in `λ`. The unweighted problem is the `W ≡ 1` special
//! case of the same code path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{self, MaskedMatrix};
use crate::weights::WeightModel;

/// Stop an outer bisection once the bracket has shrunk to this fraction of
/// the initial penalty; beyond it the residual mismatch is inner-solver
/// noise, not a bracketing failure.
const BRACKET_COLLAPSE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Constraint radius δ.
    pub delta: f64,
    /// Iteration cap for one penalized solve.
    pub max_inner_iters: usize,
    /// Relative Frobenius-change threshold that stops the inner iteration.
    pub inner_tol: f64,
    /// Cap on outer bisection steps.
    pub max_bisect_iters: usize,
    /// Relative tolerance for matching the residual to δ.
    pub constraint_tol: f64,
    /// Momentum acceleration for the inner iteration.
    pub acceleration: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            max_inner_iters: 500,
            inner_tol: 1e-6,
            max_bisect_iters: 40,
            constraint_tol: 1e-3,
            acceleration: true,
        }
    }
}

impl SolverConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.delta < 0.0 {
            return Err(Error::NegativeDelta(self.delta));
        }
        if !(self.inner_tol > 0.0) || !(self.constraint_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_inner_iters == 0 || self.max_bisect_iters == 0 {
            return Err(Error::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a solve: the estimate plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: DMatrix<f64>,
    /// Achieved `||W ⊙ P_Ω(X − Y)||_F`.
    pub final_residual: f64,
    /// Penalty parameter the solution was computed at.
    pub penalty_lambda: f64,
    /// Inner iterations spent, summed over all outer steps.
    pub inner_iterations_total: usize,
    pub converged: bool,
    pub nuclear_norm: f64,
    /// Objective values of the accepted iterates of the final penalized
    /// solve, starting value included.
    pub objective_history: Vec<f64>,
}

/// Proximal operator of `tau * ||.||_*`: soft-thresholds the singular values
/// of `a` at level `tau`.
pub fn svt_prox(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if tau < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "soft-threshold level must be nonnegative, got {tau}"
        )));
    }
    Ok(svt_prox_with_norm(a, tau)?.0)
}

/// Soft-thresholds and also returns the nuclear norm of the result, which is
/// known for free from the shrunk singular values.
fn svt_prox_with_norm(a: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    let f = matrix::svd(a)?;
    Ok(shrink_factors(
        f.singular_values(),
        f.left(),
        f.right(),
        tau,
        a.nrows(),
        a.ncols(),
    ))
}

fn shrink_factors(
    sigma: &[f64],
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    tau: f64,
    rows: usize,
    cols: usize,
) -> (DMatrix<f64>, f64) {
    let kept = sigma.iter().take_while(|&&s| s > tau).count();
    if kept == 0 {
        return (DMatrix::zeros(rows, cols), 0.0);
    }
    let mut scaled = left.columns(0, kept).into_owned();
    let mut nuclear = 0.0;
    for k in 0..kept {
        let shrunk = sigma[k] - tau;
        nuclear += shrunk;
        scaled.column_mut(k).scale_mut(shrunk);
    }
    let out = scaled * right.columns(0, kept).transpose();
    (out, nuclear)
}

/// Smallest dimension at which the iteration switches from full SVDs to the
/// warm-started subspace path.
const PARTIAL_MIN_DIM: usize = 24;
/// Extra basis columns kept beyond the current estimate rank.
const PARTIAL_BUFFER: usize = 8;
/// A full SVD is forced at this cadence to resynchronize the basis.
const PARTIAL_REFRESH_EVERY: usize = 64;

/// Soft-thresholding engine that tracks the right singular basis across
/// iterations.
///
/// Thresholded iterates are low-rank, so most of the spectrum computed by a
/// full SVD is discarded. Warm-started subspace iteration recovers just the
/// singular triplets above the threshold at a fraction of the cost; an
/// exactness guard (no remaining direction can carry a singular value above
/// the threshold) grows the basis or falls back to the full decomposition
/// whenever the cheap path cannot be certified.
struct SvtEngine {
    basis: Option<DMatrix<f64>>,
    calls: usize,
    /// Remaining calls to route straight to the full path after a failed
    /// certification, so hopeless regimes do not pay the subspace overhead
    /// on every iteration.
    cooldown: usize,
}

impl SvtEngine {
    fn new() -> Self {
        Self {
            basis: None,
            calls: 0,
            cooldown: 0,
        }
    }

    fn svt(&mut self, a: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
        self.calls += 1;
        let min_dim = a.nrows().min(a.ncols());
        let refresh = self.calls % PARTIAL_REFRESH_EVERY == 0;
        if self.cooldown > 0 {
            self.cooldown -= 1;
            return self.full(a, tau);
        }
        if min_dim < PARTIAL_MIN_DIM || tau <= 0.0 || refresh || self.basis.is_none() {
            return self.full(a, tau);
        }

        let mut v = self.basis.take().unwrap();
        if v.nrows() != a.ncols() {
            return self.full(a, tau);
        }
        let mut attempts = 0;
        loop {
            if v.ncols() * 2 >= min_dim || attempts > 1 {
                self.cooldown = 16;
                return self.full(a, tau);
            }
            attempts += 1;
            let mut previous_sigma: Option<Vec<f64>> = None;
            for _round in 0..6 {
                let q = match orthonormalized(a * &v) {
                    Some(q) => q,
                    None => return self.full(a, tau),
                };
                let b = q.transpose() * a;
                let f = matrix::svd(&b)?;
                let sigma = f.singular_values().to_vec();
                v = match orthonormalized(a.transpose() * &q) {
                    Some(v) => v,
                    None => return self.full(a, tau),
                };

                // the estimates must have stabilized across power rounds
                let stable = previous_sigma.as_ref().is_some_and(|prev| {
                    prev.len() == sigma.len()
                        && prev
                            .iter()
                            .zip(&sigma)
                            .all(|(&p, &s)| (p - s).abs() <= 1e-10 * (1.0 + s))
                });
                if stable {
                    // the spectrum must visibly cross below the threshold
                    // inside the subspace, and nothing above the threshold
                    // may remain outside it
                    let smallest = sigma.last().copied().unwrap_or(0.0);
                    let captured_all = f.rank() >= b.nrows().min(b.ncols());
                    let missed = spectral_estimate_residual(a, &q, &b);
                    if (smallest <= 0.9 * tau || captured_all) && 1.25 * missed <= tau {
                        let left = &q * f.left();
                        let (out, nuclear) =
                            shrink_factors(&sigma, &left, f.right(), tau, a.nrows(), a.ncols());
                        let kept = sigma.iter().take_while(|&&s| s > tau).count();
                        let next =
                            f.right().columns(0, kept.max(1).min(f.rank())).into_owned();
                        self.basis = Some(grow_basis(&next, PARTIAL_BUFFER));
                        return Ok((out, nuclear));
                    }
                    break;
                }
                previous_sigma = Some(sigma);
            }
            v = grow_basis(&v, PARTIAL_BUFFER);
        }
    }

    fn full(&mut self, a: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
        let f = matrix::svd(a)?;
        let sigma = f.singular_values();
        let (out, nuclear) =
            shrink_factors(sigma, f.left(), f.right(), tau, a.nrows(), a.ncols());
        let kept = sigma.iter().take_while(|&&s| s > tau).count();
        if f.rank() > 0 && a.nrows().min(a.ncols()) >= PARTIAL_MIN_DIM {
            let next = f.right().columns(0, kept.max(1).min(f.rank())).into_owned();
            self.basis = Some(grow_basis(&next, PARTIAL_BUFFER));
        } else {
            self.basis = None;
        }
        Ok((out, nuclear))
    }
}

/// Power estimate of the largest singular value of `A - Q Qᵀ A` without
/// forming it: the part of the spectrum the projection failed to capture.
fn spectral_estimate_residual(a: &DMatrix<f64>, q: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        // (A - Q B) x with B = Qᵀ A
        a * x - q * (b * x)
    };
    let apply_t = |x: &DMatrix<f64>| -> DMatrix<f64> {
        a.transpose() * x - b.transpose() * (q.transpose() * x)
    };
    let mut v = DMatrix::from_element(a.ncols(), 1, 1.0 / (a.ncols() as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..4 {
        let u = apply(&v);
        let norm_u = u.norm();
        if norm_u == 0.0 {
            return 0.0;
        }
        v = apply_t(&(u / norm_u));
        estimate = v.norm();
        if estimate == 0.0 {
            return 0.0;
        }
        v /= estimate;
    }
    estimate
}

/// Appends deterministic padding columns to a basis and re-orthonormalizes.
fn grow_basis(v: &DMatrix<f64>, extra: usize) -> DMatrix<f64> {
    let n = v.nrows();
    let target = (v.ncols() + extra).min(n);
    let mut out = DMatrix::zeros(n, target);
    out.view_mut((0, 0), (n, v.ncols())).copy_from(v);
    for (k, col) in (v.ncols()..target).enumerate() {
        // spread coordinate seeds; orthonormalization fixes any overlap
        let pos = (k * 37 + v.ncols() * 11) % n;
        out[(pos, col)] = 1.0;
    }
    let kept = orthonormalize_columns(&mut out);
    out.columns(0, kept).into_owned()
}

/// Orthonormalizes and compacts the columns of `m`; `None` when nothing
/// independent remains.
fn orthonormalized(mut m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let kept = orthonormalize_columns(&mut m);
    if kept == 0 {
        return None;
    }
    if kept < m.ncols() {
        m = m.columns(0, kept).into_owned();
    }
    Some(m)
}

/// In-place modified Gram-Schmidt with one re-orthogonalization pass;
/// returns the number of independent columns, compacted to the front.
fn orthonormalize_columns(m: &mut DMatrix<f64>) -> usize {
    let cols = m.ncols();
    let mut kept = 0;
    for j in 0..cols {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for k in 0..kept {
                let proj = m.column(k).dot(&v);
                v -= m.column(k) * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-12 {
            v /= norm;
            m.set_column(kept, &v);
            kept += 1;
        }
    }
    kept
}

/// Precomputed per-entry data shared by the inner iteration.
struct Workspace<'a> {
    y: &'a MaskedMatrix,
    omega: &'a [(usize, usize)],
    w_sq: Vec<f64>,
    step: f64,
}

impl<'a> Workspace<'a> {
    fn new(y: &'a MaskedMatrix, w: &'a WeightModel) -> Result<Self> {
        if y.omega_len() == 0 {
            return Err(Error::EmptyObservations);
        }
        if !w.matches_omega(y.omega()) {
            return Err(Error::WeightMaskMismatch);
        }
        let w_sq: Vec<f64> = w.weights().iter().map(|x| x * x).collect();
        let max_w_sq = w_sq.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            y,
            omega: y.omega(),
            w_sq,
            step: 1.0 / max_w_sq,
        })
    }

    /// `½ Σ W²(X−Y)²` over the observed entries.
    fn data_fit(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * self.weighted_residual_sq(x)
    }

    fn weighted_residual_sq(&self, x: &DMatrix<f64>) -> f64 {
        self.omega
            .iter()
            .zip(&self.w_sq)
            .map(|(&(i, j), w2)| {
                let d = x[(i, j)] - self.y.get(i, j);
                w2 * d * d
            })
            .sum()
    }

    fn weighted_residual(&self, x: &DMatrix<f64>) -> f64 {
        self.weighted_residual_sq(x).sqrt()
    }

    /// `X − step · ∇f(X)`; the gradient vanishes off the observation set.
    fn gradient_step(&self, x: &DMatrix<f64>, step: f64) -> DMatrix<f64> {
        let mut out = x.clone();
        for (&(i, j), w2) in self.omega.iter().zip(&self.w_sq) {
            out[(i, j)] -= step * w2 * (x[(i, j)] - self.y.get(i, j));
        }
        out
    }

    /// Largest singular value of `W² ⊙ P_Ω(Y)`: the penalty level at and
    /// above which the zero matrix is stationary.
    fn lambda_max(&self) -> Result<f64> {
        let mut g = DMatrix::zeros(self.y.rows(), self.y.cols());
        for (&(i, j), w2) in self.omega.iter().zip(&self.w_sq) {
            g[(i, j)] = w2 * self.y.get(i, j);
        }
        let f = matrix::svd(&g)?;
        Ok(f.singular_values().first().copied().unwrap_or(0.0))
    }
}

/// Minimizes `λ||X||_* + ½||W ⊙ P_Ω(X − Y)||_F²` by accelerated proximal
/// gradient from the zero matrix.
///
/// The step size is `1 / max W²` (the Lipschitz constant of the smooth
/// term), the objective is kept monotone by rejecting non-monotone
/// accelerated steps (momentum restart plus step halving), and the iteration
/// stops when the relative Frobenius change falls below `cfg.inner_tol`.
/// Hitting the iteration cap yields `converged = false` with the last
/// iterate still returned.
pub fn solve_penalized(
    y: &MaskedMatrix,
    w: &WeightModel,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "penalty must be positive, got {lambda}"
        )));
    }
    let ws = Workspace::new(y, w)?;
    let mut engine = SvtEngine::new();
    let report = solve_penalized_inner(&ws, lambda, cfg, None, &mut engine)?;
    finalize_nuclear_norm(report)
}

/// Recomputes the reported nuclear norm from the final iterate, so that the
/// report is exact even when the iteration used the certified-approximate
/// thresholding path.
fn finalize_nuclear_norm(mut report: SolveReport) -> Result<SolveReport> {
    report.nuclear_norm = matrix::svd(&report.solution)?.nuclear_norm();
    Ok(report)
}

fn solve_penalized_inner(
    ws: &Workspace,
    lambda: f64,
    cfg: &SolverConfig,
    warm_start: Option<&DMatrix<f64>>,
    engine: &mut SvtEngine,
) -> Result<SolveReport> {
    let (mut x, mut nuclear) = match warm_start {
        Some(x0) => (x0.clone(), matrix::svd(x0)?.nuclear_norm()),
        None => (DMatrix::zeros(ws.y.rows(), ws.y.cols()), 0.0),
    };
    let mut objective = lambda * nuclear + ws.data_fit(&x);
    let mut history = vec![objective];

    let mut extrapolated = x.clone();
    let mut momentum = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    let mut rejections = 0usize;

    for _ in 0..cfg.max_inner_iters {
        iterations += 1;
        let candidate = ws.gradient_step(&extrapolated, ws.step);
        let (mut x_new, mut nuc_new) = engine.svt(&candidate, lambda * ws.step)?;
        let mut obj_new = lambda * nuc_new + ws.data_fit(&x_new);

        let slack = 1e-10 * (1.0 + objective.abs());
        if obj_new > objective + slack {
            rejections += 1;
            // non-monotone accelerated step: restart momentum and retry as a
            // plain step from the last accepted iterate, halving if needed
            momentum = 1.0;
            let mut local_step = ws.step;
            let mut halvings = 0;
            loop {
                let retry = ws.gradient_step(&x, local_step);
                let (rx, rn) = engine.svt(&retry, lambda * local_step)?;
                let ro = lambda * rn + ws.data_fit(&rx);
                if ro <= objective + slack {
                    x_new = rx;
                    nuc_new = rn;
                    obj_new = ro;
                    break;
                }
                halvings += 1;
                if halvings > 50 {
                    // floating-point stall at the optimum: stay put
                    x_new = x.clone();
                    nuc_new = nuclear;
                    obj_new = objective;
                    break;
                }
                local_step *= 0.5;
            }
        }

        let diff = (&x_new - &x).norm();
        let scale = x_new.norm().max(1e-12);
        let stalled = diff <= cfg.inner_tol * scale;

        if cfg.acceleration {
            let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            extrapolated = &x_new + (&x_new - &x) * beta;
            momentum = next_momentum;
        } else {
            extrapolated = x_new.clone();
        }

        x = x_new;
        nuclear = nuc_new;
        objective = obj_new;
        history.push(objective);

        if stalled {
            converged = true;
            break;
        }
    }

    if std::env::var_os("HAPWEC_SOLVER_TRACE").is_some() {
        eprintln!(
            "trace: lambda {lambda:.4e} iters {iterations} rejections {rejections} obj {objective:.6e}"
        );
    }

    Ok(SolveReport {
        final_residual: ws.weighted_residual(&x),
        solution: x,
        penalty_lambda: lambda,
        inner_iterations_total: iterations,
        converged,
        nuclear_norm: nuclear,
        objective_history: history,
    })
}

/// Solves the weighted-constraint problem at radius `cfg.delta`.
///
/// If the zero matrix is already feasible it is returned directly (it has
/// the least possible nuclear norm). A zero radius switches to an
/// interpolating mode that pins the observed entries and soft-thresholds
/// only the complement. Otherwise the penalty is bisected on
/// `(0, λ_max]` until the achieved residual matches `δ` within
/// `cfg.constraint_tol`, warm-starting each penalized solve at the previous
/// solution; if the bracket collapses to machine precision first, the
/// solve from the feasible side is returned.
pub fn solve_nuwec(y: &MaskedMatrix, w: &WeightModel, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let ws = Workspace::new(y, w)?;
    let delta = cfg.delta;

    let zero = DMatrix::zeros(y.rows(), y.cols());
    let residual_at_zero = ws.weighted_residual(&zero);
    if delta >= residual_at_zero {
        return Ok(SolveReport {
            solution: zero,
            final_residual: residual_at_zero,
            penalty_lambda: ws.lambda_max()?,
            inner_iterations_total: 0,
            converged: true,
            nuclear_norm: 0.0,
            objective_history: Vec::new(),
        });
    }

    let lambda_max = ws.lambda_max()?;
    if delta == 0.0 {
        return solve_interpolating(&ws, lambda_max, cfg);
    }

    let window = cfg.constraint_tol * delta.max(1e-12);
    // bracket on the residual mismatch r(λ) − δ; both endpoint values are
    // known analytically (r → 0 as λ → 0, r = ||W ⊙ Y||_F at λ_max), which
    // lets a regula-falsi step (Illinois variant, clamped away from the
    // bracket edges) replace most plain halvings
    let (mut lo, mut hi) = (0.0f64, lambda_max);
    let (mut mismatch_lo, mut mismatch_hi) = (-delta, residual_at_zero - delta);
    let mut last_side = 0i8;
    let mut warm: Option<DMatrix<f64>> = None;
    let mut feasible: Option<SolveReport> = None;
    let mut total_inner = 0;
    let mut collapsed = false;
    let mut engine = SvtEngine::new();

    for _ in 0..cfg.max_bisect_iters {
        let width = hi - lo;
        let secant = (lo * mismatch_hi - hi * mismatch_lo) / (mismatch_hi - mismatch_lo);
        let lambda = secant.clamp(lo + 0.05 * width, hi - 0.05 * width);
        let mut report = solve_penalized_inner(&ws, lambda, cfg, warm.as_ref(), &mut engine)?;
        total_inner += report.inner_iterations_total;
        warm = Some(report.solution.clone());

        let mismatch = report.final_residual - delta;
        if mismatch.abs() <= window {
            report.inner_iterations_total = total_inner;
            return finalize_nuclear_norm(report);
        }
        if mismatch > 0.0 {
            hi = lambda;
            mismatch_hi = mismatch;
            if last_side == 1 {
                mismatch_lo *= 0.5;
            }
            last_side = 1;
        } else {
            lo = lambda;
            mismatch_lo = mismatch;
            feasible = Some(report);
            if last_side == -1 {
                mismatch_hi *= 0.5;
            }
            last_side = -1;
        }
        if hi - lo <= BRACKET_COLLAPSE * lambda_max {
            collapsed = true;
            break;
        }
    }

    match feasible {
        Some(mut report) => {
            // residual matching is limited by inner accuracy once the
            // bracket has collapsed; the feasible-side solution stands
            report.converged = report.converged && collapsed;
            report.inner_iterations_total = total_inner;
            finalize_nuclear_norm(report)
        }
        None => {
            // never reached the feasible side: report the tightest solve
            let lambda = 0.5 * (lo + hi);
            let mut report = solve_penalized_inner(&ws, lambda, cfg, warm.as_ref(), &mut engine)?;
            total_inner += report.inner_iterations_total;
            report.inner_iterations_total = total_inner;
            report.converged = false;
            finalize_nuclear_norm(report)
        }
    }
}

/// Exact-interpolation mode for δ = 0: observed entries are pinned to the
/// data after every soft-thresholding step, so only the unobserved
/// complement is optimized.
fn solve_interpolating(
    ws: &Workspace,
    lambda_max: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let lambda = 1e-6 * lambda_max;
    let tau = lambda * ws.step;
    let mut x = ws.y.values().clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut engine = SvtEngine::new();

    for _ in 0..cfg.max_inner_iters {
        iterations += 1;
        let (mut z, _) = engine.svt(&x, tau)?;
        for &(i, j) in ws.omega {
            z[(i, j)] = ws.y.get(i, j);
        }
        let diff = (&z - &x).norm();
        let scale = z.norm().max(1e-12);
        x = z;
        if diff <= cfg.inner_tol * scale {
            converged = true;
            break;
        }
    }

    let nuclear = matrix::svd(&x)?.nuclear_norm();
    Ok(SolveReport {
        final_residual: ws.weighted_residual(&x),
        solution: x,
        penalty_lambda: lambda,
        inner_iterations_total: iterations,
        converged,
        nuclear_norm: nuclear,
        objective_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::mask_apply;
    use crate::weights::WeightModel;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn full_omega(rows: usize, cols: usize) -> Vec<(usize, usize)> {
        (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .collect()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Nuclear norm through a route independent of `matrix::svd`: square
    /// roots of the eigenvalues of AᵀA, by hand-rolled cyclic Jacobi.
    fn nuclear_norm_via_gram(a: &DMatrix<f64>) -> f64 {
        let gram = a.transpose() * a;
        jacobi_eigenvalues(&gram)
            .into_iter()
            .map(|ev| ev.max(0.0).sqrt())
            .sum()
    }

    /// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
    fn jacobi_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
        let n = sym.nrows();
        let mut m = sym.clone();
        for _ in 0..200 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off <= 1e-30 * (1.0 + m.norm_squared()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (m[(q, q)] - m[(p, p)]) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
            }
        }
        (0..n).map(|i| m[(i, i)]).collect()
    }

    #[test]
    fn svt_diagonal_soft_threshold() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let out = svt_prox(&a, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!((out - expected).norm() < 1e-10);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let a = random_matrix(4, 5, 7);
        let out = svt_prox(&a, 0.0).unwrap();
        assert!((out - &a).norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn svt_never_grows_the_nuclear_norm() {
        let a = random_matrix(5, 4, 8);
        let before = nuclear_norm_via_gram(&a);
        for tau in [0.1, 0.5, 2.0] {
            let after = nuclear_norm_via_gram(&svt_prox(&a, tau).unwrap());
            assert!(after <= before + 1e-10);
        }
    }

    #[test]
    fn svt_matches_direct_prox_minimization() {
        // independent oracle: random-direction descent on the prox objective
        // tau*||X||_* + 0.5*||X - A||_F^2 (the nuclear norm is nonsmooth, so
        // coordinate moves alone can stall; random directions do not)
        let a = random_matrix(3, 3, 9);
        let tau = 0.5;
        let objective = |x: &DMatrix<f64>| {
            tau * nuclear_norm_via_gram(x) + 0.5 * (x - &a).norm_squared()
        };

        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let mut x = a.clone();
        let mut best = objective(&x);
        let mut radius = 0.5;
        while radius > 1e-8 {
            let mut improved = true;
            while improved {
                improved = false;
                for _ in 0..400 {
                    let dir = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
                    let trial = &x + dir * (radius / 3.0);
                    let val = objective(&trial);
                    if val < best {
                        best = val;
                        x = trial;
                        improved = true;
                    }
                }
            }
            radius *= 0.7;
        }

        let prox = svt_prox(&a, tau).unwrap();
        let prox_obj = objective(&prox);
        assert!(
            prox_obj <= best + 1e-9,
            "prox objective {prox_obj} vs search {best}"
        );
        // the objective is 1-strongly convex: if the prox output really is
        // the minimizer, any other point must exceed it by half the squared
        // distance, and the search value must close in on it
        assert!(
            best + 1e-9 >= prox_obj + 0.5 * (&x - &prox).norm_squared(),
            "strong-convexity gap violated"
        );
        assert!(best - prox_obj <= 1e-5, "value gap {}", best - prox_obj);
        assert!((prox - x).norm() < 1e-2);
    }

    #[test]
    fn large_penalty_returns_zero_matrix() {
        let y_dense = random_matrix(5, 5, 10);
        let y = mask_apply(&y_dense, &full_omega(5, 5)).unwrap();
        let w = WeightModel::uniform(y.omega());
        // sigma_1 of the gradient at zero bounds the spectral scale
        let lambda = 100.0 * y_dense.norm();
        let report = solve_penalized(&y, &w, lambda, &SolverConfig::default()).unwrap();
        assert_eq!(report.solution, DMatrix::zeros(5, 5));
        assert!(report.converged);
        assert_eq!(report.nuclear_norm, 0.0);
    }

    #[test]
    fn tiny_penalty_approximates_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(2, 6, |_, _| rng.random_range(-1.0..1.0));
        let m = &u * &v;
        let y = mask_apply(&m, &full_omega(6, 6)).unwrap();
        let w = WeightModel::uniform(y.omega());
        let report = solve_penalized(&y, &w, 1e-8, &SolverConfig::default()).unwrap();
        assert!((report.solution - &m).norm() <= 1e-3 * m.norm());
    }

    #[test]
    fn objective_history_is_nonincreasing() {
        let y_dense = random_matrix(10, 10, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut omega = full_omega(10, 10);
        omega.shuffle(&mut rng);
        omega.truncate(60);
        let y = mask_apply(&y_dense, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());
        let report = solve_penalized(&y, &w, 0.3, &SolverConfig::default()).unwrap();
        for pair in report.objective_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * (1.0 + pair[0].abs()));
        }
    }

    #[test]
    fn zero_matrix_returned_when_feasible() {
        let y_dense = random_matrix(4, 4, 14);
        let y = mask_apply(&y_dense, &full_omega(4, 4)).unwrap();
        let w = WeightModel::uniform(y.omega());
        let loose = 10.0 * y_dense.norm();
        let report = solve_nuwec(&y, &w, &SolverConfig::with_delta(loose)).unwrap();
        assert_eq!(report.solution, DMatrix::zeros(4, 4));
        assert!(report.converged);
    }

    #[test]
    fn negative_delta_is_rejected() {
        let y = mask_apply(&random_matrix(3, 3, 15), &full_omega(3, 3)).unwrap();
        let w = WeightModel::uniform(y.omega());
        assert!(matches!(
            solve_nuwec(&y, &w, &SolverConfig::with_delta(-1.0)),
            Err(Error::NegativeDelta(_))
        ));
    }

    #[test]
    fn empty_observations_are_rejected() {
        let y = mask_apply(&DMatrix::zeros(3, 3), &[]).unwrap();
        let w = WeightModel::uniform(&[]);
        assert!(matches!(
            solve_nuwec(&y, &w, &SolverConfig::with_delta(1.0)),
            Err(Error::EmptyObservations)
        ));
    }

    #[test]
    fn rank_one_completion_recovers_missing_entry() {
        // Y = [[1,1],[1,?]] with (1,1) unobserved: the minimal-nuclear-norm
        // completion is the rank-one all-ones matrix
        let dense = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        let omega = vec![(0, 0), (0, 1), (1, 0)];
        let y = mask_apply(&dense, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());
        let report = solve_nuwec(&y, &w, &SolverConfig::with_delta(1e-6)).unwrap();

        // 1-D brute force over the missing entry at step 1e-3
        let mut best_v = f64::NAN;
        let mut best_norm = f64::INFINITY;
        let mut v = -3.0;
        while v <= 3.0 {
            let candidate = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, v]);
            let n = nuclear_norm_via_gram(&candidate);
            if n < best_norm {
                best_norm = n;
                best_v = v;
            }
            v += 1e-3;
        }
        assert_relative_eq!(best_v, 1.0, epsilon = 2e-3);
        assert_relative_eq!(report.solution[(1, 1)], best_v, epsilon = 1e-2);
        assert_relative_eq!(report.nuclear_norm, best_norm, epsilon = 1e-2);
    }

    #[test]
    fn uniform_weight_paths_are_bit_identical() {
        // a realized slope-0 model and the uniform constructor drive the
        // exact same code path
        let dense = random_matrix(6, 6, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut omega = full_omega(6, 6);
        omega.shuffle(&mut rng);
        omega.truncate(27);
        omega.sort_unstable();
        let y = mask_apply(&dense, &omega).unwrap();

        let qualities =
            crate::weights::QualityGrid::new(omega.clone(), vec![20.0; omega.len()]).unwrap();
        let realized = crate::weights::realize_weights(0.0, 1.0, &qualities).unwrap();
        let uniform = WeightModel::uniform(&omega);

        let cfg = SolverConfig::with_delta(0.4);
        let a = solve_nuwec(&y, &realized, &cfg).unwrap();
        let b = solve_nuwec(&y, &uniform, &cfg).unwrap();
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.final_residual, b.final_residual);
        assert_eq!(a.penalty_lambda, b.penalty_lambda);
    }

    #[test]
    fn residual_is_nondecreasing_in_lambda() {
        let dense = random_matrix(8, 8, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut omega = full_omega(8, 8);
        omega.shuffle(&mut rng);
        omega.truncate(40);
        let y = mask_apply(&dense, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());

        let mut prev = -1.0;
        for lambda in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
            let report = solve_penalized(&y, &w, lambda, &SolverConfig::default()).unwrap();
            assert!(
                report.final_residual >= prev - 1e-7,
                "residual decreased from {prev} at lambda {lambda}"
            );
            prev = report.final_residual;
        }
    }

    #[test]
    fn converged_solves_respect_the_radius() {
        let dense = random_matrix(8, 8, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut omega = full_omega(8, 8);
        omega.shuffle(&mut rng);
        omega.truncate(48);
        let y = mask_apply(&dense, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());
        let cfg = SolverConfig::with_delta(0.7);
        let report = solve_nuwec(&y, &w, &cfg).unwrap();
        assert!(report.converged);
        assert!(report.final_residual <= cfg.delta * (1.0 + cfg.constraint_tol));
    }

    #[test]
    fn iteration_caps_surface_as_non_convergence() {
        let dense = random_matrix(8, 8, 22);
        let y = mask_apply(&dense, &full_omega(8, 8)).unwrap();
        let w = WeightModel::uniform(y.omega());
        let cfg = SolverConfig {
            delta: 1e-9,
            max_inner_iters: 2,
            max_bisect_iters: 2,
            ..SolverConfig::default()
        };
        let report = solve_nuwec(&y, &w, &cfg).unwrap();
        assert!(!report.converged);
        assert!(report.solution.nrows() == 8);
    }

    #[test]
    fn zero_radius_interpolates_exactly() {
        let dense = random_matrix(6, 6, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut omega = full_omega(6, 6);
        omega.shuffle(&mut rng);
        omega.truncate(24);
        let y = mask_apply(&dense, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());
        let report = solve_nuwec(&y, &w, &SolverConfig::with_delta(0.0)).unwrap();
        assert_eq!(report.final_residual, 0.0);
        for &(i, j) in y.omega() {
            assert_eq!(report.solution[(i, j)], y.get(i, j));
        }
    }

    #[test]
    fn subspace_thresholding_matches_full_decomposition() {
        // feed the engine a slowly evolving sequence of low-rank-plus-sparse
        // iterates, as the solver does, and compare every output against the
        // one-shot full path
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (m, n) = (30, 34);
        let u = DMatrix::from_fn(m, 3, |_, _| rng.random_range(-1.0..1.0));
        let v = DMatrix::from_fn(3, n, |_, _| rng.random_range(-1.0..1.0));
        let mut a = &u * &v * 3.0;

        let mut engine = SvtEngine::new();
        for step in 0..120 {
            // sparse perturbation, a few entries per step
            for _ in 0..6 {
                let i = rng.random_range(0..m);
                let j = rng.random_range(0..n);
                a[(i, j)] += rng.random_range(-0.3..0.3);
            }
            let tau = 0.8 + 0.4 * ((step % 7) as f64 / 7.0);
            let (fast, fast_nuc) = engine.svt(&a, tau).unwrap();
            let (full, full_nuc) = svt_prox_with_norm(&a, tau).unwrap();
            let gap = (&fast - &full).norm();
            assert!(
                gap <= 1e-7 * (1.0 + full.norm()),
                "step {step}: gap {gap}"
            );
            assert!(
                (fast_nuc - full_nuc).abs() <= 1e-7 * (1.0 + full_nuc),
                "step {step}: nuclear {fast_nuc} vs {full_nuc}"
            );
        }
    }

    #[test]
    fn exact_recovery_of_sign_matrices_at_half_sampling() {
        // noiseless rank-2 ±1 matrix, half the entries observed
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let l = 40;
        let h1: Vec<f64> = (0..l).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let h2: Vec<f64> = (0..l).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let m = DMatrix::from_fn(40, l, |i, j| if i % 2 == 0 { h1[j] } else { h2[j] });

        let mut omega = full_omega(40, l);
        omega.shuffle(&mut rng);
        omega.truncate(800);
        let y = mask_apply(&m, &omega).unwrap();
        let w = WeightModel::uniform(y.omega());
        let report = solve_nuwec(&y, &w, &SolverConfig::with_delta(1e-6)).unwrap();
        let rel = (&report.solution - &m).norm() / m.norm();
        assert!(rel < 1e-2, "relative error {rel}");
    }
}
