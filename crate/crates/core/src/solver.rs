//! First-order primal-dual solver for
//! `min_u lambda E_phi(u) + |u - f|^2 / 2`.
//!
//! The saddle-point form uses the scaled dual variable `eta`:
//!
//! ```text
//! min_u max_eta  <grad u, eta> - sum lambda phi*(x, |eta| / lambda) h^2 + |u - f|^2 / 2
//! ```
//!
//! and iterates
//!
//! ```text
//! eta   <- prox_dual(eta + sigma grad u_bar)
//! u     <- (u + tau div eta + tau f) / (1 + tau)
//! u_bar <- u + theta (u - u_prev)
//! ```
//!
//! Every `check_every` iterations the certified pair `u_c = f + div eta`,
//! `xi = -eta / lambda` is formed. It satisfies `div xi = (f - u_c) / lambda`
//! exactly, so its duality gap is the sum of the per-pixel Young residuals.
//! The solver stops once that gap is below `gap_tol` relative and returns the
//! certified pair.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::calculus::{divergence, gradient, Grid, ScalarImage, VectorField};
use crate::certificate::{duality_gap_with_div, DualityGap};
use crate::error::{Error, Result};
use crate::phi::PhiField;
use crate::prox::{prox_dual_unchecked, NewtonSettings};

/// Parameters of [`solve_rof`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Regularisation weight.
    pub lambda: f64,
    /// Primal step.
    pub tau: f64,
    /// Dual step.
    pub sigma: f64,
    /// Extrapolation weight in `[0, 1]`.
    pub theta: f64,
    pub max_iters: usize,
    /// Relative duality gap at which the iteration stops.
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Iterations between certified gap evaluations.
    pub check_every: usize,
    /// Seed for the power-method start vector.
    pub seed: u64,
}

impl SolverConfig {
    /// Default configuration on `grid`: `tau = sigma = 1 / L` with the bound
    /// `L^2 = 8 / h^2` on the gradient norm, `theta = 1`.
    pub fn new(lambda: f64, grid: Grid) -> Self {
        let step = 1.0 / grid.gradient_norm_bound_sq().sqrt();
        SolverConfig {
            lambda,
            tau: step,
            sigma: step,
            theta: 1.0,
            max_iters: 20_000,
            gap_tol: 1e-4,
            newton_tol: 1e-12,
            newton_max: 50,
            check_every: 10,
            seed: 0,
        }
    }

    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            tol: self.newton_tol,
            max_iters: self.newton_max,
        }
    }

    pub fn validate(&self, grid: Grid) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.sigma > 0.0) {
            return bad(format!(
                "step sizes must be positive, got tau={} sigma={}",
                self.tau, self.sigma
            ));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        let product = self.tau * self.sigma * grid.gradient_norm_bound_sq();
        if product > 1.0 + 1e-12 {
            return bad(format!(
                "tau * sigma * L^2 = {product} exceeds 1 (L^2 = 8 / h^2)"
            ));
        }
        if !(self.gap_tol > 0.0) {
            return bad(format!("gap_tol must be positive, got {}", self.gap_tol));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 {
            return bad("newton_tol must be positive and newton_max nonzero".into());
        }
        if self.check_every == 0 {
            return bad("check_every must be at least 1".into());
        }
        Ok(())
    }
}

/// One row of the convergence log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Output of [`solve_rof`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    /// Primal minimiser.
    pub u: ScalarImage,
    /// Dual field with `div xi = (f - u) / lambda` and zero normal trace.
    pub xi: VectorField,
    pub iterations: usize,
    pub primal_energy: f64,
    pub dual_energy: f64,
    pub gap: f64,
    pub gap_rel: f64,
    pub converged: bool,
    /// Pixels on which a dual iterate had to be pulled back into a bounded
    /// conjugate domain by more than `1e-9` relative.
    pub feasibility_violations: usize,
    pub history: Vec<IterRecord>,
}

/// View of the iteration handed to an observer after each dual update.
pub struct IterationView<'a> {
    pub iteration: usize,
    /// Scaled dual iterate `eta` (`|eta| <= lambda` on linear-growth pixels).
    pub dual: &'a VectorField,
    pub primal: &'a ScalarImage,
}

/// Solves the denoising problem for datum `f`.
pub fn solve_rof(f: &ScalarImage, field: &PhiField, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_rof_observed(f, field, cfg, |_| {})
}

/// [`solve_rof`] with a callback invoked after every dual update.
pub fn solve_rof_observed(
    f: &ScalarImage,
    field: &PhiField,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<SolveResult> {
    let grid = f.grid();
    grid.ensure_same(&field.grid(), "integrand")?;
    cfg.validate(grid)?;

    let n = grid.len();
    let width = grid.width;
    let inv_h = 1.0 / grid.h;
    let lambda = cfg.lambda;
    let (tau, sigma, theta) = (cfg.tau, cfg.sigma, cfg.theta);
    let newton = cfg.newton();
    let inv_one_tau = 1.0 / (1.0 + tau);

    let mut eta = VectorField::zeros(grid);
    let mut u = f.clone();
    let mut u_bar = f.clone();
    let mut u_prev = vec![0.0; n];
    let mut violations = vec![false; n];
    let mut history = Vec::new();

    let mut best = certified_pair(f, &eta, field, lambda);
    history.push(record(0, &best.2));
    if best.2.relative() <= cfg.gap_tol {
        return Ok(finish(best, 0, true, &violations, history));
    }

    for iter in 1..=cfg.max_iters {
        {
            let (ex, ey) = eta.components_mut();
            let ub = u_bar.data();
            for r in 0..grid.height {
                for c in 0..width {
                    let i = r * width + c;
                    let gx = if c + 1 < width {
                        (ub[i + 1] - ub[i]) * inv_h
                    } else {
                        0.0
                    };
                    let gy = if r + 1 < grid.height {
                        (ub[i + width] - ub[i]) * inv_h
                    } else {
                        0.0
                    };
                    let z = [ex[i] + sigma * gx, ey[i] + sigma * gy];
                    let phi = field.local(i);
                    let out = prox_dual_unchecked(phi, z, sigma, lambda, newton);
                    if let Some(radius) = phi.conjugate_domain_radius() {
                        if out[0].hypot(out[1]) > lambda * radius * (1.0 + 1e-9) {
                            violations[i] = true;
                        }
                    }
                    ex[i] = out[0];
                    ey[i] = out[1];
                }
            }
        }
        observer(&IterationView {
            iteration: iter,
            dual: &eta,
            primal: &u,
        });

        u_prev.copy_from_slice(u.data());
        {
            let (ex, ey) = (eta.x(), eta.y());
            let fd = f.data();
            let ud = u.data_mut();
            for r in 0..grid.height {
                for c in 0..width {
                    let i = r * width + c;
                    let west = if c > 0 { ex[i - 1] } else { 0.0 };
                    let north = if r > 0 { ey[i - width] } else { 0.0 };
                    let div = (ex[i] - west + ey[i] - north) * inv_h;
                    ud[i] = (ud[i] + tau * div + tau * fd[i]) * inv_one_tau;
                }
            }
        }
        {
            let ud = u.data();
            let ubd = u_bar.data_mut();
            for i in 0..n {
                ubd[i] = ud[i] + theta * (ud[i] - u_prev[i]);
            }
        }
        if let Some(i) = u.data().iter().position(|v| !v.is_finite()) {
            let (row, col) = grid.coords(i);
            return Err(Error::NonFinite {
                iterate: "primal",
                row,
                col,
                iteration: iter,
            });
        }

        if iter % cfg.check_every == 0 || iter == cfg.max_iters {
            if let Some(i) = (0..n).find(|&i| !eta.magnitude(i).is_finite()) {
                let (row, col) = grid.coords(i);
                return Err(Error::NonFinite {
                    iterate: "dual",
                    row,
                    col,
                    iteration: iter,
                });
            }
            let pair = certified_pair(f, &eta, field, lambda);
            history.push(record(iter, &pair.2));
            let converged = pair.2.relative() <= cfg.gap_tol;
            best = pair;
            if converged {
                return Ok(finish(best, iter, true, &violations, history));
            }
        }
    }
    Ok(finish(best, cfg.max_iters, false, &violations, history))
}

fn record(iter: usize, gap: &DualityGap) -> IterRecord {
    IterRecord {
        iter,
        primal: gap.primal,
        dual: gap.dual,
        gap: gap.gap,
    }
}

/// `(u_c, xi, gap)` with `u_c = f + div eta`, `xi = -eta / lambda`.
fn certified_pair(
    f: &ScalarImage,
    eta: &VectorField,
    field: &PhiField,
    lambda: f64,
) -> (ScalarImage, VectorField, DualityGap) {
    let div_eta = divergence(eta);
    let u = f.zip_map(&div_eta, |a, b| a + b);
    let xi = eta.scale(-1.0 / lambda);
    let div_xi = divergence(&xi);
    let gap = duality_gap_with_div(&u, &xi, &div_xi, f, field, lambda);
    (u, xi, gap)
}

fn finish(
    (u, xi, gap): (ScalarImage, VectorField, DualityGap),
    iterations: usize,
    converged: bool,
    violations: &[bool],
    history: Vec<IterRecord>,
) -> SolveResult {
    debug_assert!(xi.has_zero_normal_trace());
    SolveResult {
        u,
        xi,
        iterations,
        primal_energy: gap.primal,
        dual_energy: gap.dual,
        gap: gap.gap,
        gap_rel: gap.relative(),
        converged,
        feasibility_violations: violations.iter().filter(|&&v| v).count(),
        history,
    }
}

/// Power-method estimate of the operator norm of [`gradient`], started from
/// `init`.
pub fn power_method_norm(init: &ScalarImage, iterations: usize) -> Result<f64> {
    let norm0 = init.norm();
    if norm0 == 0.0 {
        return Err(Error::InvalidParameter(
            "power method needs a nonzero start vector".into(),
        ));
    }
    let mut v = init.map(|x| x / norm0);
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let grad = gradient(&v);
        estimate = grad.dot(&grad).sqrt();
        // v <- grad^T grad v = -div grad v
        let next = divergence(&grad).map(|x| -x);
        let norm = next.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = next.map(|x| x / norm);
    }
    Ok(estimate)
}

/// [`power_method_norm`] from a seeded random start vector.
pub fn estimate_gradient_norm(grid: Grid, seed: u64, iterations: usize) -> f64 {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let init = ScalarImage::from_fn(grid, |_, _| {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    power_method_norm(&init, iterations).unwrap_or(0.0)
}
