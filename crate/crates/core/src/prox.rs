//! Proximal maps used by the primal-dual iteration.
//!
//! The dual prox works in the scaled variable `eta = lambda * xi_bar`, for
//! which the conjugate of `lambda * phi(x, |.|)` is `lambda * phi*(x, |eta| / lambda)`.
//! It is radially symmetric, so each pixel reduces to a scalar problem in
//! `r = |eta|` that is either a projection or a monotone root find.

use crate::calculus::ScalarImage;
use crate::error::{Error, Result};
use crate::phi::{dual_exponent, LocalPhi};

/// Tolerances for the scalar root finder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-12,
            max_iters: 50,
        }
    }
}

/// Result of a bracketed scalar solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootReport {
    pub root: f64,
    pub residual: f64,
    pub newton_steps: usize,
    pub bisection_fallback: bool,
}

/// Root of a nondecreasing `g` on `[lo, hi]` with `g(lo) <= 0 <= g(hi)`.
///
/// Newton steps are taken from `start` and replaced by bisection whenever
/// they leave the current bracket. If the residual is not below
/// `tol * scale` after `max_iters` steps, plain bisection runs until the
/// bracket collapses.
pub fn monotone_root(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    scale: f64,
    settings: NewtonSettings,
) -> RootReport {
    let target = settings.tol * scale;
    let mut r = start.clamp(lo, hi);
    let mut steps = 0;
    while steps < settings.max_iters {
        let (val, slope) = g(r);
        if val.abs() <= target {
            return RootReport {
                root: r,
                residual: val,
                newton_steps: steps,
                bisection_fallback: false,
            };
        }
        if val < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let newton = r - val / slope;
        r = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        steps += 1;
    }
    // Fallback: bisection to the end of the bracket.
    let mut best = r;
    let mut best_val = g(r).0;
    for _ in 0..200 {
        if best_val.abs() <= target || hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let val = g(mid).0;
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if val.abs() < best_val.abs() {
            best = mid;
            best_val = val;
        }
    }
    RootReport {
        root: best,
        residual: best_val,
        newton_steps: steps,
        bisection_fallback: true,
    }
}

/// Minimiser over `r >= 0` of `(r - rho)^2 / (2 sigma) + lambda phi*(r / lambda)`.
pub fn prox_dual_radius(
    phi: LocalPhi,
    rho: f64,
    sigma: f64,
    lambda: f64,
    settings: NewtonSettings,
) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    if let Some(radius) = phi.conjugate_domain_radius() {
        return rho.min(lambda * radius);
    }
    match phi {
        LocalPhi::Power { p } => {
            // r + sigma (r / lambda)^(p' - 1) = rho
            let expo = dual_exponent(p) - 1.0;
            let g = |r: f64| {
                let ratio = r / lambda;
                let val = r + sigma * ratio.powf(expo) - rho;
                let slope = 1.0 + sigma * expo * ratio.powf(expo - 1.0) / lambda;
                (val, slope)
            };
            monotone_root(g, 0.0, rho, rho, rho, settings).root
        }
        LocalPhi::DoublePhase { a, q } => {
            if rho <= lambda {
                return rho;
            }
            // r + sigma a^(1 - q') (r / lambda - 1)^(q' - 1) = rho on [lambda, rho]
            let qq = dual_exponent(q);
            let coeff = sigma * a.powf(1.0 - qq);
            let expo = qq - 1.0;
            let g = |r: f64| {
                let excess = (r / lambda - 1.0).max(0.0);
                let val = r + coeff * excess.powf(expo) - rho;
                let slope = 1.0 + coeff * expo * excess.powf(expo - 1.0) / lambda;
                (val, slope)
            };
            monotone_root(g, lambda, rho, rho, rho, settings).root
        }
        LocalPhi::Linear { .. } => unreachable!("linear integrands have bounded conjugate domain"),
    }
}

/// Resolvent of `sigma * (lambda phi(x, |.|))*` applied to one 2-vector.
pub fn prox_dual(
    phi: LocalPhi,
    z: [f64; 2],
    sigma: f64,
    lambda: f64,
    settings: NewtonSettings,
) -> Result<[f64; 2]> {
    if !(sigma > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prox_dual needs sigma, lambda > 0, got sigma={sigma}, lambda={lambda}"
        )));
    }
    Ok(prox_dual_unchecked(phi, z, sigma, lambda, settings))
}

#[inline]
pub(crate) fn prox_dual_unchecked(
    phi: LocalPhi,
    z: [f64; 2],
    sigma: f64,
    lambda: f64,
    settings: NewtonSettings,
) -> [f64; 2] {
    let rho = z[0].hypot(z[1]);
    if rho == 0.0 {
        return [0.0, 0.0];
    }
    let r = prox_dual_radius(phi, rho, sigma, lambda, settings);
    if r == rho {
        return z;
    }
    let scale = r / rho;
    [z[0] * scale, z[1] * scale]
}

/// Resolvent of `tau * |. - f|^2 / 2`: `(u_bar + tau f) / (1 + tau)`.
pub fn prox_primal(u_bar: &ScalarImage, f: &ScalarImage, tau: f64) -> Result<ScalarImage> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    u_bar.grid().ensure_same(&f.grid(), "prox_primal")?;
    let inv = 1.0 / (1.0 + tau);
    Ok(u_bar.zip_map(f, |u, f| (u + tau * f) * inv))
}
