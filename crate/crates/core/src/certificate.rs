//! Optimality certificates for the discrete denoising problem
//!
//! ```text
//! min_u  lambda * E_phi(u) + |u - f|^2 / 2,     E_phi(u) = sum phi(x, |grad u|) h^2.
//! ```
//!
//! A candidate pair `(u, xi)` is optimal iff `div xi = w := (f - u) / lambda`,
//! `xi` has zero normal trace, and with `xi_bar = -xi` Young's inequality
//! `xi_bar . grad u <= phi(x, |grad u|) + phi*(x, |xi_bar|)` is an equality at
//! every pixel.
//!
//! The dual objective is
//!
//! ```text
//! D(xi) = |f|^2 / 2 - |f - lambda div xi|^2 / 2 - lambda sum phi*(x, |xi|) h^2
//! ```
//!
//! and for zero-trace fields the gap splits exactly as
//!
//! ```text
//! P(u) - D(xi) = sum_x young(x) + lambda^2 |div xi - w|^2 / 2
//! ```
//!
//! where `young(x) = lambda h^2 (phi(x, |grad u|) + phi*(x, |xi_bar|) - xi_bar . grad u) >= 0`.
//! The report exposes the total gap, the per-pixel map and the fidelity
//! term so each form of the optimality condition can be read off.

use serde::{Serialize, Serializer};

use crate::calculus::{divergence, gradient, Grid, ScalarImage, VectorField};
use crate::error::{Error, Result};
use crate::phi::{ExtReal, LocalPhi, PhiField};

/// Relative slack admitted when `|xi|` sits on the boundary of a bounded
/// conjugate domain; covers the rounding of the projection.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// `phi*(x, s)` treating `s <= radius * (1 + DOMAIN_SLACK)` as inside a
/// bounded domain.
#[inline]
pub fn conjugate_with_slack(phi: LocalPhi, s: f64) -> ExtReal {
    match phi.conjugate_domain_radius() {
        Some(radius) if s <= radius * (1.0 + DOMAIN_SLACK) => ExtReal::Finite(0.0),
        _ => phi.conjugate(s),
    }
}

pub(crate) fn serialize_extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Primal and dual objective values of a candidate pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualityGap {
    pub primal: f64,
    /// `-inf` when `xi` leaves the domain of the conjugate somewhere.
    #[serde(serialize_with = "serialize_extended")]
    pub dual: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub gap: f64,
    /// Pixels where `phi*(x, |xi|)` is infinite.
    pub infeasible_pixels: usize,
}

impl DualityGap {
    /// Gap relative to the larger objective magnitude.
    pub fn relative(&self) -> f64 {
        relative_gap(self.gap, self.primal, self.dual)
    }
}

pub(crate) fn relative_gap(gap: f64, primal: f64, dual: f64) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    let scale = primal
        .abs()
        .max(if dual.is_finite() { dual.abs() } else { 0.0 });
    gap / scale.max(f64::MIN_POSITIVE)
}

fn ensure_grids(
    u: &ScalarImage,
    xi: &VectorField,
    f: &ScalarImage,
    field: &PhiField,
) -> Result<Grid> {
    let g = u.grid();
    g.ensure_same(&xi.grid(), "dual field")?;
    g.ensure_same(&f.grid(), "datum")?;
    g.ensure_same(&field.grid(), "integrand")?;
    Ok(g)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

/// `lambda sum phi*(x, |xi|) h^2` and the number of infeasible pixels.
fn conjugate_total(xi: &VectorField, field: &PhiField) -> (f64, usize) {
    let mut sum = 0.0;
    let mut infeasible = 0;
    for i in 0..xi.grid().len() {
        match conjugate_with_slack(field.local(i), xi.magnitude(i)) {
            ExtReal::Finite(v) => sum += v,
            ExtReal::Infinite => infeasible += 1,
        }
    }
    (sum * xi.grid().cell_area(), infeasible)
}

/// Primal objective `lambda E_phi(u) + |u - f|^2 / 2`.
pub fn primal_energy(
    u: &ScalarImage,
    f: &ScalarImage,
    field: &PhiField,
    lambda: f64,
) -> Result<f64> {
    u.grid().ensure_same(&f.grid(), "datum")?;
    let reg = field.phi_total(&gradient(u))?;
    let diff = u.zip_map(f, |a, b| a - b);
    Ok(lambda * reg + 0.5 * diff.norm_sq())
}

/// Primal objective, dual objective and their difference for `(u, xi)`.
pub fn duality_gap(
    u: &ScalarImage,
    xi: &VectorField,
    f: &ScalarImage,
    field: &PhiField,
    lambda: f64,
) -> Result<DualityGap> {
    ensure_grids(u, xi, f, field)?;
    check_lambda(lambda)?;
    Ok(duality_gap_with_div(
        u,
        xi,
        &divergence(xi),
        f,
        field,
        lambda,
    ))
}

pub(crate) fn duality_gap_with_div(
    u: &ScalarImage,
    xi: &VectorField,
    div_xi: &ScalarImage,
    f: &ScalarImage,
    field: &PhiField,
    lambda: f64,
) -> DualityGap {
    let g = u.grid();
    let area = g.cell_area();
    let grad_u = gradient(u);
    let mut reg = 0.0;
    let mut fid = 0.0;
    // |f|^2 / 2 - |f - lambda div xi|^2 / 2 expanded, so that the dual value
    // does not lose precision to cancellation when div xi is small.
    let mut f_div = 0.0;
    let mut div_sq = 0.0;
    for i in 0..g.len() {
        reg += field.local(i).eval(grad_u.magnitude(i));
        let fi = f.data()[i];
        fid += (u.data()[i] - fi).powi(2);
        let d = div_xi.data()[i];
        f_div += fi * d;
        div_sq += d * d;
    }
    let primal = lambda * reg * area + 0.5 * fid * area;
    let (conj, infeasible) = conjugate_total(xi, field);
    if infeasible > 0 {
        return DualityGap {
            primal,
            dual: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            infeasible_pixels: infeasible,
        };
    }
    let dual = (lambda * f_div - 0.5 * lambda * lambda * div_sq) * area - lambda * conj;
    DualityGap {
        primal,
        dual,
        gap: primal - dual,
        infeasible_pixels: 0,
    }
}

/// Per-pixel defect in Young's inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct YoungResidualMap {
    grid: Grid,
    values: Vec<f64>,
    infinite: usize,
}

impl YoungResidualMap {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Entries `lambda h^2 (phi + phi* - xi_bar . grad u)`; `+inf` where the
    /// conjugate is infinite.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn infinite_count(&self) -> usize {
        self.infinite
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// The map as an image, or `None` if any entry is infinite.
    pub fn to_image(&self) -> Option<ScalarImage> {
        ScalarImage::from_vec(self.grid, self.values.clone()).ok()
    }
}

/// Residual map `lambda h^2 (phi(x, |grad u|) + phi*(x, |xi_bar|) - xi_bar . grad u)`.
///
/// Written in the scaled variable `eta = lambda xi_bar` this is
/// `h^2 (lambda phi(x, |grad u|) + lambda phi*(x, |eta| / lambda) - eta . grad u)`.
pub fn young_equality_map(
    u: &ScalarImage,
    xi_bar: &VectorField,
    field: &PhiField,
    lambda: f64,
) -> Result<YoungResidualMap> {
    let g = u.grid();
    g.ensure_same(&xi_bar.grid(), "dual field")?;
    g.ensure_same(&field.grid(), "integrand")?;
    check_lambda(lambda)?;
    let grad_u = gradient(u);
    let scale = lambda * g.cell_area();
    let mut infinite = 0;
    let values = (0..g.len())
        .map(|i| {
            let phi = field.local(i);
            match conjugate_with_slack(phi, xi_bar.magnitude(i)) {
                ExtReal::Finite(conj) => {
                    let [bx, by] = xi_bar.at(i);
                    let [gx, gy] = grad_u.at(i);
                    scale * (phi.eval(grad_u.magnitude(i)) + conj - (bx * gx + by * gy))
                }
                ExtReal::Infinite => {
                    infinite += 1;
                    f64::INFINITY
                }
            }
        })
        .collect();
    Ok(YoungResidualMap {
        grid: g,
        values,
        infinite,
    })
}

/// Acceptance thresholds for [`certify`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Bound on the relative duality gap.
    pub gap_rel: f64,
    /// Bound on `|div xi - w| / |w|`.
    pub div_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gap_rel: 1e-4,
            div_rel: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Machine-readable optimality certificate for a pair `(u, xi)`.
///
/// `xi` is the field with `div xi = w`; `xi_bar = -xi` is the field that
/// calibrates `grad u` in Young's equality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub height: usize,
    pub width: usize,
    pub h: f64,
    pub lambda: f64,
    /// `|div xi - w| / |w|` with `w = (f - u) / lambda`; absolute when `w = 0`.
    pub div_residual: f64,
    /// Largest outward boundary flux of `xi`.
    pub trace_violation: f64,
    pub primal: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub dual: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub gap_abs: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub gap_rel: f64,
    /// Sum of the per-pixel Young residuals.
    #[serde(serialize_with = "serialize_extended")]
    pub young_residual_total: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub young_residual_max: f64,
    /// Smallest per-pixel Young residual; nonnegative up to rounding.
    #[serde(serialize_with = "serialize_extended")]
    pub young_residual_min: f64,
    /// `lambda^2 |div xi - w|^2 / 2`.
    pub fidelity_residual: f64,
    /// `|young_residual_total + fidelity_residual - gap_abs|`.
    #[serde(serialize_with = "serialize_extended")]
    pub split_defect: f64,
    /// Total pairing `<xi_bar, grad u>`.
    pub pairing_xi_bar: f64,
    /// `|<xi_bar, grad u> + <u, div xi_bar>|`.
    pub gauss_green_defect: f64,
    /// Pixels where `phi*(x, |xi_bar|)` is infinite.
    pub infeasible_pixels: usize,
    pub tolerances: Tolerances,
    pub verdict: Verdict,
    #[serde(skip)]
    pub young_residual_map: YoungResidualMap,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Checks every form of the optimality condition for `(u, xi)`.
pub fn certify(
    u: &ScalarImage,
    xi: &VectorField,
    f: &ScalarImage,
    field: &PhiField,
    lambda: f64,
    tolerances: Tolerances,
) -> Result<CertificateReport> {
    let g = ensure_grids(u, xi, f, field)?;
    check_lambda(lambda)?;

    let div_xi = divergence(xi);
    let w = f.zip_map(u, |fv, uv| (fv - uv) / lambda);
    let defect = div_xi.zip_map(&w, |d, wv| d - wv);
    let w_norm = w.norm();
    let div_residual = if w_norm > 0.0 {
        defect.norm() / w_norm
    } else {
        defect.norm()
    };
    let fidelity_residual = 0.5 * lambda * lambda * defect.norm_sq();

    let gap = duality_gap_with_div(u, xi, &div_xi, f, field, lambda);
    let xi_bar = xi.scale(-1.0);
    let young = young_equality_map(u, &xi_bar, field, lambda)?;
    let young_total = young.total();
    let split_defect = (young_total + fidelity_residual - gap.gap).abs();

    let grad_u = gradient(u);
    let pairing_xi_bar = xi_bar.dot(&grad_u);
    let div_xi_bar = div_xi.map(|v| -v);
    let gauss_green_defect = (pairing_xi_bar + u.dot(&div_xi_bar)).abs();

    let trace_violation = xi.boundary_flux_max();
    let gap_rel = gap.relative();
    let pass = gap.infeasible_pixels == 0
        && div_residual <= tolerances.div_rel
        && trace_violation == 0.0
        && gap_rel <= tolerances.gap_rel;

    Ok(CertificateReport {
        height: g.height,
        width: g.width,
        h: g.h,
        lambda,
        div_residual,
        trace_violation,
        primal: gap.primal,
        dual: gap.dual,
        gap_abs: gap.gap,
        gap_rel,
        young_residual_total: young_total,
        young_residual_max: young.max(),
        young_residual_min: young.min(),
        fidelity_residual,
        split_defect,
        pairing_xi_bar,
        gauss_green_defect,
        infeasible_pixels: gap.infeasible_pixels,
        tolerances,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        young_residual_map: young,
    })
}
