//! Musielak-Orlicz integrands `phi(x, t)` and their conjugates.
//!
//! Four closed-form families are supported:
//!
//! | family              | `phi(x, t)`              | `phi*(x, s)`                                   |
//! |---------------------|--------------------------|------------------------------------------------|
//! | classical TV        | `t`                      | `0` on `[0, 1]`, `+inf` beyond                 |
//! | power weighted      | `w(x) t`                 | `0` on `[0, w(x)]`, `+inf` beyond              |
//! | variable exponent   | `t^p(x) / p(x)`          | indicator of `[0, 1]` if `p = 1`, else `s^p' / p'` |
//! | double phase        | `t + a(x) t^q / q`       | indicator of `[0, 1]` if `a = 0`, else `a^(1-q') (s-1)_+^q' / q'` |
//!
//! Conjugates may be infinite. That outcome is carried by [`ExtReal`] and
//! never reported as an error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calculus::{Grid, ScalarImage, VectorField};
use crate::error::{Error, Result};

pub mod conditions;

pub use conditions::{
    check_a0, check_almost_monotone, check_double_phase_holder, check_log_holder,
    check_strong_holder_a, check_strong_holder_p, ConditionConfig, ConditionKind, ConditionReport,
    Direction,
};

/// A value in `[0, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    #[inline]
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    #[inline]
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// The value as an `f64`, mapping the infinite case to `f64::INFINITY`.
    #[inline]
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

/// The integrand at a single pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalPhi {
    /// `w t`; classical TV is `w = 1`.
    Linear { weight: f64 },
    /// `t^p / p` with `p >= 1`.
    Power { p: f64 },
    /// `t + a t^q / q` with `a >= 0`, `q > 1`.
    DoublePhase { a: f64, q: f64 },
}

/// Hoelder conjugate exponent `r / (r - 1)`.
#[inline]
pub fn dual_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

impl LocalPhi {
    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        match self {
            LocalPhi::Linear { weight } => weight * t,
            LocalPhi::Power { p } => {
                if p == 1.0 {
                    t
                } else {
                    t.powf(p) / p
                }
            }
            LocalPhi::DoublePhase { a, q } => t + a * t.powf(q) / q,
        }
    }

    /// Right derivative in `t`.
    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            LocalPhi::Linear { weight } => weight,
            LocalPhi::Power { p } => {
                if p == 1.0 {
                    1.0
                } else {
                    t.powf(p - 1.0)
                }
            }
            LocalPhi::DoublePhase { a, q } => 1.0 + a * t.powf(q - 1.0),
        }
    }

    #[inline]
    pub fn conjugate(self, s: f64) -> ExtReal {
        match self.conjugate_domain_radius() {
            Some(radius) => {
                if s <= radius {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::Infinite
                }
            }
            None => ExtReal::Finite(self.smooth_conjugate(s)),
        }
    }

    /// Closed form on the branches where the conjugate is finite everywhere.
    #[inline]
    fn smooth_conjugate(self, s: f64) -> f64 {
        match self {
            LocalPhi::Power { p } => {
                let pp = dual_exponent(p);
                s.powf(pp) / pp
            }
            LocalPhi::DoublePhase { a, q } => {
                let qq = dual_exponent(q);
                let excess = (s - 1.0).max(0.0);
                a.powf(1.0 - qq) * excess.powf(qq) / qq
            }
            LocalPhi::Linear { .. } => unreachable!("linear conjugate has bounded domain"),
        }
    }

    /// Radius of the effective domain of `phi*`, when bounded. On that
    /// domain the conjugate vanishes identically.
    #[inline]
    pub fn conjugate_domain_radius(self) -> Option<f64> {
        match self {
            LocalPhi::Linear { weight } => Some(weight),
            LocalPhi::Power { p: 1.0 } => Some(1.0),
            LocalPhi::DoublePhase { a: 0.0, .. } => Some(1.0),
            _ => None,
        }
    }

    /// `lim_{t -> inf} phi(t) / t`.
    #[inline]
    pub fn recession(self) -> ExtReal {
        match self.conjugate_domain_radius() {
            Some(r) => ExtReal::Finite(r),
            None => ExtReal::Infinite,
        }
    }

    /// Whether the integrand grows linearly at this pixel.
    #[inline]
    pub fn has_linear_growth(self) -> bool {
        self.conjugate_domain_radius().is_some()
    }
}

/// Which closed-form family a [`PhiField`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFamily {
    ClassicalTv,
    VariableExponent,
    DoublePhase,
    PowerWeighted,
}

impl PhiFamily {
    pub fn name(self) -> &'static str {
        match self {
            PhiFamily::ClassicalTv => "classical_tv",
            PhiFamily::VariableExponent => "variable_exponent",
            PhiFamily::DoublePhase => "double_phase",
            PhiFamily::PowerWeighted => "power_weighted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classical_tv" | "tv" => Some(PhiFamily::ClassicalTv),
            "variable_exponent" => Some(PhiFamily::VariableExponent),
            "double_phase" => Some(PhiFamily::DoublePhase),
            "power_weighted" => Some(PhiFamily::PowerWeighted),
            _ => None,
        }
    }

    pub const ALL: [PhiFamily; 4] = [
        PhiFamily::ClassicalTv,
        PhiFamily::VariableExponent,
        PhiFamily::DoublePhase,
        PhiFamily::PowerWeighted,
    ];
}

impl fmt::Display for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Params {
    ClassicalTv,
    VariableExponent { p: ScalarImage },
    DoublePhase { a: ScalarImage, q: f64 },
    PowerWeighted { w: ScalarImage },
}

/// A spatially varying integrand on a pixel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiField {
    grid: Grid,
    params: Params,
}

impl PhiField {
    pub fn classical_tv(grid: Grid) -> Self {
        PhiField {
            grid,
            params: Params::ClassicalTv,
        }
    }

    pub fn variable_exponent(p: ScalarImage) -> Result<Self> {
        if let Some(i) = p.data().iter().position(|&v| !(v >= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "exponent field must be >= 1, got {} at {:?}",
                p.data()[i],
                p.grid().coords(i)
            )));
        }
        Ok(PhiField {
            grid: p.grid(),
            params: Params::VariableExponent { p },
        })
    }

    pub fn double_phase(a: ScalarImage, q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "double phase exponent q must be > 1, got {q}"
            )));
        }
        if let Some(i) = a.data().iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight field must be >= 0, got {} at {:?}",
                a.data()[i],
                a.grid().coords(i)
            )));
        }
        Ok(PhiField {
            grid: a.grid(),
            params: Params::DoublePhase { a, q },
        })
    }

    pub fn power_weighted(w: ScalarImage) -> Result<Self> {
        if let Some(i) = w.data().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "linear weight field must be > 0, got {} at {:?}",
                w.data()[i],
                w.grid().coords(i)
            )));
        }
        Ok(PhiField {
            grid: w.grid(),
            params: Params::PowerWeighted { w },
        })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn family(&self) -> PhiFamily {
        match self.params {
            Params::ClassicalTv => PhiFamily::ClassicalTv,
            Params::VariableExponent { .. } => PhiFamily::VariableExponent,
            Params::DoublePhase { .. } => PhiFamily::DoublePhase,
            Params::PowerWeighted { .. } => PhiFamily::PowerWeighted,
        }
    }

    /// Exponent map of the variable exponent family.
    pub fn p_field(&self) -> Option<&ScalarImage> {
        match &self.params {
            Params::VariableExponent { p } => Some(p),
            _ => None,
        }
    }

    /// Weight map of the double phase family.
    pub fn a_field(&self) -> Option<&ScalarImage> {
        match &self.params {
            Params::DoublePhase { a, .. } => Some(a),
            _ => None,
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self.params {
            Params::DoublePhase { q, .. } => Some(q),
            _ => None,
        }
    }

    /// Weight map of the power weighted family.
    pub fn w_field(&self) -> Option<&ScalarImage> {
        match &self.params {
            Params::PowerWeighted { w } => Some(w),
            _ => None,
        }
    }

    /// Same integrand on a grid with a different spacing.
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        if grid.height != self.grid.height || grid.width != self.grid.width {
            return Err(Error::Shape(
                "with_grid cannot change the grid shape".into(),
            ));
        }
        let regrid = |img: &ScalarImage| ScalarImage::from_vec(grid, img.data().to_vec());
        let params = match &self.params {
            Params::ClassicalTv => Params::ClassicalTv,
            Params::VariableExponent { p } => Params::VariableExponent { p: regrid(p)? },
            Params::DoublePhase { a, q } => Params::DoublePhase {
                a: regrid(a)?,
                q: *q,
            },
            Params::PowerWeighted { w } => Params::PowerWeighted { w: regrid(w)? },
        };
        Ok(PhiField { grid, params })
    }

    /// Integrand at a flat pixel index.
    #[inline]
    pub fn local(&self, idx: usize) -> LocalPhi {
        match &self.params {
            Params::ClassicalTv => LocalPhi::Linear { weight: 1.0 },
            Params::VariableExponent { p } => LocalPhi::Power { p: p.data()[idx] },
            Params::DoublePhase { a, q } => LocalPhi::DoublePhase {
                a: a.data()[idx],
                q: *q,
            },
            Params::PowerWeighted { w } => LocalPhi::Linear {
                weight: w.data()[idx],
            },
        }
    }

    pub fn local_at(&self, row: usize, col: usize) -> Result<LocalPhi> {
        Ok(self.local(self.grid.checked_index(row, col)?))
    }

    /// `phi(x, t)` at pixel `(row, col)`.
    pub fn phi_eval(&self, row: usize, col: usize, t: f64) -> Result<f64> {
        check_nonneg("t", t)?;
        Ok(self.local_at(row, col)?.eval(t))
    }

    /// `phi*(x, s)` at pixel `(row, col)`.
    pub fn conjugate_eval(&self, row: usize, col: usize, s: f64) -> Result<ExtReal> {
        check_nonneg("s", s)?;
        Ok(self.local_at(row, col)?.conjugate(s))
    }

    pub fn recession(&self, row: usize, col: usize) -> Result<ExtReal> {
        Ok(self.local_at(row, col)?.recession())
    }

    /// Brute-force conjugate `sup_{t in [0, t_max]} (s t - phi(x, t))` on a
    /// uniform sample grid. Infinite when `s` exceeds the recession value.
    pub fn numeric_legendre(
        &self,
        row: usize,
        col: usize,
        s: f64,
        t_max: f64,
        n_samples: usize,
    ) -> Result<ExtReal> {
        check_nonneg("s", s)?;
        let oracle = LegendreOracle::new(self.local_at(row, col)?, t_max, n_samples)?;
        Ok(oracle.conjugate(s))
    }

    /// Discrete modular `E_phi(v) = sum phi(x, |grad v(x)|) h^2`.
    pub fn phi_total(&self, grad: &VectorField) -> Result<f64> {
        self.grid.ensure_same(&grad.grid(), "phi_total")?;
        let sum: f64 = (0..self.grid.len())
            .map(|i| self.local(i).eval(grad.magnitude(i)))
            .sum();
        Ok(sum * self.grid.cell_area())
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative, got {v}"
        )))
    }
}

/// Sampled `phi` table for repeated brute-force conjugation at one pixel.
#[derive(Clone, Debug)]
pub struct LegendreOracle {
    recession: ExtReal,
    step: f64,
    values: Vec<f64>,
}

impl LegendreOracle {
    pub fn new(phi: LocalPhi, t_max: f64, n_samples: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        if n_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two samples, got {n_samples}"
            )));
        }
        let step = t_max / (n_samples - 1) as f64;
        let values = (0..n_samples).map(|k| phi.eval(k as f64 * step)).collect();
        Ok(LegendreOracle {
            recession: phi.recession(),
            step,
            values,
        })
    }

    pub fn conjugate(&self, s: f64) -> ExtReal {
        if let ExtReal::Finite(r) = self.recession {
            if s > r + 1e-9 {
                return ExtReal::Infinite;
            }
        }
        let best = self
            .values
            .iter()
            .enumerate()
            .fold(f64::NEG_INFINITY, |best, (k, &phi)| {
                best.max(s * (k as f64 * self.step) - phi)
            });
        ExtReal::Finite(best.max(0.0))
    }
}
