//! Discrete calculus on a uniform pixel grid.
//!
//! The gradient uses forward differences and is zero on the last column
//! (x-component) and last row (y-component). The divergence is defined as
//! the exact negative adjoint of the gradient under the grid inner product
//! `<a, b> = h^2 * sum(a * b)`, so the discrete Gauss-Green identity
//!
//! ```text
//! <grad v, xi> + <v, div xi> = 0
//! ```
//!
//! holds to rounding for every field whose outward boundary flux vanishes.
//! The outward flux of a staggered field is stored in the last-column
//! x-entries and last-row y-entries; keeping those at zero is how the zero
//! normal trace condition is represented.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and spacing of a pixel grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub h: f64,
}

impl Grid {
    /// Grid with the default spacing `h = 1 / max(height, width)`.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        let h = 1.0 / height.max(width) as f64;
        Self::with_spacing(height, width, h)
    }

    pub fn with_spacing(height: usize, width: usize, h: f64) -> Result<Self> {
        if height == 0 || width == 0 || height * width < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must hold at least two pixels, got {height}x{width}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive and finite, got {h}"
            )));
        }
        Ok(Grid { height, width, h })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area element `h^2` of one pixel.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn checked_index(&self, row: usize, col: usize) -> Result<usize> {
        if row < self.height && col < self.width {
            Ok(self.index(row, col))
        } else {
            Err(Error::OutOfGrid {
                row,
                col,
                height: self.height,
                width: self.width,
            })
        }
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.width, idx % self.width)
    }

    /// Euclidean distance between two pixel centres in grid length units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        self.h * (dr * dr + dc * dc).sqrt()
    }

    pub(crate) fn ensure_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.height != other.height || self.width != other.width || self.h != other.h {
            return Err(Error::Shape(format!(
                "{what}: {}x{} (h={}) vs {}x{} (h={})",
                self.height, self.width, self.h, other.height, other.width, other.h
            )));
        }
        Ok(())
    }

    /// Upper bound on the squared operator norm of the discrete gradient.
    pub fn gradient_norm_bound_sq(&self) -> f64 {
        8.0 / (self.h * self.h)
    }
}

/// Real-valued function on the pixel grid, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarImage {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarImage {
    pub fn zeros(grid: Grid) -> Self {
        ScalarImage {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarImage {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.height,
                grid.width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = grid.coords(i);
            return Err(Error::InvalidParameter(format!(
                "non-finite image value at ({row}, {col})"
            )));
        }
        Ok(ScalarImage { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                data.push(f(r, c));
            }
        }
        ScalarImage { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.grid.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.grid.index(row, col);
        self.data[i] = value;
    }

    /// Grid inner product `h^2 * sum(a * b)`.
    pub fn dot(&self, other: &ScalarImage) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.grid.cell_area() * dot(&self.data, &other.data)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarImage {
        ScalarImage {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarImage, f: impl Fn(f64, f64) -> f64) -> ScalarImage {
        ScalarImage {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// Two-channel staggered field: gradients and dual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    /// Builds a field from raw components without touching the boundary
    /// flux entries.
    pub fn from_components(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(Error::Shape(format!(
                "vector field components must have {} entries, got {} and {}",
                grid.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(VectorField { grid, x, y })
    }

    /// Builds a field and zeroes its outward flux entries.
    pub fn from_components_zero_trace(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let mut field = Self::from_components(grid, x, y)?;
        field.clear_boundary_flux();
        Ok(field)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.x, &mut self.y)
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 2] {
        [self.x[idx], self.y[idx]]
    }

    #[inline]
    pub fn set_at(&mut self, idx: usize, v: [f64; 2]) {
        self.x[idx] = v[0];
        self.y[idx] = v[1];
    }

    /// Pointwise Euclidean norm of the two components at one index.
    #[inline]
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.x[idx].hypot(self.y[idx])
    }

    pub fn magnitudes(&self) -> ScalarImage {
        ScalarImage {
            grid: self.grid,
            data: (0..self.grid.len()).map(|i| self.magnitude(i)).collect(),
        }
    }

    /// Grid inner product of two fields.
    pub fn dot(&self, other: &VectorField) -> f64 {
        self.grid.cell_area() * (dot(&self.x, &other.x) + dot(&self.y, &other.y))
    }

    pub fn scale(&self, factor: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            x: self.x.iter().map(|v| v * factor).collect(),
            y: self.y.iter().map(|v| v * factor).collect(),
        }
    }

    /// Whether `(row, col, component)` is an outward flux entry.
    #[inline]
    fn is_flux_x(&self, col: usize) -> bool {
        col + 1 == self.grid.width
    }

    #[inline]
    fn is_flux_y(&self, row: usize) -> bool {
        row + 1 == self.grid.height
    }

    /// Largest absolute outward flux entry. Zero means the field has zero
    /// normal trace.
    pub fn boundary_flux_max(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0_f64;
        for r in 0..g.height {
            for c in 0..g.width {
                let i = g.index(r, c);
                if self.is_flux_x(c) {
                    worst = worst.max(self.x[i].abs());
                }
                if self.is_flux_y(r) {
                    worst = worst.max(self.y[i].abs());
                }
            }
        }
        worst
    }

    pub fn has_zero_normal_trace(&self) -> bool {
        self.boundary_flux_max() == 0.0
    }

    pub fn clear_boundary_flux(&mut self) {
        let g = self.grid;
        for r in 0..g.height {
            self.x[g.index(r, g.width - 1)] = 0.0;
        }
        for c in 0..g.width {
            self.y[g.index(g.height - 1, c)] = 0.0;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward-difference gradient with Neumann padding.
pub fn gradient(v: &ScalarImage) -> VectorField {
    let g = v.grid;
    let inv_h = 1.0 / g.h;
    let mut out = VectorField::zeros(g);
    for r in 0..g.height {
        for c in 0..g.width {
            let i = g.index(r, c);
            if c + 1 < g.width {
                out.x[i] = (v.data[i + 1] - v.data[i]) * inv_h;
            }
            if r + 1 < g.height {
                out.y[i] = (v.data[i + g.width] - v.data[i]) * inv_h;
            }
        }
    }
    out
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
///
/// Every stored entry participates, including outward flux entries, so a
/// field with nonzero boundary flux produces a divergence whose sum equals
/// that flux rather than zero.
pub fn divergence(xi: &VectorField) -> ScalarImage {
    let g = xi.grid;
    let inv_h = 1.0 / g.h;
    let mut out = ScalarImage::zeros(g);
    for r in 0..g.height {
        for c in 0..g.width {
            let i = g.index(r, c);
            let west = if c > 0 { xi.x[i - 1] } else { 0.0 };
            let north = if r > 0 { xi.y[i - g.width] } else { 0.0 };
            out.data[i] = (xi.x[i] - west + xi.y[i] - north) * inv_h;
        }
    }
    out
}

/// Clamps every entry to `[-m, m]`.
pub fn truncate(v: &ScalarImage, m: f64) -> Result<ScalarImage> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation level must be positive, got {m}"
        )));
    }
    Ok(v.map(|r| r.clamp(-m, m)))
}

/// Discrete pairing `(xi, Dv)(Omega) = <xi, grad v>`.
pub fn pairing(xi: &VectorField, v: &ScalarImage) -> Result<f64> {
    xi.grid.ensure_same(&v.grid, "pairing")?;
    Ok(xi.dot(&gradient(v)))
}

/// Pairing tested against a weight `psi`, evaluated through the
/// distributional definition `-<psi v, div xi> - <v, xi . grad psi>`.
pub fn pairing_weighted(xi: &VectorField, v: &ScalarImage, psi: &ScalarImage) -> Result<f64> {
    xi.grid.ensure_same(&v.grid, "pairing_weighted")?;
    xi.grid.ensure_same(&psi.grid, "pairing_weighted")?;
    let div = divergence(xi);
    let grad_psi = gradient(psi);
    let g = xi.grid;
    let mut acc = 0.0;
    for i in 0..g.len() {
        let [gx, gy] = grad_psi.at(i);
        acc -= psi.data[i] * v.data[i] * div.data[i];
        acc -= v.data[i] * (xi.x[i] * gx + xi.y[i] * gy);
    }
    Ok(acc * g.cell_area())
}

/// Density form of the weighted pairing: `sum psi~ (xi . grad v) h^2`, where
/// each component of the weight is shifted one cell forward along its own
/// axis. This is what the discrete Leibniz rule
/// `D(psi v)_j = psi_{j+1} Dv_j + v_j Dpsi_j` turns [`pairing_weighted`] into.
pub fn pairing_weighted_density(
    xi: &VectorField,
    v: &ScalarImage,
    psi: &ScalarImage,
) -> Result<f64> {
    xi.grid.ensure_same(&v.grid, "pairing_weighted_density")?;
    xi.grid.ensure_same(&psi.grid, "pairing_weighted_density")?;
    let g = xi.grid;
    let grad_v = gradient(v);
    let mut acc = 0.0;
    for r in 0..g.height {
        for c in 0..g.width {
            let i = g.index(r, c);
            if c + 1 < g.width {
                acc += psi.data[i + 1] * xi.x[i] * grad_v.x[i];
            }
            if r + 1 < g.height {
                acc += psi.data[i + g.width] * xi.y[i] * grad_v.y[i];
            }
        }
    }
    Ok(acc * g.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_field, random_image, TestRng};

    fn grid(h: usize, w: usize, spacing: f64) -> Grid {
        Grid::with_spacing(h, w, spacing).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let v = ScalarImage::constant(grid(4, 5, 0.25), 3.5);
        let g = gradient(&v);
        assert!(g.x().iter().chain(g.y()).all(|&e| e == 0.0));
    }

    #[test]
    fn gradient_of_ramp() {
        let g = grid(3, 3, 1.0);
        let v = ScalarImage::from_fn(g, |_, c| c as f64);
        let d = gradient(&v);
        for r in 0..3 {
            for c in 0..3 {
                let i = g.index(r, c);
                assert_eq!(d.x()[i], if c == 2 { 0.0 } else { 1.0 });
                assert_eq!(d.y()[i], 0.0);
            }
        }
    }

    #[test]
    fn gradient_matches_index_arithmetic() {
        let g = grid(4, 4, 0.5);
        let mut rng = TestRng::new(7);
        let v = random_image(g, &mut rng, 1.0);
        let d = gradient(&v);
        for r in 0..4 {
            for c in 0..4 {
                let ex = if c < 3 {
                    (v.get(r, c + 1) - v.get(r, c)) / 0.5
                } else {
                    0.0
                };
                let ey = if r < 3 {
                    (v.get(r + 1, c) - v.get(r, c)) / 0.5
                } else {
                    0.0
                };
                assert_eq!(d.x()[g.index(r, c)], ex);
                assert_eq!(d.y()[g.index(r, c)], ey);
            }
        }
    }

    #[test]
    fn divergence_of_zero_is_zero() {
        let d = divergence(&VectorField::zeros(grid(3, 4, 1.0)));
        assert!(d.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjointness_on_random_pairs() {
        let g = grid(8, 8, 1.0 / 8.0);
        let mut rng = TestRng::new(11);
        for _ in 0..100 {
            let v = random_image(g, &mut rng, 1.0);
            let xi = random_field(g, &mut rng, 1.0);
            let lhs = gradient(&v).dot(&xi);
            let rhs = v.dot(&divergence(&xi));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs + rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn laplacian_matches_five_point_stencil() {
        let g = grid(6, 7, 0.5);
        let mut rng = TestRng::new(3);
        let v = random_image(g, &mut rng, 1.0);
        let lap = divergence(&gradient(&v));
        for r in 1..5 {
            for c in 1..6 {
                let s = v.get(r - 1, c) + v.get(r + 1, c) + v.get(r, c - 1) + v.get(r, c + 1)
                    - 4.0 * v.get(r, c);
                assert!((lap.get(r, c) - s / 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_sums_to_boundary_flux() {
        let g = grid(5, 6, 1.0);
        let mut rng = TestRng::new(5);
        let mut xi = random_field(g, &mut rng, 1.0);
        assert!(divergence(&xi).sum().abs() < 1e-12);
        xi.components_mut().0[g.index(2, 5)] = 0.75;
        assert!(!xi.has_zero_normal_trace());
        assert!((divergence(&xi).sum() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn truncation_clamps() {
        let g = grid(1, 3, 1.0);
        let v = ScalarImage::from_vec(g, vec![-5.0, 0.0, 5.0]).unwrap();
        assert_eq!(truncate(&v, 2.0).unwrap().data(), &[-2.0, 0.0, 2.0]);
        assert_eq!(truncate(&v, 10.0).unwrap(), v);
        assert!(truncate(&v, 0.0).is_err());
    }

    #[test]
    fn pairing_is_gauss_green() {
        let g = grid(6, 6, 1.0 / 6.0);
        let mut rng = TestRng::new(19);
        let v = random_image(g, &mut rng, 1.0);
        let xi = random_field(g, &mut rng, 1.0);
        assert_eq!(pairing(&VectorField::zeros(g), &v).unwrap(), 0.0);
        let p = pairing(&xi, &v).unwrap();
        assert!((p + v.dot(&divergence(&xi))).abs() < 1e-12);
    }

    #[test]
    fn weighted_pairing_matches_shifted_density() {
        let g = grid(7, 6, 0.2);
        let mut rng = TestRng::new(23);
        let v = random_image(g, &mut rng, 1.0);
        let xi = random_field(g, &mut rng, 1.0);
        let psi = ScalarImage::from_fn(g, |r, c| {
            if (2..5).contains(&r) && (2..4).contains(&c) {
                1.0 + 0.1 * (r + c) as f64
            } else {
                0.0
            }
        });
        let a = pairing_weighted(&xi, &v, &psi).unwrap();
        let b = pairing_weighted_density(&xi, &v, &psi).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        let ones = ScalarImage::constant(g, 1.0);
        let full = pairing_weighted(&xi, &v, &ones).unwrap();
        assert!((full - pairing(&xi, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let v = ScalarImage::zeros(grid(3, 3, 1.0));
        let xi = VectorField::zeros(grid(3, 4, 1.0));
        assert!(matches!(pairing(&xi, &v), Err(Error::Shape(_))));
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(Grid::with_spacing(1, 1, 1.0).is_err());
        assert!(Grid::with_spacing(0, 4, 1.0).is_err());
        assert!(Grid::with_spacing(2, 2, 0.0).is_err());
        assert!(Grid::with_spacing(1, 2, 1.0).is_ok());
    }
}
