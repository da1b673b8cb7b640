//! Uniform tensor grid on [0,L] x [0,1], periodic in x with walls at y = 0 and
//! y = 1, together with sampled scalar fields, second-order finite-difference
//! calculus, and quadrature.
//!
//! Storage follows the torus convention in x: nodes x_i = i*L/nx for
//! i = 0..nx-1, with x = L identified with x = 0. In y all nodes including the
//! walls are stored: y_j = j/ny for j = 0..ny.

use crate::error::{Error, Result};

/// Boundary tag in y carried by every field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryY {
    /// Field vanishes identically at y = 0 and y = 1 (velocities).
    DirichletZero,
    /// No boundary constraint (density, forcing, pressure-like data).
    Free,
}

/// Uniform grid descriptor. Cheap to copy; fields reference it by value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(length: f64, nx: usize, ny: usize) -> Result<Grid> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if nx < 8 || nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!("nx must be even and at least 8, got {nx}")));
        }
        if ny < 8 {
            return Err(Error::InvalidGrid(format!("ny must be at least 8, got {ny}")));
        }
        Ok(Grid { length, nx, ny, hx: length / nx as f64, hy: 1.0 / ny as f64 })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Trapezoid weight in y (hy/2 at walls, hy inside).
    #[inline]
    pub fn y_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.hy
        } else {
            self.hy
        }
    }

    /// Number of stored nodes per field.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

/// A real scalar field sampled at grid nodes, row-major with x as the row
/// index: `values[i * (ny + 1) + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub bc_y: BoundaryY,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid, bc_y: BoundaryY) -> ScalarField {
        ScalarField { grid, bc_y, values: vec![0.0; grid.node_count()] }
    }

    /// Build a field from node values. Checks finiteness and, for
    /// dirichlet_zero, that the wall rows vanish within 1e-12 (then snaps
    /// them to exactly zero).
    pub fn from_values(grid: Grid, bc_y: BoundaryY, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        let mut f = ScalarField { grid, bc_y, values };
        f.check_finite()?;
        if bc_y == BoundaryY::DirichletZero {
            for i in 0..grid.nx {
                for j in [0, grid.ny] {
                    let v = f.at(i, j);
                    if v.abs() > 1e-12 {
                        return Err(Error::InvalidField(format!(
                            "dirichlet_zero field has value {v} at wall node (i={i}, j={j})"
                        )));
                    }
                    f.set(i, j, 0.0);
                }
            }
        }
        Ok(f)
    }

    /// Sample a function of (x, y) at the grid nodes.
    pub fn sample(grid: Grid, bc_y: BoundaryY, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..grid.nx {
            for j in 0..=grid.ny {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        ScalarField::from_values(grid, bc_y, values)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.grid.ny + 1) + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * (self.grid.ny + 1) + j] = v;
    }

    /// Periodic access in x.
    #[inline]
    pub fn at_wrap(&self, i: isize, j: usize) -> f64 {
        let nx = self.grid.nx as isize;
        let iw = i.rem_euclid(nx) as usize;
        self.at(iw, j)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        for (k, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                let j = k % (self.grid.ny + 1);
                let i = k / (self.grid.ny + 1);
                return Err(Error::NonFinite(format!("field value at (i={i}, j={j})")));
            }
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise map; the result is tagged free unless stated otherwise.
    pub fn map(&self, bc_y: BoundaryY, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = self.values.iter().map(|&v| f(v)).collect();
        ScalarField { grid: self.grid, bc_y, values }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &ScalarField, bc_y: BoundaryY, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid, "grid mismatch in field combination");
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField { grid: self.grid, bc_y, values }
    }

    /// self + alpha * other, preserving a common dirichlet tag.
    pub fn add_scaled(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        let bc = if self.bc_y == other.bc_y { self.bc_y } else { BoundaryY::Free };
        self.zip(other, bc, |a, b| a + alpha * b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(self.bc_y, |v| alpha * v)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let bc = if self.bc_y == BoundaryY::DirichletZero || other.bc_y == BoundaryY::DirichletZero {
            BoundaryY::DirichletZero
        } else {
            BoundaryY::Free
        };
        self.zip(other, bc, |a, b| a * b)
    }

    /// Centered x-derivative with periodic wrap; second order.
    pub fn dx(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g, BoundaryY::Free);
        let c = 1.0 / (2.0 * g.hx);
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            let im = (i + g.nx - 1) % g.nx;
            for j in 0..=g.ny {
                out.set(i, j, c * (self.at(ip, j) - self.at(im, j)));
            }
        }
        out
    }

    /// y-derivative: centered inside, second-order one-sided at the walls.
    pub fn dy(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g, BoundaryY::Free);
        let c = 1.0 / (2.0 * g.hy);
        for i in 0..g.nx {
            out.set(i, 0, c * (-3.0 * self.at(i, 0) + 4.0 * self.at(i, 1) - self.at(i, 2)));
            for j in 1..g.ny {
                out.set(i, j, c * (self.at(i, j + 1) - self.at(i, j - 1)));
            }
            out.set(
                i,
                g.ny,
                c * (3.0 * self.at(i, g.ny) - 4.0 * self.at(i, g.ny - 1) + self.at(i, g.ny - 2)),
            );
        }
        out
    }

    /// Second x-derivative, standard periodic 3-point stencil.
    pub fn dxx(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g, BoundaryY::Free);
        let c = 1.0 / (g.hx * g.hx);
        for i in 0..g.nx {
            let ip = (i + 1) % g.nx;
            let im = (i + g.nx - 1) % g.nx;
            for j in 0..=g.ny {
                out.set(i, j, c * (self.at(ip, j) - 2.0 * self.at(i, j) + self.at(im, j)));
            }
        }
        out
    }

    /// Running trapezoid integral from y = 0: g(x, y_j) = int_0^{y_j} f dy.
    pub fn cumint_y(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g, BoundaryY::Free);
        let h = 0.5 * g.hy;
        for i in 0..g.nx {
            let mut acc = 0.0;
            out.set(i, 0, 0.0);
            for j in 1..=g.ny {
                acc += h * (self.at(i, j - 1) + self.at(i, j));
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Full trapezoid integral in y per x node, as an nx-vector.
    pub fn integral_y(&self) -> Vec<f64> {
        let g = self.grid;
        (0..g.nx)
            .map(|i| (0..=g.ny).map(|j| g.y_weight(j) * self.at(i, j)).sum())
            .collect()
    }

    /// Quadrature over the whole domain: rectangle rule in x (periodic),
    /// trapezoid in y. Fixed loop order for deterministic rounding.
    pub fn integral_domain(&self) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for i in 0..g.nx {
            for j in 0..=g.ny {
                acc += g.y_weight(j) * self.at(i, j);
            }
        }
        acc * g.hx
    }
}

/// An x-only profile (the hydrostatic pressure), stored at the nx x-nodes and
/// kept discretely mean-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureProfile {
    pub grid: Grid,
    values: Vec<f64>,
}

impl PressureProfile {
    pub fn zeros(grid: Grid) -> PressureProfile {
        PressureProfile { grid, values: vec![0.0; grid.nx] }
    }

    /// Build from raw values, projecting out the mean.
    pub fn from_values(grid: Grid, mut values: Vec<f64>) -> Result<PressureProfile> {
        if values.len() != grid.nx {
            return Err(Error::InvalidField(format!(
                "pressure profile expects {} values, got {}",
                grid.nx,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pressure value {v}")));
        }
        let mean = values.iter().sum::<f64>() / grid.nx as f64;
        for v in values.iter_mut() {
            *v -= mean;
        }
        Ok(PressureProfile { grid, values })
    }

    /// Build from values that are already mean-zero (to round-off), without
    /// re-projecting. Used where bit-exact reconstruction matters.
    pub(crate) fn from_values_trusted(grid: Grid, values: Vec<f64>) -> Result<PressureProfile> {
        if values.len() != grid.nx {
            return Err(Error::InvalidField(format!(
                "pressure profile expects {} values, got {}",
                grid.nx,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pressure value {v}")));
        }
        Ok(PressureProfile { grid, values })
    }

    pub fn sample(grid: Grid, f: impl Fn(f64) -> f64) -> Result<PressureProfile> {
        PressureProfile::from_values(grid, (0..grid.nx).map(|i| f(grid.x(i))).collect())
    }

    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.nx as f64
    }

    /// Centered periodic x-derivative of the profile.
    pub fn dx(&self) -> Vec<f64> {
        let nx = self.grid.nx;
        let c = 1.0 / (2.0 * self.grid.hx);
        (0..nx)
            .map(|i| c * (self.values[(i + 1) % nx] - self.values[(i + nx - 1) % nx]))
            .collect()
    }

    /// Lift to a y-constant scalar field.
    pub fn as_field(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g, BoundaryY::Free);
        for i in 0..g.nx {
            for j in 0..=g.ny {
                out.set(i, j, self.values[i]);
            }
        }
        out
    }

    pub fn sub(&self, other: &PressureProfile) -> PressureProfile {
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a - b)
            .collect();
        PressureProfile { grid: self.grid, values }
    }

    /// Discrete L2 norm over the domain (profile is y-constant).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.hx).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacings() {
        let g = Grid::new(1.0, 16, 16).unwrap();
        assert_eq!(g.hx, 0.0625);
        assert_eq!(g.hy, 0.0625);
        let g2 = Grid::new(2.0, 32, 16).unwrap();
        assert_eq!(g2.hx, 0.0625);
        assert_eq!(g2.hy, 0.0625);
    }

    #[test]
    fn grid_rejects_bad_dimensions() {
        assert!(Grid::new(1.0, 7, 16).is_err());
        assert!(Grid::new(1.0, 6, 16).is_err());
        assert!(Grid::new(1.0, 16, 7).is_err());
        assert!(Grid::new(0.0, 16, 16).is_err());
        assert!(Grid::new(-1.0, 16, 16).is_err());
    }

    #[test]
    fn sample_constant_and_dirichlet() {
        let g = Grid::new(1.0, 16, 16).unwrap();
        let ones = ScalarField::sample(g, BoundaryY::Free, |_, _| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));

        let u = ScalarField::sample(g, BoundaryY::DirichletZero, |x, y| {
            (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
        })
        .unwrap();
        for i in 0..g.nx {
            assert_eq!(u.at(i, 0), 0.0);
            assert_eq!(u.at(i, g.ny), 0.0);
        }

        let bad = ScalarField::sample(g, BoundaryY::DirichletZero, |x, y| {
            (2.0 * PI * x).sin() * (2.0 * PI * y).cos()
        });
        assert!(bad.is_err());
    }

    #[test]
    fn dx_constant_is_zero_and_sine_value() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let c = ScalarField::sample(g, BoundaryY::Free, |_, _| 3.5).unwrap();
        assert!(c.dx().values().iter().all(|&v| v == 0.0));

        // Centered stencil of sin(2 pi x) at x = 0 with h = 1/8 gives
        // sin(2 pi h) / h = 8 sin(pi/4).
        let f = ScalarField::sample(g, BoundaryY::Free, |x, _| (2.0 * PI * x).sin()).unwrap();
        let expected = 8.0 * (PI / 4.0).sin();
        assert!((f.dx().at(0, 0) - expected).abs() < 1e-12, "got {}", f.dx().at(0, 0));
    }

    #[test]
    fn dx_second_order() {
        let mut errs = Vec::new();
        for nx in [16usize, 32, 64] {
            let g = Grid::new(1.0, nx, 8).unwrap();
            let f = ScalarField::sample(g, BoundaryY::Free, |x, _| (2.0 * PI * x).sin()).unwrap();
            let d = f.dx();
            let mut e = 0.0f64;
            for i in 0..g.nx {
                let exact = 2.0 * PI * (2.0 * PI * g.x(i)).cos();
                e = e.max((d.at(i, 0) - exact).abs());
            }
            errs.push(e);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1} {order2}");
    }

    #[test]
    fn dy_linear_exact_and_second_order() {
        let g = Grid::new(1.0, 8, 16).unwrap();
        let f = ScalarField::sample(g, BoundaryY::Free, |_, y| y).unwrap();
        let d = f.dy();
        for i in 0..g.nx {
            for j in 0..=g.ny {
                assert!((d.at(i, j) - 1.0).abs() < 1e-12);
            }
        }

        let mut errs = Vec::new();
        for ny in [16usize, 32, 64] {
            let g = Grid::new(1.0, 8, ny).unwrap();
            let f = ScalarField::sample(g, BoundaryY::Free, |_, y| (2.0 * PI * y).sin()).unwrap();
            let d = f.dy();
            let mut e = 0.0f64;
            for j in 0..=g.ny {
                let exact = 2.0 * PI * (2.0 * PI * g.y(j)).cos();
                e = e.max((d.at(0, j) - exact).abs());
            }
            errs.push(e);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn cumint_y_oracles() {
        let g = Grid::new(1.0, 8, 32).unwrap();
        let one = ScalarField::sample(g, BoundaryY::Free, |_, _| 1.0).unwrap();
        let gy = one.cumint_y();
        for j in 0..=g.ny {
            assert!((gy.at(0, j) - g.y(j)).abs() < 1e-12);
        }

        let s = ScalarField::sample(g, BoundaryY::Free, |_, y| (2.0 * PI * y).sin()).unwrap();
        assert!(s.cumint_y().at(3, g.ny).abs() < 1e-2);

        let c = ScalarField::sample(g, BoundaryY::Free, |_, y| (2.0 * PI * y).cos()).unwrap();
        assert!(c.cumint_y().at(3, g.ny / 2).abs() < 1e-2);
    }

    #[test]
    fn integral_domain_oracles() {
        let g = Grid::new(1.0, 32, 32).unwrap();
        let one = ScalarField::sample(g, BoundaryY::Free, |_, _| 1.0).unwrap();
        assert!((one.integral_domain() - 1.0).abs() < 1e-12);

        let s = ScalarField::sample(g, BoundaryY::Free, |x, _| (2.0 * PI * x).sin()).unwrap();
        assert!(s.integral_domain().abs() < 1e-12);

        let f = ScalarField::sample(g, BoundaryY::Free, |x, y| {
            ((2.0 * PI * x).sin() * (2.0 * PI * y).sin()).powi(2)
        })
        .unwrap();
        assert!((f.integral_domain() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn integration_by_parts_in_x() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let f = ScalarField::sample(g, BoundaryY::Free, |x, y| (2.0 * PI * x).sin() + 0.3 * y)
            .unwrap();
        let h = ScalarField::sample(g, BoundaryY::Free, |x, y| {
            (4.0 * PI * x).cos() * (1.0 + y * y)
        })
        .unwrap();
        let a = f.dx().mul(&h).integral_domain();
        let b = f.mul(&h.dx()).integral_domain();
        assert!((a + b).abs() < 1e-10, "ibp defect {}", a + b);
    }

    #[test]
    fn pressure_profile_mean_zero() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let p = PressureProfile::sample(g, |x| (2.0 * PI * x).cos() + 5.0).unwrap();
        assert!(p.mean().abs() < 1e-12);
        // cos has zero mean on the periodic nodes, so the shift removed is 5.
        assert!((p.at(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nan_rejected() {
        let g = Grid::new(1.0, 8, 8).unwrap();
        let mut vals = vec![0.0; g.node_count()];
        vals[10] = f64::NAN;
        assert!(ScalarField::from_values(g, BoundaryY::Free, vals).is_err());
    }
}
