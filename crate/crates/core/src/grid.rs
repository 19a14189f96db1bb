//! Configuration-space grids and the fields that live on them.
//!
//! Points are cell centred: on axis `k` the `i`-th coordinate is
//! `origin[k] + (i + 1/2) * spacing[k]` with `spacing[k] = extent[k] / points[k]`.
//! Values are stored flat in row-major order, the last axis varying fastest.

use crate::error::{invalid, Error, Result};
use crate::prelude::*;
use crate::Complex64;

/// Plain description of a grid, used for construction and serialization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub extent: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
}

/// A rectangular grid over 1 to 3 configuration-space axes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "GridSpec", into = "GridSpec")
)]
pub struct ConfigGrid {
    spec: GridSpec,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl TryFrom<GridSpec> for ConfigGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        ConfigGrid::new(spec)
    }
}

impl From<ConfigGrid> for GridSpec {
    fn from(g: ConfigGrid) -> Self {
        g.spec
    }
}

impl ConfigGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let dim = spec.points.len();
        if dim == 0 || dim > 3 {
            return Err(invalid("points", "grids have 1 to 3 axes"));
        }
        if spec.extent.len() != dim || spec.origin.len() != dim || spec.periodic.len() != dim {
            return Err(Error::ShapeMismatch("grid spec arrays differ in length"));
        }
        for axis in 0..dim {
            if spec.points[axis] == 0 {
                return Err(Error::TooFewPoints {
                    axis,
                    points: 0,
                    required: 1,
                });
            }
            if !(spec.extent[axis] > 0.0 && spec.extent[axis].is_finite()) {
                return Err(invalid("extent", "extents must be positive and finite"));
            }
            if !spec.origin[axis].is_finite() {
                return Err(invalid("origin", "origin must be finite"));
            }
        }
        let spacing: Vec<f64> = (0..dim)
            .map(|k| spec.extent[k] / spec.points[k] as f64)
            .collect();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * spec.points[k + 1];
        }
        let len = spec.points.iter().product();
        Ok(Self {
            spec,
            spacing,
            strides,
            len,
        })
    }

    /// One axis covering `[lo, hi)`.
    pub fn line(points: usize, lo: f64, hi: f64, periodic: bool) -> Result<Self> {
        Self::new(GridSpec {
            points: vec![points],
            extent: vec![hi - lo],
            origin: vec![lo],
            periodic: vec![periodic],
        })
    }

    /// A box with the same points, bounds and periodicity on every axis.
    pub fn cube(dim: usize, points: usize, lo: f64, hi: f64, periodic: bool) -> Result<Self> {
        Self::new(GridSpec {
            points: vec![points; dim],
            extent: vec![hi - lo; dim],
            origin: vec![lo; dim],
            periodic: vec![periodic; dim],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.points.len()
    }
    pub fn points(&self) -> &[usize] {
        &self.spec.points
    }
    pub fn extent(&self) -> &[f64] {
        &self.spec.extent
    }
    pub fn origin(&self) -> &[f64] {
        &self.spec.origin
    }
    pub fn periodic(&self) -> &[bool] {
        &self.spec.periodic
    }
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim(),
            })
        } else {
            Ok(())
        }
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(flat, &mut out);
        out
    }

    pub fn multi_index_into(&self, flat: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = (flat / self.strides[k]) % self.spec.points[k];
        }
    }

    /// Index along `axis` of the flat point.
    #[inline]
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.spec.points[axis]
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.spec.origin[axis] + (i as f64 + 0.5) * self.spacing[axis]
    }

    pub fn position(&self, flat: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.coordinate(k, self.axis_index(flat, k)))
            .collect()
    }

    /// Neighbour one step forward (`+1`) or backward along `axis`; wraps on
    /// periodic axes and returns `None` past a non-periodic edge.
    #[inline]
    pub fn neighbor(&self, flat: usize, axis: usize, forward: bool) -> Option<usize> {
        let n = self.spec.points[axis];
        let i = self.axis_index(flat, axis);
        let s = self.strides[axis];
        if forward {
            if i + 1 < n {
                Some(flat + s)
            } else if self.spec.periodic[axis] {
                Some(flat + s - n * s)
            } else {
                None
            }
        } else if i > 0 {
            Some(flat - s)
        } else if self.spec.periodic[axis] {
            Some(flat + (n - 1) * s)
        } else {
            None
        }
    }

    /// Whether a position lies in the grid box (periodic axes always do).
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|k| {
            self.spec.periodic[k]
                || (x[k] >= self.spec.origin[k] && x[k] <= self.spec.origin[k] + self.spec.extent[k])
        })
    }

    /// Map periodic coordinates into `[origin, origin + extent)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for k in 0..self.dim() {
            if self.spec.periodic[k] {
                let lo = self.spec.origin[k];
                let l = self.spec.extent[k];
                let mut y = (x[k] - lo) % l;
                if y < 0.0 {
                    y += l;
                }
                if y >= l {
                    y -= l;
                }
                x[k] = lo + y;
            }
        }
    }

    /// Displacement `b - a` on axis `k`, using the minimal image on periodic axes.
    pub fn displacement(&self, axis: usize, a: f64, b: f64) -> f64 {
        let d = b - a;
        if self.spec.periodic[axis] {
            let l = self.spec.extent[axis];
            d - l * (d / l).round()
        } else {
            d
        }
    }

    /// Flat index of the cell containing `x`, if any.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for k in 0..self.dim() {
            let n = self.spec.points[k];
            let mut u = (x[k] - self.spec.origin[k]) / self.spacing[k];
            if self.spec.periodic[k] {
                u = crate::rem_euclid(u, n as f64);
            }
            if !(u >= 0.0 && u <= n as f64) {
                return None;
            }
            let i = (u.floor() as usize).min(n - 1);
            flat += i * self.strides[k];
        }
        Some(flat)
    }

    /// Multilinear interpolation of point values at `x`. Outside the centre
    /// lattice on a non-periodic axis the nearest edge value is held.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let dim = self.dim();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut w = [0f64; 3];
        for k in 0..dim {
            let n = self.spec.points[k];
            let u = (x[k] - self.spec.origin[k]) / self.spacing[k] - 0.5;
            if self.spec.periodic[k] {
                let u = crate::rem_euclid(u, n as f64);
                let i = (u.floor() as usize).min(n - 1);
                lo[k] = i;
                hi[k] = (i + 1) % n;
                w[k] = u - i as f64;
            } else if u <= 0.0 || n == 1 {
                lo[k] = 0;
                hi[k] = 0;
                w[k] = 0.0;
            } else if u >= (n - 1) as f64 {
                lo[k] = n - 1;
                hi[k] = n - 1;
                w[k] = 0.0;
            } else {
                let i = u.floor() as usize;
                lo[k] = i;
                hi[k] = i + 1;
                w[k] = u - i as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut flat = 0;
            for k in 0..dim {
                if corner >> k & 1 == 1 {
                    weight *= w[k];
                    flat += hi[k] * self.strides[k];
                } else {
                    weight *= 1.0 - w[k];
                    flat += lo[k] * self.strides[k];
                }
            }
            if weight != 0.0 {
                acc += weight * values[flat];
            }
        }
        acc
    }

    /// Closed loop around the rectangle with lower corner `corner` spanning
    /// `len0` steps on `axis0` and `len1` steps on `axis1`, counter-clockwise
    /// in the (axis0, axis1) plane. Steps wrap on periodic axes.
    pub fn rectangular_loop(
        &self,
        axis0: usize,
        axis1: usize,
        corner: &[usize],
        len0: usize,
        len1: usize,
    ) -> Result<Vec<usize>> {
        self.check_axis(axis0)?;
        self.check_axis(axis1)?;
        if axis0 == axis1 || len0 == 0 || len1 == 0 {
            return Err(invalid("loop", "need two distinct axes and positive side lengths"));
        }
        let mut p = self.index(corner);
        let mut out = vec![p];
        let legs = [(axis0, len0, true), (axis1, len1, true), (axis0, len0, false), (axis1, len1, false)];
        for (axis, len, fwd) in legs {
            for _ in 0..len {
                p = self
                    .neighbor(p, axis, fwd)
                    .ok_or(Error::LoopLeavesGrid { step: out.len() - 1 })?;
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Closed loop that runs once around the periodic `axis` through `through`.
    pub fn axis_loop(&self, axis: usize, through: usize) -> Result<Vec<usize>> {
        self.check_axis(axis)?;
        if !self.spec.periodic[axis] {
            return Err(invalid("axis", "ring loops need a periodic axis"));
        }
        let mut p = through;
        let mut out = vec![p];
        for _ in 0..self.spec.points[axis] {
            p = self.neighbor(p, axis, true).unwrap();
            out.push(p);
        }
        Ok(out)
    }

    /// For each loop step: the axis moved along and `+1.0`/`-1.0` for its direction.
    pub fn loop_steps(&self, lp: &[usize]) -> Result<Vec<(usize, f64)>> {
        if lp.len() < 2 || lp[0] != lp[lp.len() - 1] {
            return Err(Error::OpenLoop);
        }
        let mut steps = Vec::with_capacity(lp.len() - 1);
        for (s, w) in lp.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if a >= self.len || b >= self.len {
                return Err(Error::LoopLeavesGrid { step: s });
            }
            let mut found = None;
            for k in 0..self.dim() {
                let n = self.spec.points[k];
                if n < 3 && self.spec.periodic[k] {
                    continue;
                }
                if self.neighbor(a, k, true) == Some(b) {
                    found = Some((k, 1.0));
                    break;
                }
                if self.neighbor(a, k, false) == Some(b) {
                    found = Some((k, -1.0));
                    break;
                }
            }
            steps.push(found.ok_or(Error::LoopLeavesGrid { step: s })?);
        }
        Ok(steps)
    }

    pub fn check_same(&self, other: &ConfigGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("fields live on different grids"))
        }
    }
}

/// Real values on every grid point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarField {
    grid: ConfigGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: ConfigGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch("scalar field length differs from grid size"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: ConfigGrid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: ConfigGrid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: ConfigGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: ConfigGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One real component per grid axis at every point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VectorField {
    grid: ConfigGrid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: ConfigGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch("vector field does not conform to grid"));
        }
        if components.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: ConfigGrid) -> Self {
        let components = vec![vec![0.0; grid.len()]; grid.dim()];
        Self { grid, components }
    }

    pub fn from_fn(grid: ConfigGrid, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; grid.dim()];
        for i in 0..grid.len() {
            let v = f(&grid.position(i));
            for (k, c) in components.iter_mut().enumerate() {
                c[i] = v[k];
            }
        }
        Self { grid, components }
    }

    pub(crate) fn from_parts(grid: ConfigGrid, components: Vec<Vec<f64>>) -> Self {
        Self { grid, components }
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }
    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }
    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    /// Multilinear interpolation of every component at `x`.
    pub fn interpolate_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, c) in self.components.iter().enumerate() {
            out[k] = self.grid.interpolate(c, x);
        }
    }
}

/// Complex values on every grid point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplexField {
    grid: ConfigGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: ConfigGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch("complex field length differs from grid size"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("complex field"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: ConfigGrid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: ConfigGrid, values: Vec<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &ConfigGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn modulus_squared(&self) -> ScalarField {
        ScalarField::from_parts(self.grid.clone(), self.values.iter().map(|z| z.norm_sqr()).collect())
    }
}

/// Result of [`gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub field: ScalarField,
    /// Set when one-sided stencils were used at a non-periodic edge.
    pub one_sided_edges: bool,
}

/// Central-difference derivative along `axis`. Non-periodic edges use the
/// second-order one-sided stencil and set [`Gradient::one_sided_edges`].
pub fn gradient(f: &ScalarField, axis: usize) -> Result<Gradient> {
    let grid = f.grid();
    grid.check_axis(axis)?;
    if grid.points()[axis] < 3 {
        return Err(Error::TooFewPoints {
            axis,
            points: grid.points()[axis],
            required: 3,
        });
    }
    let (out, one_sided) = difference(grid, f.values(), axis);
    Ok(Gradient {
        field: ScalarField::from_parts(grid.clone(), out),
        one_sided_edges: one_sided,
    })
}

pub(crate) fn difference(grid: &ConfigGrid, v: &[f64], axis: usize) -> (Vec<f64>, bool) {
    let h = grid.spacing()[axis];
    let mut one_sided = false;
    let out = (0..grid.len())
        .map(|p| match (grid.neighbor(p, axis, false), grid.neighbor(p, axis, true)) {
            (Some(m), Some(q)) => (v[q] - v[m]) / (2.0 * h),
            (None, Some(q)) => {
                one_sided = true;
                let q2 = grid.neighbor(q, axis, true).unwrap();
                (-3.0 * v[p] + 4.0 * v[q] - v[q2]) / (2.0 * h)
            }
            (Some(m), None) => {
                one_sided = true;
                let m2 = grid.neighbor(m, axis, false).unwrap();
                (3.0 * v[p] - 4.0 * v[m] + v[m2]) / (2.0 * h)
            }
            (None, None) => 0.0,
        })
        .collect();
    (out, one_sided)
}

/// Riemann sum of the field times the cell volume.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

/// Line integral of `v` around a closed lattice loop, each bond contributing
/// the mean of its end values times the signed step length.
pub fn loop_integral(v: &VectorField, lp: &[usize]) -> Result<f64> {
    let grid = v.grid();
    loop_sum(grid, lp, |a, b, axis, sign| {
        0.5 * (v.component(axis)[a] + v.component(axis)[b]) * sign * grid.spacing()[axis]
    })
}

/// Sum of an arbitrary bond functional `(from, to, axis, sign)` around a loop.
pub fn loop_sum(
    grid: &ConfigGrid,
    lp: &[usize],
    mut bond: impl FnMut(usize, usize, usize, f64) -> f64,
) -> Result<f64> {
    let steps = grid.loop_steps(lp)?;
    Ok(steps
        .iter()
        .zip(lp.windows(2))
        .map(|(&(axis, sign), w)| bond(w[0], w[1], axis, sign))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    #[test]
    fn constant_has_zero_gradient() {
        let g = ConfigGrid::cube(2, 9, -1.0, 1.0, false).unwrap();
        let f = ScalarField::constant(g, 3.5);
        for axis in 0..2 {
            let d = gradient(&f, axis).unwrap();
            assert!(d.one_sided_edges);
            assert!(d.field.values().iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn sine_derivative_is_second_order() {
        let l = 2.0;
        let err = |n: usize| {
            let g = ConfigGrid::line(n, 0.0, l, true).unwrap();
            let f = ScalarField::from_fn(g.clone(), |x| (2.0 * PI * x[0] / l).sin());
            let d = gradient(&f, 0).unwrap();
            assert!(!d.one_sided_edges);
            (0..n)
                .map(|i| {
                    let x = g.coordinate(0, i);
                    (d.field.values()[i] - 2.0 * PI / l * (2.0 * PI * x / l).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn linear_function_has_unit_slope() {
        let g = ConfigGrid::line(11, 0.0, 1.0, false).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0]);
        let d = gradient(&f, 0).unwrap();
        for v in d.field.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_rejects_bad_axis_and_short_axis() {
        let g = ConfigGrid::line(2, 0.0, 1.0, true).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(gradient(&f, 1), Err(Error::AxisOutOfRange { .. })));
        assert!(matches!(gradient(&f, 0), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn integrate_volume_and_zero() {
        let g = ConfigGrid::line(40, -3.0, 5.0, false).unwrap();
        assert_abs_diff_eq!(integrate(&ScalarField::constant(g.clone(), 1.0)), 8.0, epsilon = 1e-12);
        assert_eq!(integrate(&ScalarField::zeros(g)), 0.0);
    }

    #[test]
    fn normalized_gaussian_integrates_to_one() {
        let g = ConfigGrid::cube(2, 64, -6.0, 6.0, false).unwrap();
        let mut f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let z = integrate(&f);
        for v in f.values_mut() {
            *v /= z;
        }
        assert_abs_diff_eq!(integrate(&f), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn ring_winding_of_angle_gradient() {
        let n = 128;
        let l = 2.0 * PI;
        let g = ConfigGrid::line(n, 0.0, l, true).unwrap();
        let v = VectorField::from_fn(g.clone(), |_| vec![1.0]);
        let lp = g.axis_loop(0, 0).unwrap();
        assert_abs_diff_eq!(loop_integral(&v, &lp).unwrap(), 2.0 * PI, epsilon = 1e-12);
        let z = VectorField::zeros(g);
        assert_eq!(loop_integral(&z, &lp).unwrap(), 0.0);
    }

    #[test]
    fn loop_validation() {
        let g = ConfigGrid::cube(2, 8, 0.0, 1.0, false).unwrap();
        let v = VectorField::zeros(g.clone());
        assert_eq!(loop_integral(&v, &[0, 1, 2]), Err(Error::OpenLoop));
        assert!(matches!(loop_integral(&v, &[0, 9, 0]), Err(Error::LoopLeavesGrid { .. })));
        assert!(g.rectangular_loop(0, 1, &[6, 6], 3, 1).is_err());
        let lp = g.rectangular_loop(0, 1, &[1, 1], 3, 2).unwrap();
        assert_eq!(lp.len(), 11);
        assert_eq!(lp.first(), lp.last());
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = ConfigGrid::cube(2, 10, 0.0, 1.0, false).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| 2.0 * x[0] - 3.0 * x[1] + 0.5);
        let v = g.interpolate(f.values(), &[0.33, 0.71]);
        assert_abs_diff_eq!(v, 2.0 * 0.33 - 3.0 * 0.71 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let g = ConfigGrid::line(4, 0.0, 4.0, true).unwrap();
        let vals = [0.0, 1.0, 2.0, 3.0];
        // halfway between the last centre (3.5) and the first one (0.5 + 4)
        assert_abs_diff_eq!(g.interpolate(&vals, &[4.0]), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.interpolate(&vals, &[0.0]), 1.5, epsilon = 1e-12);
    }
}
