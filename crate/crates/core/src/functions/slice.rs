//! Restrictions of a field to lines `t ↦ u(ξ + t ẑ)`.

use super::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::{axpy, dot, norm, point_from_slice, BoxDomain, Point};
use crate::quadrature::breakpoints;

const UNIT_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LineSlice {
    base: ScalarField,
    dir: Point,
    offset: Point,
    range: Option<(f64, f64)>,
}

/// Slice of `u` along the unit vector `dir` through `offset ∈ dir^⊥`.
pub fn slice(u: &ScalarField, dir: &[f64], offset: &[f64]) -> Result<LineSlice> {
    let dim = u.dim();
    let dir = point_from_slice(dim, dir)?;
    let offset = point_from_slice(dim, offset)?;
    LineSlice::new(u, dir, offset)
}

impl LineSlice {
    pub fn new(u: &ScalarField, dir: Point, offset: Point) -> Result<Self> {
        if (norm(&dir) - 1.0).abs() > UNIT_TOL {
            return Err(Error::Validation(format!(
                "slice direction has norm {}, expected 1",
                norm(&dir)
            )));
        }
        let d = dot(&dir, &offset);
        if d.abs() > ORTHO_TOL {
            return Err(Error::Validation(format!(
                "slice offset is not orthogonal to the direction (ξ·ẑ = {d:e})"
            )));
        }
        let range = u
            .support()
            .line_intersection(&offset, &dir)
            .filter(|(t0, t1)| t1 - t0 > 1e-14);
        Ok(Self {
            base: u.clone(),
            dir,
            offset,
            range,
        })
    }

    pub fn direction(&self) -> &Point {
        &self.dir
    }

    pub fn offset(&self) -> &Point {
        &self.offset
    }

    /// Parameter interval where the line meets the support box.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    #[inline]
    fn point(&self, t: f64) -> Point {
        axpy(t, &self.dir, &self.offset)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.base.value(&self.point(t))
    }

    /// `w'(t) = ∇u(ξ + tẑ)·ẑ`.
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        dot(&self.base.gradient(&self.point(t)), &self.dir)
    }

    /// Parameters where the line crosses a declared breakpoint plane.
    pub fn breakpoints(&self) -> Vec<f64> {
        let Some((t0, t1)) = self.range else {
            return Vec::new();
        };
        let mut cuts = Vec::new();
        for axis in 0..self.base.dim() {
            if self.dir[axis].abs() < 1e-14 {
                continue;
            }
            for &p in self.base.breakpoints(axis) {
                cuts.push((p - self.offset[axis]) / self.dir[axis]);
            }
        }
        breakpoints(t0, t1, cuts)
    }

    fn support_1d(&self) -> Result<BoxDomain> {
        let (t0, t1) = self
            .range
            .ok_or_else(|| Error::Validation("slice misses the support".into()))?;
        BoxDomain::interval(t0, t1)
    }

    /// `w` as a 1-D field.
    pub fn values_field(&self) -> Result<ScalarField> {
        let support = self.support_1d()?;
        let me = self.clone();
        let d = self.clone();
        let cuts = self.breakpoints();
        Ok(ScalarField::analytic(support, move |t| me.value(t[0]))
            .with_gradient(move |t| [d.derivative(t[0]), 0.0, 0.0])
            .with_breakpoints(0, &cuts)
            .with_label("slice"))
    }

    /// `w'` as a 1-D field whose antiderivative is `w(t) − w(0)` in closed form.
    pub fn derivative_field(&self) -> Result<ScalarField> {
        let support = self.support_1d()?;
        let cuts = self.breakpoints();
        let d = self.clone();
        let p = self.clone();
        let f = ScalarField::analytic(support, move |t| d.derivative(t[0]))
            .with_antiderivative(move |t| p.value(t))?
            .with_breakpoints(0, &cuts)
            .with_label("slice_derivative");
        Ok(f)
    }
}
