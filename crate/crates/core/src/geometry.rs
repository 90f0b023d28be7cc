//! Fixed-size points and matrices for fields on R^d with d <= 3.
//!
//! Coordinates beyond the active dimension are kept at zero, so dot products
//! and norms can always run over all three slots.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 3;

pub type Point = [f64; MAX_DIM];
pub type Mat = [[f64; MAX_DIM]; MAX_DIM];

pub const ORIGIN: Point = [0.0; MAX_DIM];

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &Point, y: &Point) -> Point {
    [alpha * x[0] + y[0], alpha * x[1] + y[1], alpha * x[2] + y[2]]
}

#[inline]
pub fn scale(alpha: f64, x: &Point) -> Point {
    [alpha * x[0], alpha * x[1], alpha * x[2]]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `e^T A e`.
#[inline]
pub fn quad_form(a: &Mat, e: &Point) -> f64 {
    let mut s = 0.0;
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            s += e[i] * a[i][j] * e[j];
        }
    }
    s
}

pub fn frobenius_sq(a: &Mat) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

/// Copies a slice into a padded point, checking the length.
pub fn point_from_slice(dim: usize, x: &[f64]) -> Result<Point> {
    if x.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: x.len(),
        });
    }
    let mut p = ORIGIN;
    p[..dim].copy_from_slice(x);
    Ok(p)
}

pub fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Axis-aligned box `[lo, hi]` in R^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim)?;
        let lo = point_from_slice(dim, lo)?;
        let hi = point_from_slice(dim, hi)?;
        for i in 0..dim {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(invalid(
                    "support_box",
                    format!("axis {i}: need lo < hi, got [{}, {}]", lo[i], hi[i]),
                ));
            }
        }
        Ok(Self { dim, lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(&[a], &[b])
    }

    pub fn cube(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(&vec![a; dim], &vec![b; dim])
    }

    /// Closed-box membership over the active axes.
    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn center(&self) -> Point {
        let mut c = ORIGIN;
        for i in 0..self.dim {
            c[i] = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Largest distance from the origin to a corner of the box.
    pub fn max_corner_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        for mask in 0..(1usize << self.dim) {
            let mut p = ORIGIN;
            for i in 0..self.dim {
                p[i] = if mask & (1 << i) == 0 { self.lo[i] } else { self.hi[i] };
            }
            best = best.max(norm(&p));
        }
        best
    }

    /// Parameter interval `{t : base + t dir in box}`, or `None` when the
    /// line misses the box.
    pub fn line_intersection(&self, base: &Point, dir: &Point) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..self.dim {
            if dir[i].abs() < 1e-15 {
                if base[i] < self.lo[i] || base[i] > self.hi[i] {
                    return None;
                }
            } else {
                let a = (self.lo[i] - base[i]) / dir[i];
                let b = (self.hi[i] - base[i]) / dir[i];
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        (t1 > t0).then_some((t0, t1))
    }
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `e`.
pub fn orthonormal_complement(dim: usize, e: &Point) -> Vec<Point> {
    match dim {
        1 => Vec::new(),
        2 => vec![[-e[1], e[0], 0.0]],
        _ => {
            // Gram-Schmidt against the coordinate axis least aligned with e.
            let axis = (0..3)
                .min_by(|&i, &j| e[i].abs().total_cmp(&e[j].abs()))
                .unwrap_or(0);
            let mut a = ORIGIN;
            a[axis] = 1.0;
            let a = axpy(-dot(&a, e), e, &a);
            let a = scale(1.0 / norm(&a), &a);
            let b = [
                e[1] * a[2] - e[2] * a[1],
                e[2] * a[0] - e[0] * a[2],
                e[0] * a[1] - e[1] * a[0],
            ];
            vec![a, b]
        }
    }
}
