//! Scalar fields on R^d (d <= 3), their derivatives, antiderivatives,
//! moving averages, and restrictions to lines.

mod builtin;
mod grid;
mod slice;

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{point_from_slice, BoxDomain, Mat, Point, MAX_DIM, ORIGIN};
use crate::quadrature::{breakpoints, compensated_sum, gauss_legendre, GaussLegendre};

pub use builtin::*;
pub use grid::GridData;
pub use slice::{slice, LineSlice};

pub type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Point) -> Mat + Send + Sync>;
pub type AntiderivativeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smallest finite-difference step for synthesized derivatives.
pub const FD_STEP_MIN: f64 = 1e-5;
/// Step used for second differences of fields without any analytic
/// derivative; a plain `1e-5` would lose about six digits to roundoff.
pub const FD_SECOND_STEP_MIN: f64 = 1e-4;
/// Default node count for inner averages and line integrals.
pub const N_MIN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Analytic,
    Grid,
}

#[derive(Clone)]
enum Repr {
    Analytic {
        value: ValueFn,
        gradient: Option<GradientFn>,
        hessian: Option<HessianFn>,
        antiderivative: Option<AntiderivativeFn>,
    },
    Grid(Arc<GridData>),
}

/// A real function on R^d that vanishes outside `support`.
///
/// Cloning is cheap: evaluators are reference counted.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    support: BoxDomain,
    /// Per-axis coordinates where the field may lose smoothness; always
    /// contains the support edges.
    breaks: Vec<Vec<f64>>,
    repr: Repr,
    label: String,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("kind", &self.kind())
            .field("support", &self.support)
            .finish()
    }
}

impl ScalarField {
    /// Analytic field from a closure. The closure is never called outside
    /// `support`.
    pub fn analytic<F>(support: BoxDomain, value: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        let breaks = (0..support.dim)
            .map(|i| vec![support.lo[i], support.hi[i]])
            .collect();
        Self {
            dim: support.dim,
            support,
            breaks,
            repr: Repr::Analytic {
                value: Arc::new(value),
                gradient: None,
                hessian: None,
                antiderivative: None,
            },
            label: "analytic".into(),
        }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        if let Repr::Analytic { gradient, .. } = &mut self.repr {
            *gradient = Some(Arc::new(g));
        }
        self
    }

    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&Point) -> Mat + Send + Sync + 'static,
    {
        if let Repr::Analytic { hessian, .. } = &mut self.repr {
            *hessian = Some(Arc::new(h));
        }
        self
    }

    /// Closed-form primitive of `u` on its support (any additive constant);
    /// 1-D fields only.
    pub fn with_antiderivative<A>(mut self, a: A) -> Result<Self>
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if self.dim != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: self.dim,
            });
        }
        if let Repr::Analytic { antiderivative, .. } = &mut self.repr {
            *antiderivative = Some(Arc::new(a));
        }
        Ok(self)
    }

    /// Declares coordinates along `axis` where the field has kinks or jumps.
    pub fn with_breakpoints(mut self, axis: usize, pts: &[f64]) -> Self {
        if axis < self.dim {
            let lo = self.support.lo[axis];
            let hi = self.support.hi[axis];
            let mut all = self.breaks[axis].clone();
            all.extend(pts.iter().copied());
            self.breaks[axis] = breakpoints(lo, hi, all);
        }
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Grid field with multilinear interpolation; see [`GridData`].
    pub fn from_grid(grid: GridData) -> Result<Self> {
        grid.validate()?;
        let support = grid.extent()?;
        let breaks = (0..grid.dim).map(|i| grid.axis_coords(i)).collect();
        Ok(Self {
            dim: grid.dim,
            support,
            breaks,
            repr: Repr::Grid(Arc::new(grid)),
            label: "grid".into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &BoxDomain {
        &self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> FieldKind {
        match self.repr {
            Repr::Analytic { .. } => FieldKind::Analytic,
            Repr::Grid(_) => FieldKind::Grid,
        }
    }

    pub fn grid(&self) -> Option<&GridData> {
        match &self.repr {
            Repr::Grid(g) => Some(g),
            Repr::Analytic { .. } => None,
        }
    }

    pub fn breakpoints(&self, axis: usize) -> &[f64] {
        &self.breaks[axis]
    }

    pub fn has_analytic_gradient(&self) -> bool {
        matches!(&self.repr, Repr::Analytic { gradient: Some(_), .. })
    }

    pub fn has_analytic_hessian(&self) -> bool {
        matches!(&self.repr, Repr::Analytic { hessian: Some(_), .. })
    }

    /// Whether `U` is available without quadrature (closed form or grid).
    pub fn has_exact_antiderivative(&self) -> bool {
        match &self.repr {
            Repr::Analytic { antiderivative, .. } => antiderivative.is_some(),
            Repr::Grid(_) => self.dim == 1,
        }
    }

    /// Finite-difference step for synthesized derivatives.
    pub fn fd_step(&self) -> f64 {
        match &self.repr {
            Repr::Grid(g) => (0..g.dim)
                .map(|i| g.spacing[i])
                .fold(FD_STEP_MIN, f64::max),
            Repr::Analytic { .. } => FD_STEP_MIN,
        }
    }

    /// Field value; identically zero outside the support box.
    #[inline]
    pub fn value(&self, x: &Point) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.repr {
            Repr::Analytic { value, .. } => value(x),
            Repr::Grid(g) => g.interpolate(x),
        }
    }

    /// Checked evaluation from a coordinate slice.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value(&point_from_slice(self.dim, x)?))
    }

    /// Gradient, analytic when available, otherwise centered differences.
    #[inline]
    pub fn gradient(&self, x: &Point) -> Point {
        if let Repr::Analytic {
            gradient: Some(g), ..
        } = &self.repr
        {
            return if self.support.contains(x) { g(x) } else { ORIGIN };
        }
        self.fd_gradient(x)
    }

    pub fn fd_gradient(&self, x: &Point) -> Point {
        let d = self.fd_step();
        let mut g = ORIGIN;
        for i in 0..self.dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += d;
            xm[i] -= d;
            g[i] = (self.value(&xp) - self.value(&xm)) / (2.0 * d);
        }
        g
    }

    /// Hessian: analytic, else differences of the gradient, else second
    /// differences of values.
    pub fn hessian(&self, x: &Point) -> Mat {
        let mut h = [[0.0; MAX_DIM]; MAX_DIM];
        match &self.repr {
            Repr::Analytic {
                hessian: Some(hf), ..
            } => {
                if self.support.contains(x) {
                    h = hf(x);
                }
            }
            Repr::Analytic {
                gradient: Some(_), ..
            } => {
                let d = self.fd_step();
                for j in 0..self.dim {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[j] += d;
                    xm[j] -= d;
                    let gp = self.gradient(&xp);
                    let gm = self.gradient(&xm);
                    for i in 0..self.dim {
                        h[i][j] = (gp[i] - gm[i]) / (2.0 * d);
                    }
                }
                symmetrize(&mut h);
            }
            _ => {
                let d = self.fd_step().max(if self.kind() == FieldKind::Grid {
                    0.0
                } else {
                    FD_SECOND_STEP_MIN
                });
                let f0 = self.value(x);
                for i in 0..self.dim {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[i] += d;
                    xm[i] -= d;
                    h[i][i] = (self.value(&xp) - 2.0 * f0 + self.value(&xm)) / (d * d);
                    for j in 0..i {
                        let mut pp = *x;
                        let mut pm = *x;
                        let mut mp = *x;
                        let mut mm = *x;
                        pp[i] += d;
                        pp[j] += d;
                        pm[i] += d;
                        pm[j] -= d;
                        mp[i] -= d;
                        mp[j] += d;
                        mm[i] -= d;
                        mm[j] -= d;
                        let v = (self.value(&pp) - self.value(&pm) - self.value(&mp)
                            + self.value(&mm))
                            / (4.0 * d * d);
                        h[i][j] = v;
                        h[j][i] = v;
                    }
                }
            }
        }
        h
    }

    /// `∫_a^b u` for a 1-D field, exact when `U` is known, otherwise
    /// Gauss-Legendre with `n` nodes per smooth piece.
    pub(crate) fn integral_1d(&self, a: f64, b: f64, n: usize) -> f64 {
        self.integral_1d_with(a, b, &gauss_legendre(n))
    }

    /// As [`Self::integral_1d`] with a prebuilt rule on each piece.
    pub(crate) fn integral_1d_with(&self, a: f64, b: f64, rule: &GaussLegendre) -> f64 {
        debug_assert_eq!(self.dim, 1);
        if let Some(u) = self.exact_antiderivative(b) {
            return u - self.exact_antiderivative(a).unwrap_or(0.0);
        }
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let lo_c = lo.max(self.support.lo[0]);
        let hi_c = hi.min(self.support.hi[0]);
        if hi_c <= lo_c {
            return 0.0;
        }
        let pts = breakpoints(lo_c, hi_c, self.breaks[0].iter().copied());
        let s = compensated_sum(pts.windows(2).map(|w| {
            rule.integrate(w[0], w[1], |t| self.value(&[t, 0.0, 0.0]))
        }));
        sign * s
    }

    fn exact_antiderivative(&self, x: f64) -> Option<f64> {
        match &self.repr {
            Repr::Analytic {
                antiderivative: Some(p),
                ..
            } => {
                // u vanishes outside the support, so U(x) = P(clamp x) - P(clamp 0)
                // for any primitive P of u on the support.
                let lo = self.support.lo[0];
                let hi = self.support.hi[0];
                Some(p(x.clamp(lo, hi)) - p(0.0_f64.clamp(lo, hi)))
            }
            Repr::Grid(g) if self.dim == 1 => Some(g.antiderivative_1d(x)),
            _ => None,
        }
    }

    /// Samples the field on a uniform tensor grid covering its support.
    pub fn sample_grid(&self, counts: &[usize]) -> Result<GridData> {
        if counts.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: counts.len(),
            });
        }
        GridData::sample(&self.support, counts, |x| self.value(x))
    }
}

fn symmetrize(h: &mut Mat) {
    for i in 0..MAX_DIM {
        for j in 0..i {
            let v = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
}

/// `U(x) = ∫_0^x u(y) dy` for a 1-D field.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    field: ScalarField,
    nodes: usize,
}

impl Antiderivative {
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.field.integral_1d(0.0, x, self.nodes)
    }
}

pub fn antiderivative(u: &ScalarField) -> Result<Antiderivative> {
    if u.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: u.dim(),
        });
    }
    Ok(Antiderivative {
        field: u.clone(),
        nodes: N_MIN,
    })
}

/// `D_h U(x) = (U(x+h) − U(x)) / h`, the mean of `u` over `[x, x+h]`.
pub fn moving_average(u: &ScalarField, h: f64, x: f64) -> Result<f64> {
    ensure_positive("h", h)?;
    if u.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: u.dim(),
        });
    }
    Ok(mean_over(u, x, h, N_MIN))
}

#[inline]
pub(crate) fn mean_over(u: &ScalarField, x: f64, h: f64, n: usize) -> f64 {
    u.integral_1d(x, x + h, n) / h
}

pub(crate) fn mean_over_with(u: &ScalarField, x: f64, h: f64, rule: &GaussLegendre) -> f64 {
    u.integral_1d_with(x, x + h, rule) / h
}

pub(crate) fn check_field_dim(u: &ScalarField, dim: usize) -> Result<()> {
    if u.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: u.dim(),
        });
    }
    Ok(())
}
