//! Kernels `K`, their rescalings `K_h`, validators, `σ_d`, the triangle
//! density `J`, and the effective kernel `K̃`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::geometry::{check_dim, norm, scale, Point, ORIGIN};
use crate::quadrature::{
    adaptive_gauss, compensated_sum, radial_nodes, sphere_area, SphereRule,
};

/// Radial sampling points used for the positivity estimate of `K`.
pub const POSITIVITY_SAMPLES: usize = 200;
const EVENNESS_SAMPLES: usize = 256;
const MOMENT_NODES: usize = 20;
const MOMENT_PANELS: usize = 8;
/// Dyadic levels towards the origin in moment rules; `K̃` is singular there.
const MOMENT_GRADING: u32 = 48;
const MOMENT_ANGULAR: usize = 64;
const ADAPTIVE_DEPTH: u32 = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum KernelShape {
    /// Normalized indicator of the unit ball.
    Ball,
    /// `exp(−|z|²)` on `|z| ≤ cutoff`, unnormalized.
    TruncatedGaussian { cutoff: f64 },
    /// Normalized indicator of `inner ≤ |z| ≤ 1`.
    Annulus { inner: f64 },
    /// `K(z)(1 + eps z₀/R)`: a deliberately non-even corruption.
    OddPerturbation { base: Box<KernelShape>, eps: f64 },
}

impl KernelShape {
    fn name(&self) -> String {
        match self {
            Self::Ball => "ball".into(),
            Self::TruncatedGaussian { .. } => "gaussian".into(),
            Self::Annulus { .. } => "annulus".into(),
            Self::OddPerturbation { base, .. } => format!("{}+odd", base.name()),
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Self::Ball | Self::Annulus { .. } => 1.0,
            Self::TruncatedGaussian { cutoff } => *cutoff,
            Self::OddPerturbation { base, .. } => base.radius(),
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            Self::Ball => vec![1.0],
            Self::TruncatedGaussian { cutoff } => vec![*cutoff],
            Self::Annulus { inner } => vec![*inner, 1.0],
            Self::OddPerturbation { base, .. } => base.breaks(),
        }
    }

    fn is_radial(&self) -> bool {
        !matches!(self, Self::OddPerturbation { .. })
    }

    /// Unscaled evaluation at `z` with `r = |z|`.
    #[inline]
    fn eval(&self, dim: usize, z: &Point, r: f64) -> f64 {
        match self {
            Self::Ball => {
                if r <= 1.0 {
                    1.0 / ball_volume(dim)
                } else {
                    0.0
                }
            }
            Self::TruncatedGaussian { cutoff } => {
                if r <= *cutoff {
                    (-r * r).exp()
                } else {
                    0.0
                }
            }
            Self::Annulus { inner } => {
                if r >= *inner && r <= 1.0 {
                    1.0 / (ball_volume(dim) * (1.0 - inner.powi(dim as i32)))
                } else {
                    0.0
                }
            }
            Self::OddPerturbation { base, eps } => {
                base.eval(dim, z, r) * (1.0 + eps * z[0] / base.radius())
            }
        }
    }
}

/// Lebesgue measure of the unit ball in R^d.
pub fn ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

/// `σ_d`: 1 for d = 2, `(d − 2)/(d − 1)` for d > 2.
pub fn sigma_d(d: usize) -> Result<f64> {
    match d {
        0 | 1 => Err(invalid("d", "sigma_d is defined for d >= 2")),
        2 => Ok(1.0),
        _ => Ok((d - 2) as f64 / (d - 1) as f64),
    }
}

/// Radius of the ball on which `K̃` is guaranteed positive. In one
/// dimension the bound holds on the whole of `B(0, r1)`.
pub fn positivity_ball_radius(dim: usize, r1: f64) -> f64 {
    sigma_d(dim).map_or(r1, |s| s * r1)
}

/// `J(r) = (1 − |r|)^+`.
#[inline]
pub fn triangle_j(r: f64) -> f64 {
    (1.0 - r.abs()).max(0.0)
}

/// `J_h(r) = J(r/h)/h`.
pub fn triangle_j_h(r: f64, h: f64) -> Result<f64> {
    ensure_positive("h", h)?;
    Ok(triangle_j(r / h) / h)
}

/// Even nonnegative kernel with compact support.
#[derive(Debug, Clone, Serialize)]
pub struct Kernel {
    dim: usize,
    shape: KernelShape,
    /// `K_h(z) = h^{-d} K(z/h)` with `h = scale`.
    scale: f64,
    r0: f64,
    r1: f64,
    positivity_min: f64,
    positivity_spacing: f64,
    mass: f64,
    second_moment: f64,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d = {}, scale {})", self.shape.name(), self.dim, self.scale)
    }
}

impl Kernel {
    pub fn new(dim: usize, shape: KernelShape) -> Result<Self> {
        check_dim(dim)?;
        let (r0, r1) = match &shape {
            KernelShape::Ball => (0.0, 1.0),
            KernelShape::TruncatedGaussian { cutoff } => {
                ensure_positive("cutoff", *cutoff)?;
                (0.0, 0.5 * cutoff)
            }
            KernelShape::Annulus { inner } => {
                if !(*inner > 0.0 && *inner < 1.0) {
                    return Err(invalid("inner", "annulus needs 0 < inner < 1"));
                }
                (*inner, 1.0)
            }
            KernelShape::OddPerturbation { base, eps } => {
                if !(eps.abs() < 1.0) {
                    return Err(invalid("eps", "need |eps| < 1 to keep K nonnegative"));
                }
                let b = Kernel::new(dim, (**base).clone())?;
                (b.r0, b.r1)
            }
        };
        let mut k = Self {
            dim,
            shape,
            scale: 1.0,
            r0,
            r1,
            positivity_min: 0.0,
            positivity_spacing: 0.0,
            mass: 0.0,
            second_moment: 0.0,
        };
        k.refresh()?;
        Ok(k)
    }

    pub fn ball(dim: usize) -> Result<Self> {
        Self::new(dim, KernelShape::Ball)
    }

    pub fn truncated_gaussian(dim: usize, cutoff: f64) -> Result<Self> {
        Self::new(dim, KernelShape::TruncatedGaussian { cutoff })
    }

    pub fn annulus(dim: usize, inner: f64) -> Result<Self> {
        Self::new(dim, KernelShape::Annulus { inner })
    }

    /// Built-ins by name with default parameters: `ball`, `gaussian`
    /// (cutoff 4), `annulus` (inner radius 1/4).
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        match name {
            "ball" => Self::ball(dim),
            "gaussian" => Self::truncated_gaussian(dim, 4.0),
            "annulus" => Self::annulus(dim, 0.25),
            _ => Err(Error::Unknown {
                kind: "kernel",
                name: name.to_string(),
            }),
        }
    }

    /// Multiplies by `1 + eps z₀/R`, which breaks evenness.
    pub fn with_odd_perturbation(&self, eps: f64) -> Result<Self> {
        let mut k = Self::new(
            self.dim,
            KernelShape::OddPerturbation {
                base: Box::new(self.shape.clone()),
                eps,
            },
        )?;
        k.scale = self.scale;
        k.r0 = self.r0;
        k.r1 = self.r1;
        k.refresh()?;
        Ok(k)
    }

    /// Overrides the annulus `(r0, r1)` on which positivity is claimed.
    pub fn with_positivity_annulus(mut self, r0: f64, r1: f64) -> Result<Self> {
        if !(r0 >= 0.0 && r1 > r0) {
            return Err(invalid("positivity", "need 0 <= r0 < r1"));
        }
        self.r0 = r0;
        self.r1 = r1;
        self.refresh()?;
        Ok(self)
    }

    /// `K_h(z) = h^{-d} K(z/h)`.
    pub fn rescale(&self, h: f64) -> Result<Self> {
        ensure_positive("h", h)?;
        let mut k = self.clone();
        k.scale *= h;
        k.r0 *= h;
        k.r1 *= h;
        k.refresh()?;
        Ok(k)
    }

    fn refresh(&mut self) -> Result<()> {
        self.mass = self.moment(0)?;
        self.second_moment = self.moment(2)?;
        let (min, spacing) = self.sample_positivity();
        self.positivity_min = min;
        self.positivity_spacing = spacing;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn name(&self) -> String {
        self.shape.name()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_radial(&self) -> bool {
        self.shape.is_radial()
    }

    /// `R_K`: the kernel vanishes outside `B(0, R_K)`.
    pub fn support_radius(&self) -> f64 {
        self.scale * self.shape.radius()
    }

    /// Radii where the radial profile jumps or kinks.
    pub fn radial_breaks(&self) -> Vec<f64> {
        self.shape.breaks().into_iter().map(|b| b * self.scale).collect()
    }

    /// Positivity annulus `(r0, r1)`.
    pub fn positivity_annulus(&self) -> (f64, f64) {
        (self.r0, self.r1)
    }

    /// Grid estimate of `ess inf K` over the positivity annulus.
    pub fn positivity_min(&self) -> f64 {
        self.positivity_min
    }

    /// Radial spacing of the grid behind [`Kernel::positivity_min`].
    pub fn positivity_spacing(&self) -> f64 {
        self.positivity_spacing
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `∫ K(z)|z|² dz`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    #[inline]
    pub fn eval(&self, z: &Point) -> f64 {
        let r = norm(z);
        if r > self.support_radius() {
            return 0.0;
        }
        let inv = 1.0 / self.scale;
        let zs = scale(inv, z);
        self.shape.eval(self.dim, &zs, r * inv) * inv.powi(self.dim as i32)
    }

    /// Radial profile `ρ ↦ K(ρ e₁)`; exact for radial kernels.
    #[inline]
    pub fn profile(&self, rho: f64) -> f64 {
        let mut z = ORIGIN;
        z[0] = rho;
        self.eval(&z)
    }

    /// Directions used by moment and positivity rules.
    fn directions(&self) -> Result<SphereRule> {
        if self.is_radial() {
            let mut e = ORIGIN;
            e[0] = 1.0;
            Ok(SphereRule {
                dim: self.dim,
                directions: vec![e],
                weights: vec![sphere_area(self.dim)],
            })
        } else {
            SphereRule::new(self.dim, MOMENT_ANGULAR)
        }
    }

    /// `∫ K(z)|z|^p dz`.
    fn moment(&self, p: i32) -> Result<f64> {
        let dirs = self.directions()?;
        let nodes = radial_nodes(
            0.0,
            self.support_radius(),
            &self.radial_breaks(),
            MOMENT_NODES,
            MOMENT_PANELS,
            4,
        );
        Ok(compensated_sum(dirs.directions.iter().zip(&dirs.weights).map(
            |(e, we)| {
                we * compensated_sum(nodes.iter().map(|&(r, w)| {
                    w * r.powi(self.dim as i32 - 1 + p) * self.eval(&scale(r, e))
                }))
            },
        )))
    }

    fn sample_positivity(&self) -> (f64, f64) {
        let n = POSITIVITY_SAMPLES;
        let spacing = (self.r1 - self.r0) / (n - 1) as f64;
        let dirs = match self.directions() {
            Ok(d) => d,
            Err(_) => return (0.0, spacing),
        };
        let mut min = f64::INFINITY;
        for i in 0..n {
            let r = self.r0 + i as f64 * spacing;
            for e in &dirs.directions {
                for sign in [1.0, -1.0] {
                    min = min.min(self.eval(&scale(sign * r, e)));
                }
            }
        }
        (min, spacing)
    }

    /// Largest relative asymmetry `|K(z) − K(−z)|` over random points of
    /// the support, scaled by the peak kernel value seen.
    pub fn evenness_defect(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let r = self.support_radius();
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for _ in 0..EVENNESS_SAMPLES {
            let mut z = ORIGIN;
            for zi in z.iter_mut().take(self.dim) {
                *zi = rng.gen_range(-r..r);
            }
            let a = self.eval(&z);
            let b = self.eval(&scale(-1.0, &z));
            peak = peak.max(a).max(b);
            worst = worst.max((a - b).abs());
        }
        if peak > 0.0 {
            worst / peak
        } else {
            0.0
        }
    }

    /// Checks evenness, finite positive mass and moment, positivity on the
    /// annulus, and `r0 < σ_d r1`.
    pub fn validate(&self) -> Result<()> {
        let defect = self.evenness_defect();
        if defect > 1e-12 {
            return Err(Error::Validation(format!(
                "kernel {self} is not even: relative defect {defect:e}"
            )));
        }
        if !(self.mass.is_finite() && self.mass > 0.0 && self.second_moment.is_finite()) {
            return Err(Error::Validation(format!(
                "kernel {self} has invalid moments ({}, {})",
                self.mass, self.second_moment
            )));
        }
        if !(self.positivity_min > 0.0) {
            return Err(Error::Validation(format!(
                "kernel {self} is not positive on the annulus ({}, {})",
                self.r0, self.r1
            )));
        }
        if self.r0 >= positivity_ball_radius(self.dim, self.r1) {
            return Err(Error::Validation(format!(
                "kernel {self}: r0 = {} is not below sigma_d r1 = {}",
                self.r0,
                positivity_ball_radius(self.dim, self.r1)
            )));
        }
        Ok(())
    }
}

/// Closed-form lower bound for `K̃(z)`:
/// `(2k/|z|^{d−1}) ∫_{max(r0,|z|)}^{r1} s^{d−2}(1 − |z|/s) ds`.
///
/// Returns 0 for `|z| = r1` and an error for `|z| > r1`.
pub fn effective_kernel_lower_bound(k: &Kernel, z: &Point) -> Result<f64> {
    let rho = norm(z);
    let (r0, r1) = k.positivity_annulus();
    let tol = 1e-14 * r1;
    if rho > r1 + tol {
        return Err(invalid(
            "z",
            format!("|z| = {rho} lies outside the positivity radius {r1}"),
        ));
    }
    if rho >= r1 - tol {
        return Ok(0.0);
    }
    let kk = k.positivity_min();
    let m = r0.max(rho);
    if rho == 0.0 {
        return Ok(if k.dim() == 1 && r0 > 0.0 {
            2.0 * kk * (r1 / r0).ln()
        } else {
            f64::INFINITY
        });
    }
    let d = k.dim() as i32;
    let v = match d {
        1 => 2.0 * kk * ((r1 / m).ln() + rho * (1.0 / r1 - 1.0 / m)),
        2 => 2.0 * kk * ((r1 - m) / rho - (r1 / m).ln()),
        _ => {
            let df = d as f64;
            2.0 * kk / ((df - 1.0) * (df - 2.0) * rho.powi(d - 1))
                * ((df - 2.0) * (r1.powi(d - 1) - m.powi(d - 1))
                    - (df - 1.0) * rho * (r1.powi(d - 2) - m.powi(d - 2)))
        }
    };
    Ok(v.max(0.0))
}

/// `K̃(z) = ∫_{−1}^{1} J(r) K_{|r|}(z) dr`, with cached mass and second
/// moment.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveKernel {
    base: Kernel,
    tol: f64,
    mass: f64,
    second_moment: f64,
}

pub fn effective_kernel(k: &Kernel, tol: f64) -> Result<EffectiveKernel> {
    k.validate()?;
    ensure_positive("kernel_tol", tol)?;
    let mut e = EffectiveKernel {
        base: k.clone(),
        tol,
        mass: 0.0,
        second_moment: 0.0,
    };
    e.mass = e.moment(0)?;
    e.second_moment = e.moment(2)?;
    Ok(e)
}

impl EffectiveKernel {
    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn eval(&self, z: &Point) -> Result<f64> {
        let rho = norm(z);
        if rho == 0.0 {
            return Ok(if self.base.eval(z) > 0.0 { f64::INFINITY } else { 0.0 });
        }
        self.eval_along(rho, &scale(1.0 / rho, z))
    }

    /// `K̃(ρ e)` for a unit vector `e`:
    /// `2 ∫_{ρ/R}^1 (1 − r) r^{−d} K(ρ e / r) dr`.
    pub fn eval_along(&self, rho: f64, e: &Point) -> Result<f64> {
        let big_r = self.base.support_radius();
        if rho >= big_r {
            return Ok(0.0);
        }
        if rho <= 0.0 {
            return self.eval(&ORIGIN);
        }
        let d = self.base.dim() as i32;
        let lo = rho / big_r;
        let mut cuts: Vec<f64> = self.base.radial_breaks().iter().map(|b| rho / b).collect();
        // geometric cuts keep the adaptive rule shallow when ρ is tiny
        let mut c = lo;
        while c < 0.5 {
            c *= 4.0;
            cuts.push(c);
        }
        // scale-relative merging: ρ may be far below the absolute tolerance
        // of `breakpoints`
        cuts.retain(|&c| c > lo * (1.0 + 1e-12) && c < 1.0 - 1e-12);
        cuts.push(lo);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        let pieces = cuts;
        let g = |r: f64| (1.0 - r) * r.powi(-d) * self.base.eval(&scale(rho / r, e));
        let mut parts = Vec::with_capacity(pieces.len());
        for w in pieces.windows(2) {
            let v = adaptive_gauss(&g, w[0], w[1], self.tol, 1e-300, ADAPTIVE_DEPTH).ok_or_else(
                || Error::Quadrature(format!("effective kernel did not converge at |z| = {rho}")),
            )?;
            parts.push(v);
        }
        Ok(2.0 * compensated_sum(parts))
    }

    fn moment(&self, p: i32) -> Result<f64> {
        let dirs = self.base.directions()?;
        let nodes = radial_nodes(
            0.0,
            self.base.support_radius(),
            &self.base.radial_breaks(),
            MOMENT_NODES,
            MOMENT_PANELS,
            MOMENT_GRADING,
        );
        let d = self.base.dim() as i32;
        let mut total = Vec::with_capacity(dirs.len());
        for (e, we) in dirs.directions.iter().zip(&dirs.weights) {
            let mut acc = Vec::with_capacity(nodes.len());
            for &(r, w) in &nodes {
                acc.push(w * r.powi(d - 1 + p) * self.eval_along(r, e)?);
            }
            total.push(we * compensated_sum(acc));
        }
        Ok(compensated_sum(total))
    }

    pub fn lower_bound(&self, z: &Point) -> Result<f64> {
        effective_kernel_lower_bound(&self.base, z)
    }
}

/// Deterministic points filling `B(0, radius)` without the origin: radii
/// at cell midpoints, directions on a golden-angle spiral.
pub fn ball_sample_points(dim: usize, radius: f64, n: usize) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let rho = radius * (i as f64 + 0.5) / n as f64;
            let mut p = ORIGIN;
            match dim {
                1 => p[0] = if i % 2 == 0 { rho } else { -rho },
                2 => {
                    let t = golden * i as f64;
                    p[0] = rho * t.cos();
                    p[1] = rho * t.sin();
                }
                _ => {
                    let zc = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let s = (1.0 - zc * zc).sqrt();
                    let t = golden * i as f64;
                    p = [rho * s * t.cos(), rho * s * t.sin(), rho * zc];
                }
            }
            p
        })
        .collect()
}
