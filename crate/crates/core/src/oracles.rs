//! Independent reference computations: a Fourier oracle for quadratic
//! `E_h`, brute-force trapezoid rules, and plain Monte Carlo.
//!
//! Nothing here shares an integration routine with the main evaluators.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::functions::{check_field_dim, ScalarField};
use crate::geometry::{dot, norm, quad_form, Point, ORIGIN};
use crate::integrands::{ConvexIntegrand, IntegrandKind};
use crate::kernels::{ball_volume, Kernel};
use crate::quadrature::sphere_area;

/// Largest number of integrand evaluations a brute-force oracle may spend.
pub const MAX_EVALUATIONS: u64 = 4_000_000_000;
/// Spectral oracle sample count and zero-padding factor.
pub const SPECTRAL_SAMPLES: usize = 1 << 18;
pub const SPECTRAL_PADDING: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub oracle: String,
    pub reference: f64,
    pub main: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub resolution: BTreeMap<String, f64>,
}

impl OracleReport {
    pub fn new(oracle: impl Into<String>, reference: f64, main: f64) -> Self {
        let abs_diff = (main - reference).abs();
        Self {
            oracle: oracle.into(),
            reference,
            main,
            abs_diff,
            rel_diff: relative(abs_diff, reference),
            resolution: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.resolution.insert(key.to_string(), v);
        self
    }

    /// Whether the stored discrepancies match the two values.
    pub fn is_consistent(&self) -> bool {
        let a = (self.main - self.reference).abs();
        a == self.abs_diff && relative(a, self.reference) == self.rel_diff
    }
}

fn relative(abs: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        abs
    } else {
        abs / reference.abs()
    }
}

fn budget(evals: u64) -> Result<()> {
    if evals > MAX_EVALUATIONS {
        return Err(Error::ResourceLimit(format!(
            "{evals} evaluations requested, limit {MAX_EVALUATIONS}"
        )));
    }
    Ok(())
}

/// Composite trapezoid rule with `n ≥ 2` nodes.
pub fn trapezoid<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let n = n.max(2);
    let dx = (b - a) / (n - 1) as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n - 1 {
        s += f(a + i as f64 * dx);
    }
    s * dx
}

/// `E_h(u) = h^{-2} ∫ |û(k)|² (1 − sinc²(kh/2)) dk/(2π)` for `f(t) = t²`,
/// from an FFT of zero-padded samples placed so that both support edges
/// fall on nodes.
pub fn spectral_e_h_quadratic(u: &ScalarField, fi: &ConvexIntegrand, h: f64) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    if fi.kind != IntegrandKind::Quadratic {
        return Err(invalid("integrand", "the spectral oracle needs f(t) = t²"));
    }
    let (a, b) = (u.support().lo[0], u.support().hi[0]);
    let n = SPECTRAL_SAMPLES;
    let len = SPECTRAL_PADDING * (b - a);
    let dx = len / n as f64;
    let start = a - 0.5 * (SPECTRAL_PADDING - 1.0) * (b - a);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|j| Complex::new(u.value(&[start + j as f64 * dx, 0.0, 0.0]), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut s = 0.0;
    for (j, c) in buf.iter().enumerate() {
        let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let k = 2.0 * PI * m / len;
        s += dx * dx * c.norm_sqr() / len * one_minus_sinc_sq(0.5 * k * h);
    }
    Ok(s / (h * h))
}

fn one_minus_sinc_sq(s: f64) -> f64 {
    if s.abs() < 1e-3 {
        let s2 = s * s;
        s2 / 3.0 - 2.0 * s2 * s2 / 45.0
    } else {
        let c = s.sin() / s;
        1.0 - c * c
    }
}

/// `λ(a, b)` by an `n`-node trapezoid rule in θ.
pub fn bruteforce_lambda(fi: &ConvexIntegrand, a: f64, b: f64, n: usize) -> Result<f64> {
    budget(n as u64)?;
    Ok(trapezoid(0.0, 1.0, n, |t| (1.0 - t) * fi.d2f((1.0 - t) * a + t * b)))
}

/// `(U(x + h) − U(x))/h` by an `n`-node trapezoid rule.
pub fn bruteforce_moving_average(u: &ScalarField, h: f64, x: f64, n: usize) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    budget(n as u64)?;
    Ok(trapezoid(x, x + h, n, |y| u.value(&[y, 0.0, 0.0])) / h)
}

/// `(1/24) ∫ f''(u) u'²` with centered differences of values (no gradient
/// evaluator) and `n` trapezoid nodes.
pub fn bruteforce_e_0(u: &ScalarField, fi: &ConvexIntegrand, n: usize) -> Result<f64> {
    check_field_dim(u, 1)?;
    budget(3 * n as u64)?;
    let (a, b) = (u.support().lo[0], u.support().hi[0]);
    let d = 1e-6 * (b - a);
    let v = |x: f64| u.value(&[x, 0.0, 0.0]);
    Ok(trapezoid(a, b, n, |x| {
        // one-sided at the ends so the stencil never crosses the support edge
        let (l, r) = ((x - d).max(a), (x + d).min(b));
        let du = (v(r) - v(l)) / (r - l);
        fi.d2f(v(x)) * du * du
    }) / 24.0)
}

/// `E_h` with an `n`-node outer and `m`-node inner trapezoid rule.
pub fn bruteforce_e_h(u: &ScalarField, fi: &ConvexIntegrand, h: f64, n: usize, m: usize) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    budget(n as u64 * m as u64)?;
    let (a, b) = (u.support().lo[0], u.support().hi[0]);
    let v = |x: f64| u.value(&[x, 0.0, 0.0]);
    let s = trapezoid(a - h, b, n, |x| {
        let avg = trapezoid(x, x + h, m, v) / h;
        fi.f(v(x)) - fi.f(avg)
    });
    Ok(s / (h * h))
}

/// `K̃(z)` by an `n`-node trapezoid rule in `r` on `[|z|/R, 1]`.
pub fn bruteforce_effective_kernel(k: &Kernel, z: &Point, n: usize) -> Result<f64> {
    budget(n as u64)?;
    let rho = norm(z);
    let big_r = k.support_radius();
    if rho >= big_r {
        return Ok(0.0);
    }
    let d = k.dim() as i32;
    let lo = rho / big_r;
    Ok(2.0
        * trapezoid(lo, 1.0, n, |r| {
            let mut y = ORIGIN;
            for i in 0..3 {
                y[i] = z[i] / r;
            }
            (1.0 - r) * r.powi(-d) * k.eval(&y)
        }))
}

/// `∫ K̃(z)|z|^p dz` from its definition as a double integral,
/// `2 ∫_0^1 (1 − r) ∫ r^{−d} K(z/r) |z|^p dz dr`, with the inner integral in
/// polar form; radial kernels only.
pub fn bruteforce_effective_moment(k: &Kernel, p: i32, n_r: usize, n_rho: usize) -> Result<f64> {
    if !k.is_radial() {
        return Err(invalid("kernel", "nested oracle needs a radial kernel"));
    }
    budget(n_r as u64 * n_rho as u64)?;
    let d = k.dim() as i32;
    let big_r = k.support_radius();
    let area = sphere_area(k.dim());
    Ok(2.0
        * trapezoid(0.0, 1.0, n_r, |r| {
            if r == 0.0 {
                return 0.0;
            }
            let inner = trapezoid(0.0, r * big_r, n_rho, |rho| {
                rho.powi(d - 1 + p) * k.profile(rho / r)
            });
            (1.0 - r) * r.powi(-d) * area * inner
        }))
}

/// `∫ K(z)|z|^p dz` for a radial kernel by trapezoid in the radius.
pub fn bruteforce_kernel_moment(k: &Kernel, p: i32, n: usize) -> Result<f64> {
    budget(n as u64)?;
    let d = k.dim() as i32;
    Ok(sphere_area(k.dim())
        * trapezoid(0.0, k.support_radius(), n, |rho| rho.powi(d - 1 + p) * k.profile(rho)))
}

/// `F_h` in one dimension by an `n × n` trapezoid rule in `(x, z)`.
pub fn bruteforce_f_h_1d(u: &ScalarField, fi: &ConvexIntegrand, k: &Kernel, h: f64, n: usize) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    budget(n as u64 * n as u64)?;
    let big_r = k.support_radius();
    let (a, b) = (u.support().lo[0] - h * big_r, u.support().hi[0] + h * big_r);
    let v = |x: f64| u.value(&[x, 0.0, 0.0]);
    Ok(trapezoid(-big_r, big_r, n, |z| {
        let kz = k.eval(&[z, 0.0, 0.0]);
        if kz == 0.0 {
            return 0.0;
        }
        // the difference quotient at z = 0 is its limit |u'|
        let s = if z == 0.0 { 1e-7 } else { h * z };
        kz * trapezoid(a, b, n, |x| fi.f((v(x + s) - v(x)).abs() / s.abs()))
    }))
}

/// Plain Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

fn uniform_in_ball<R: Rng>(dim: usize, radius: f64, rng: &mut R) -> Point {
    loop {
        let mut z = ORIGIN;
        for zi in z.iter_mut().take(dim) {
            *zi = rng.gen_range(-radius..radius);
        }
        if norm(&z) <= radius {
            return z;
        }
    }
}

fn monte_carlo<G>(samples: usize, seed: u64, volume: f64, mut g: G) -> Result<McEstimate>
where
    G: FnMut(&mut ChaCha8Rng) -> f64,
{
    if samples < 2 {
        return Err(invalid("samples", "need at least 2"));
    }
    budget(samples as u64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..samples {
        let v = g(&mut rng);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(McEstimate {
        value: volume * mean,
        std_error: volume * (var / samples as f64).sqrt(),
        samples,
        seed,
    })
}

fn support_volume(u: &ScalarField, pad: f64) -> (Vec<(f64, f64)>, f64) {
    let s = u.support();
    let ranges: Vec<(f64, f64)> = (0..u.dim()).map(|i| (s.lo[i] - pad, s.hi[i] + pad)).collect();
    let vol = ranges.iter().map(|(a, b)| b - a).product();
    (ranges, vol)
}

/// `F_h` by uniform sampling of `x` in the padded support and `z` in the
/// kernel support.
pub fn monte_carlo_f_h(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    ensure_positive("h", h)?;
    check_field_dim(u, k.dim())?;
    let dim = u.dim();
    let big_r = k.support_radius();
    let (ranges, xvol) = support_volume(u, h * big_r);
    let zvol = ball_volume(dim) * big_r.powi(dim as i32);
    monte_carlo(samples, seed, xvol * zvol, |rng| {
        let mut x = ORIGIN;
        for (i, &(a, b)) in ranges.iter().enumerate() {
            x[i] = rng.gen_range(a..b);
        }
        let z = uniform_in_ball(dim, big_r, rng);
        let r = norm(&z);
        if r == 0.0 {
            return 0.0;
        }
        let mut y = x;
        for i in 0..dim {
            y[i] += h * z[i];
        }
        k.eval(&z) * fi.f((u.value(&y) - u.value(&x)).abs() / (h * r))
    })
}

/// `𝓔_0` by uniform sampling of `(x, z)`.
pub fn monte_carlo_limit(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_field_dim(u, k.dim())?;
    let dim = u.dim();
    let big_r = k.support_radius();
    let (ranges, xvol) = support_volume(u, 0.0);
    let zvol = ball_volume(dim) * big_r.powi(dim as i32);
    monte_carlo(samples, seed, xvol * zvol / 24.0, |rng| {
        let mut x = ORIGIN;
        for (i, &(a, b)) in ranges.iter().enumerate() {
            x[i] = rng.gen_range(a..b);
        }
        let z = uniform_in_ball(dim, big_r, rng);
        let r = norm(&z);
        if r == 0.0 {
            return 0.0;
        }
        let mut e = ORIGIN;
        for i in 0..dim {
            e[i] = z[i] / r;
        }
        k.eval(&z) * r * r * fi.d2f(dot(&u.gradient(&x), &e).abs()) * quad_form(&u.hessian(&x), &e).powi(2)
    })
}
