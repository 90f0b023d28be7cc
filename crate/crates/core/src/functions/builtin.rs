//! Built-in analytic test fields with exact derivatives.

use std::f64::consts::PI;

use super::ScalarField;
use crate::error::{ensure_positive, invalid, Result};
use crate::geometry::{check_dim, BoxDomain, Mat, Point, MAX_DIM, ORIGIN};

/// `φ(s) = exp(1 − 1/(1 − s))` for `s < 1`, else 0, with φ' and φ''.
/// Composed with `s = |x − c|²/R²` it gives the standard C^∞ bump of
/// height 1 supported in the ball of radius R.
#[inline]
pub fn bump_profile(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 / (1.0 - s);
    let phi = (1.0 - q).exp();
    let d1 = -phi * q * q;
    let d2 = phi * (q * q * q * q - 2.0 * q * q * q);
    (phi, d1, d2)
}

fn ball_box(center: &[f64], radius: f64) -> Result<BoxDomain> {
    let lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
    BoxDomain::new(&lo, &hi)
}

fn pad(center: &[f64]) -> Point {
    let mut c = ORIGIN;
    c[..center.len()].copy_from_slice(center);
    c
}

pub fn zero_field(dim: usize) -> Result<ScalarField> {
    check_dim(dim)?;
    Ok(ScalarField::analytic(BoxDomain::cube(dim, 0.0, 1.0)?, |_| 0.0)
        .with_gradient(|_| ORIGIN)
        .with_hessian(|_| [[0.0; MAX_DIM]; MAX_DIM])
        .with_label("zero"))
}

/// `1` on `[a, b]`, zero elsewhere.
pub fn indicator_1d(a: f64, b: f64) -> Result<ScalarField> {
    let f = ScalarField::analytic(BoxDomain::interval(a, b)?, |_| 1.0)
        .with_gradient(|_| ORIGIN)
        .with_hessian(|_| [[0.0; MAX_DIM]; MAX_DIM])
        .with_antiderivative(|x| x)?;
    Ok(f.with_label("indicator"))
}

/// `sin(π (x − a)/(b − a))` on `[a, b]`: continuous, with kinks at both ends.
pub fn sine_bump_1d(a: f64, b: f64) -> Result<ScalarField> {
    let support = BoxDomain::interval(a, b)?;
    let k = PI / (b - a);
    let f = ScalarField::analytic(support, move |x| (k * (x[0] - a)).sin())
        .with_gradient(move |x| [k * (k * (x[0] - a)).cos(), 0.0, 0.0])
        .with_hessian(move |x| {
            let mut h = [[0.0; MAX_DIM]; MAX_DIM];
            h[0][0] = -k * k * (k * (x[0] - a)).sin();
            h
        })
        .with_antiderivative(move |x| -(k * (x - a)).cos() / k)?;
    Ok(f.with_label("sine_bump"))
}

/// `A (1 − |x − c|/w)^+`.
pub fn hat_1d(center: f64, half_width: f64, amplitude: f64) -> Result<ScalarField> {
    ensure_positive("half_width", half_width)?;
    let (c, w, a) = (center, half_width, amplitude);
    let f = ScalarField::analytic(BoxDomain::interval(c - w, c + w)?, move |x| {
        a * (1.0 - (x[0] - c).abs() / w).max(0.0)
    })
    .with_gradient(move |x| [-a * (x[0] - c).signum() / w, 0.0, 0.0])
    .with_antiderivative(move |x| a * ((x - c) - (x - c) * (x - c).abs() / (2.0 * w)))?
    .with_breakpoints(0, &[c]);
    Ok(f.with_label("hat"))
}

/// C^∞ bump `A φ(|x − c|²/R²)` supported in the ball `B(c, R)`.
pub fn radial_bump(center: &[f64], radius: f64, amplitude: f64) -> Result<ScalarField> {
    monomial_bump(center, radius, amplitude, &vec![0; center.len()])
}

/// 1-D C^∞ bump on `(c − w, c + w)`.
pub fn bump_1d(center: f64, half_width: f64, amplitude: f64) -> Result<ScalarField> {
    Ok(radial_bump(&[center], half_width, amplitude)?.with_label("bump"))
}

/// k-th derivative of `t^a`.
#[inline]
fn pow_derivative(t: f64, a: u32, k: u32) -> f64 {
    if a < k {
        return 0.0;
    }
    let mut coeff = 1.0;
    for j in 0..k {
        coeff *= (a - j) as f64;
    }
    coeff * t.powi((a - k) as i32)
}

/// `A · x^α · φ(|x − c|²/R²)` with a monomial prefactor, e.g. `x·bump`
/// (`α = (1, 0)`) or `x·y·bump` (`α = (1, 1)`).
pub fn monomial_bump(
    center: &[f64],
    radius: f64,
    amplitude: f64,
    exponents: &[u32],
) -> Result<ScalarField> {
    let dim = center.len();
    check_dim(dim)?;
    ensure_positive("radius", radius)?;
    if exponents.len() != dim {
        return Err(invalid("exponents", format!("need {dim} exponents")));
    }
    let c = pad(center);
    let mut alpha = [0u32; MAX_DIM];
    alpha[..dim].copy_from_slice(exponents);
    let r2 = radius * radius;
    let a = amplitude;

    let s_of = move |x: &Point| -> f64 {
        (0..dim).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>() / r2
    };
    let mono = move |x: &Point, d: &[usize]| -> f64 {
        // mixed derivative of the monomial; `d` lists differentiated axes
        let mut p = 1.0;
        for i in 0..dim {
            let k = d.iter().filter(|&&j| j == i).count() as u32;
            p *= pow_derivative(x[i], alpha[i], k);
        }
        p
    };

    let value = move |x: &Point| a * mono(x, &[]) * bump_profile(s_of(x)).0;
    let gradient = move |x: &Point| {
        let (phi, d1, _) = bump_profile(s_of(x));
        let m = mono(x, &[]);
        let mut g = ORIGIN;
        for i in 0..dim {
            let dphi = d1 * 2.0 * (x[i] - c[i]) / r2;
            g[i] = a * (mono(x, &[i]) * phi + m * dphi);
        }
        g
    };
    let hessian = move |x: &Point| {
        let (phi, d1, d2) = bump_profile(s_of(x));
        let m = mono(x, &[]);
        let mut h: Mat = [[0.0; MAX_DIM]; MAX_DIM];
        let dphi = |i: usize| d1 * 2.0 * (x[i] - c[i]) / r2;
        for i in 0..dim {
            for j in 0..=i {
                let mut hphi = d2 * 4.0 * (x[i] - c[i]) * (x[j] - c[j]) / (r2 * r2);
                if i == j {
                    hphi += d1 * 2.0 / r2;
                }
                let v = a
                    * (mono(x, &[i, j]) * phi
                        + mono(x, &[i]) * dphi(j)
                        + mono(x, &[j]) * dphi(i)
                        + m * hphi);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    };
    Ok(ScalarField::analytic(ball_box(center, radius)?, value)
        .with_gradient(gradient)
        .with_hessian(hessian)
        .with_label(if exponents.iter().all(|&e| e == 0) {
            "radial_bump"
        } else {
            "monomial_bump"
        }))
}

/// Piecewise-linear ridge: a hat profile in `x0` times C^∞ bumps in the
/// remaining coordinates. Lies in H¹ but not in H².
pub fn hat_ridge(center: &[f64], half_width: f64, radius: f64, amplitude: f64) -> Result<ScalarField> {
    let dim = center.len();
    check_dim(dim)?;
    if dim == 1 {
        return hat_1d(center[0], half_width, amplitude);
    }
    ensure_positive("half_width", half_width)?;
    ensure_positive("radius", radius)?;
    let c = pad(center);
    let (w, a, r2) = (half_width, amplitude, radius * radius);
    let tent = move |t: f64| (1.0 - (t - c[0]).abs() / w).max(0.0);
    let value = move |x: &Point| {
        let mut v = a * tent(x[0]);
        for i in 1..dim {
            v *= bump_profile((x[i] - c[i]).powi(2) / r2).0;
        }
        v
    };
    let gradient = move |x: &Point| {
        let mut phis = [1.0; MAX_DIM];
        let mut dphis = [0.0; MAX_DIM];
        for i in 1..dim {
            let (p, d1, _) = bump_profile((x[i] - c[i]).powi(2) / r2);
            phis[i] = p;
            dphis[i] = d1 * 2.0 * (x[i] - c[i]) / r2;
        }
        let t = tent(x[0]);
        let dt = if t > 0.0 { -(x[0] - c[0]).signum() / w } else { 0.0 };
        let mut g = ORIGIN;
        for i in 0..dim {
            let mut v = a * if i == 0 { dt } else { t * dphis[i] };
            for j in 1..dim {
                if j != i {
                    v *= phis[j];
                }
            }
            g[i] = v;
        }
        g
    };
    let mut lo = vec![c[0] - w];
    let mut hi = vec![c[0] + w];
    for i in 1..dim {
        lo.push(c[i] - radius);
        hi.push(c[i] + radius);
    }
    Ok(ScalarField::analytic(BoxDomain::new(&lo, &hi)?, value)
        .with_gradient(gradient)
        .with_breakpoints(0, &[c[0]])
        .with_label("hat_ridge"))
}
