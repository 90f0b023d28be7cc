//! One-dimensional rate functional `E_h`, its limit `E_0`, and the lower
//! and upper bounds that bracket it.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{ensure_positive, invalid, Result};
use crate::functions::{check_field_dim, mean_over, mean_over_with, ScalarField, N_MIN};
use crate::integrands::{lambda_h_with, ConvexIntegrand};
use crate::parallel::map_indexed;
use crate::quadrature::{
    breakpoints, composite_nodes, gauss_legendre, refine_until, GaussLegendre, NeumaierSum,
    QuadratureScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy1DResult {
    pub value: f64,
    /// `0` for the limit functional.
    pub h: f64,
    pub est_error: f64,
    pub nodes: usize,
    pub refinements: u32,
    /// Support interval `(a, b)` of the field.
    pub interval: (f64, f64),
}

fn interval(u: &ScalarField) -> (f64, f64) {
    (u.support().lo[0], u.support().hi[0])
}

/// Panel edges for `x ↦ f(u(x)) − f(D_hU(x))` on `[a − h, b]`: every
/// breakpoint `p` of `u` and its shift `p − h`.
fn e_h_breaks(u: &ScalarField, h: f64) -> Vec<f64> {
    let (a, b) = interval(u);
    let cuts = u.breakpoints(0).iter().flat_map(|&p| [p, p - h]);
    breakpoints(a - h, b, cuts)
}

/// Weighted compensated sum over a node list, optionally in parallel by
/// chunks; the reduction order is fixed.
fn sum_nodes<G>(nodes: &[(f64, f64)], parallel: bool, g: G) -> f64
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    const CHUNK: usize = 256;
    let chunks = nodes.len().div_ceil(CHUNK);
    let parts = map_indexed(chunks, parallel, |c| {
        let mut s = NeumaierSum::default();
        for &(x, w) in &nodes[c * CHUNK..((c + 1) * CHUNK).min(nodes.len())] {
            s.add(w * g(x));
        }
        s.value()
    });
    parts.into_iter().collect::<NeumaierSum>().value()
}

/// Rule for the moving average on refinement level `level`; it grows with
/// the level so the refinement estimate also sees the inner error.
fn inner_rule(q: &QuadratureScheme, level: u32) -> Arc<GaussLegendre> {
    gauss_legendre(q.inner_nodes << level.min(4))
}

/// `E_h` on a fixed panel level, without refinement.
pub(crate) fn energy_e_h_level(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    h: f64,
    q: &QuadratureScheme,
    level: u32,
    parallel: bool,
) -> (f64, usize) {
    let nodes = composite_nodes(&e_h_breaks(u, h), q.panel_width, q.gauss_nodes, level);
    let inner = inner_rule(q, level);
    let s = sum_nodes(&nodes, parallel, |x| {
        let ux = u.value(&[x, 0.0, 0.0]);
        fi.f(ux) - fi.f(mean_over_with(u, x, h, &inner))
    });
    (s / (h * h), nodes.len())
}

/// `E_h(u) = h^{-2} ∫_{a−h}^{b} [f(u) − f(D_hU)] dx`, with panels halved
/// until the relative change drops below `q.tol`.
pub fn energy_e_h(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    h: f64,
    q: &QuadratureScheme,
) -> Result<Energy1DResult> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    let mut nodes = 0;
    let r = refine_until(q.tol, q.max_refinements, |lvl| {
        let (v, n) = energy_e_h_level(u, fi, h, q, lvl, q.parallel);
        nodes = n;
        Ok(v)
    })?;
    Ok(Energy1DResult {
        value: r.value,
        h,
        est_error: r.est_error,
        nodes,
        refinements: r.levels,
        interval: interval(u),
    })
}

/// Refined 1-D integral of `g` over the support of `u`, split at its
/// breakpoints.
fn support_integral<G>(u: &ScalarField, q: &QuadratureScheme, g: G) -> Result<(f64, f64, usize, u32)>
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    let (a, b) = interval(u);
    let breaks = breakpoints(a, b, u.breakpoints(0).iter().copied());
    let mut nodes = 0;
    let r = refine_until(q.tol, q.max_refinements, |lvl| {
        let pts = composite_nodes(&breaks, q.panel_width, q.gauss_nodes, lvl);
        nodes = pts.len();
        Ok(sum_nodes(&pts, q.parallel, &g))
    })?;
    Ok((r.value, r.est_error, nodes, r.levels))
}

/// `E_0(u) = (1/24) ∫ f''(u) |u'|² dx`.
pub fn energy_e_0(u: &ScalarField, fi: &ConvexIntegrand, q: &QuadratureScheme) -> Result<Energy1DResult> {
    check_field_dim(u, 1)?;
    let (v, err, nodes, levels) = support_integral(u, q, |x| {
        let p = [x, 0.0, 0.0];
        let du = u.gradient(&p)[0];
        fi.d2f(u.value(&p)) * du * du
    })?;
    Ok(Energy1DResult {
        value: v / 24.0,
        h: 0.0,
        est_error: err / 24.0,
        nodes,
        refinements: levels,
        interval: interval(u),
    })
}

/// `‖u'‖²_{L²}`.
pub fn dirichlet_energy(u: &ScalarField, q: &QuadratureScheme) -> Result<f64> {
    check_field_dim(u, 1)?;
    Ok(support_integral(u, q, |x| u.gradient(&[x, 0.0, 0.0])[0].powi(2))?.0)
}

/// `(c/2) ‖u'‖²` with `c` the upper bound on `f''`.
pub fn upper_bound_check(u: &ScalarField, fi: &ConvexIntegrand, q: &QuadratureScheme) -> Result<f64> {
    let c = fi
        .f2_upper
        .ok_or_else(|| invalid("integrand", format!("{} has no upper bound on f''", fi.name())))?;
    Ok(0.5 * c * dirichlet_energy(u, q)?)
}

/// Gauss nodes on `[lo, hi]` split at `cuts`, each piece cut into `2^level`
/// equal panels.
fn split_nodes(lo: f64, hi: f64, cuts: &[f64], n: usize, level: u32) -> Vec<(f64, f64)> {
    if hi <= lo {
        return Vec::new();
    }
    let pts = breakpoints(lo, hi, cuts.iter().copied());
    composite_nodes(&pts, f64::INFINITY, n, level)
}

/// `(γ/4) ∫∫ J_h(r) ((u(y + r) − u(y))/h)² dr dy`.
pub fn lower_bound_jh(u: &ScalarField, gamma: f64, h: f64, q: &QuadratureScheme) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    let (a, b) = interval(u);
    let ub = u.breakpoints(0).to_vec();
    let outer_breaks = breakpoints(a - h, b + h, ub.iter().flat_map(|&p| [p, p - h, p + h]));
    let val = |y: f64| u.value(&[y, 0.0, 0.0]);
    let r = refine_until(q.tol, q.max_refinements, |lvl| {
        let outer = composite_nodes(&outer_breaks, q.panel_width, q.gauss_nodes, lvl);
        let s = sum_nodes(&outer, q.parallel, |y| {
            let uy = val(y);
            let mut cuts: Vec<f64> = ub.iter().map(|&p| p - y).collect();
            cuts.push(0.0);
            let inner = split_nodes(-h, h, &cuts, q.inner_nodes, lvl);
            let mut s = NeumaierSum::default();
            for (r, w) in inner {
                let d = (val(y + r) - uy) / h;
                s.add(w * (1.0 - (r / h).abs()) / h * d * d);
            }
            s.value()
        });
        Ok(s)
    })?;
    Ok(0.25 * gamma * r.value)
}

/// Smooth compactly supported test function `φ(x, y)` for the dual bound.
#[derive(Clone)]
pub struct DualTestFunction {
    /// `(x_lo, x_hi, y_lo, y_hi)`; `φ` vanishes outside.
    pub support: [f64; 4],
    pub label: String,
    eval: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for DualTestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualTestFunction")
            .field("label", &self.label)
            .field("support", &self.support)
            .finish()
    }
}

impl DualTestFunction {
    pub fn new<F>(support: [f64; 4], label: impl Into<String>, eval: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(support[0] < support[1] && support[2] < support[3]) {
            return Err(invalid("support", "empty test-function box"));
        }
        Ok(Self {
            support,
            label: label.into(),
            eval: Arc::new(eval),
        })
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let [x0, x1, y0, y1] = self.support;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            0.0
        } else {
            (self.eval)(x, y)
        }
    }
}

/// C^∞ step from 0 (`t ≤ 0`) to 1 (`t ≥ 1`).
fn smooth_step(t: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let (p, q) = (psi(t), psi(1.0 - t));
    if p + q == 0.0 {
        0.0
    } else {
        p / (p + q)
    }
}

/// C^∞ window equal to 1 on `[lo, hi]` and vanishing outside
/// `(lo − w, hi + w)`.
pub fn plateau(x: f64, lo: f64, hi: f64, w: f64) -> f64 {
    smooth_step((x - lo + w) / w) * smooth_step((hi + w - x) / w)
}

/// Five bundled test functions for `u` and `h`, built on a plateau
/// window that equals 1 where `E_h` has mass.
pub fn dual_test_library(u: &ScalarField, fi: &ConvexIntegrand, h: f64) -> Result<Vec<DualTestFunction>> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    let (a, b) = interval(u);
    let (lo, hi) = (a - h, b + h);
    let w = 0.25 * (b - a) + h;
    let sup = [lo - w, hi + w, lo - w, hi + w];
    let eta = move |t: f64| plateau(t, lo, hi, w);
    let gamma = fi.gamma;
    let uu = u.clone();
    let residual = move |x: f64, y: f64| {
        (uu.value(&[y, 0.0, 0.0]) - mean_over(&uu, x, h, N_MIN)) / h
    };
    let r2 = residual.clone();
    Ok(vec![
        DualTestFunction::new(sup, "shear", move |x, y| eta(x) * (y - x) / h)?,
        DualTestFunction::new(sup, "residual_gamma", move |x, y| {
            gamma * residual(x, y) * eta(x) * eta(y)
        })?,
        DualTestFunction::new(sup, "residual_half_gamma", move |x, y| {
            0.5 * gamma * r2(x, y) * eta(x) * eta(y)
        })?,
        DualTestFunction::new(sup, "oscillation", move |x, y| {
            eta(x) * eta(y) * (2.0 * std::f64::consts::PI * (y - x) / h).sin()
        })?,
        DualTestFunction::new(sup, "constant", move |x, y| 0.5 * eta(x) * eta(y))?,
    ])
}

/// `∫ ⨍_x^{x+h} [ (u(y) − D_hU(x))/h · φ − φ²/(4 λ_h) ] dy dx` with
/// `λ_h = λ(D_hU(x), u(y))`.
pub fn dual_lower_bound(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    h: f64,
    phi: &DualTestFunction,
    q: &QuadratureScheme,
) -> Result<f64> {
    ensure_positive("h", h)?;
    check_field_dim(u, 1)?;
    let [x0, x1, y0, y1] = phi.support;
    let ub = u.breakpoints(0).to_vec();
    let mut ycuts = ub.clone();
    ycuts.extend([y0, y1]);
    let xb = breakpoints(
        x0,
        x1,
        ycuts.iter().flat_map(|&p| [p, p - h]).collect::<Vec<_>>(),
    );
    let theta = q.theta_nodes;
    let r = refine_until(q.tol, q.max_refinements, |lvl| {
        let outer = composite_nodes(&xb, q.panel_width, q.gauss_nodes, lvl);
        let rule = inner_rule(q, lvl);
        Ok(sum_nodes(&outer, q.parallel, |x| {
            let dh = mean_over_with(u, x, h, &rule);
            let inner = split_nodes(x, x + h, &ycuts, q.inner_nodes, lvl);
            let mut s = NeumaierSum::default();
            for (y, w) in inner {
                let p = phi.eval(x, y);
                if p == 0.0 {
                    continue;
                }
                let uy = u.value(&[y, 0.0, 0.0]);
                let lam = lambda_h_with(fi, dh, uy, theta);
                s.add(w * ((uy - dh) / h * p - p * p / (4.0 * lam)));
            }
            s.value() / h
        }))
    })?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseRow {
    pub h: f64,
    pub e_h: f64,
    pub e_0: f64,
    pub error: f64,
    pub est_error: f64,
}

/// `|E_h − E_0|` over a list of `h`.
pub fn pointwise_error(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    h_list: &[f64],
    q: &QuadratureScheme,
) -> Result<Vec<PointwiseRow>> {
    if h_list.is_empty() {
        return Err(invalid("h_list", "empty"));
    }
    let e0 = energy_e_0(u, fi, q)?;
    h_list
        .iter()
        .map(|&h| {
            let eh = energy_e_h(u, fi, h, q)?;
            Ok(PointwiseRow {
                h,
                e_h: eh.value,
                e_0: e0.value,
                error: (eh.value - e0.value).abs(),
                est_error: eh.est_error + e0.est_error,
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`; points with `y = 0` are
/// skipped.
pub fn fitted_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
