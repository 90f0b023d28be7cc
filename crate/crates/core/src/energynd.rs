//! d-dimensional functionals `F_h`, `F_0`, the rate functional `𝓔_h`, its
//! limit `𝓔_0`, the slicing evaluator, and the `K̃` lower-bound form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy1d::energy_e_h_level;
use crate::error::{ensure_positive, invalid, Error, Result};
use crate::functions::{check_field_dim, LineSlice, ScalarField};
use crate::geometry::{dot, frobenius_sq, norm, orthonormal_complement, quad_form, scale, Point, ORIGIN};
use crate::integrands::ConvexIntegrand;
use crate::kernels::{ball_volume, EffectiveKernel, Kernel};
use crate::parallel::try_map_indexed;
use crate::quadrature::{
    breakpoints, compensated_sum, composite_nodes, radial_nodes, QuadratureScheme, SphereRule,
    TensorRule, ZBackend,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Sliced,
    /// Radial-kernel form with the sphere average factored out.
    Factorized,
}

/// Quadrature bookkeeping attached to each d-dimensional result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdReport {
    pub x_nodes: usize,
    pub z_nodes: usize,
    pub sphere_nodes: usize,
    pub mc_seed: Option<u64>,
    pub mc_samples: Option<usize>,
    /// Stratified Monte Carlo standard error of the z-integral.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyNDResult {
    pub value: f64,
    pub h: f64,
    pub method: Method,
    pub report: NdReport,
}

/// Discretized z-integral over `B(0, R)`: node, weight (without the kernel),
/// radius index, and Monte Carlo stratum.
#[derive(Debug, Clone)]
struct ZRule {
    radii: Vec<f64>,
    nodes: Vec<ZNode>,
    sphere_nodes: usize,
    mc: Option<(u64, usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
struct ZNode {
    z: Point,
    dir: Point,
    weight: f64,
    radius: usize,
    stratum: usize,
}

fn z_rule(k: &Kernel, q: &QuadratureScheme) -> Result<ZRule> {
    z_rule_graded(k, q, q.radial_grading)
}

fn z_rule_graded(k: &Kernel, q: &QuadratureScheme, grading: u32) -> Result<ZRule> {
    let dim = k.dim();
    let big_r = k.support_radius();
    match q.z_backend {
        ZBackend::Tensor => {
            let radial = radial_nodes(
                0.0,
                big_r,
                &k.radial_breaks(),
                q.radial_nodes,
                q.radial_panels,
                grading,
            );
            let mut sphere = SphereRule::new(dim, q.angular_nodes)?;
            if k.is_radial() {
                // every integrand here is invariant under z ↦ −z once x is
                // translated by hz, so one hemisphere with doubled weights
                // suffices; the sphere rules are antipodally symmetric
                sphere = hemisphere(&sphere);
            }
            let mut nodes = Vec::with_capacity(radial.len() * sphere.len());
            for (ri, &(r, wr)) in radial.iter().enumerate() {
                let wr = wr * r.powi(dim as i32 - 1);
                for (e, we) in sphere.directions.iter().zip(&sphere.weights) {
                    nodes.push(ZNode {
                        z: scale(r, e),
                        dir: *e,
                        weight: wr * we,
                        radius: ri,
                        stratum: 0,
                    });
                }
            }
            Ok(ZRule {
                radii: radial.iter().map(|p| p.0).collect(),
                nodes,
                sphere_nodes: sphere.len(),
                mc: None,
            })
        }
        ZBackend::MonteCarlo {
            samples,
            strata,
            seed,
        } => {
            if strata == 0 || samples < strata {
                return Err(invalid("z_backend", "need samples >= strata >= 1"));
            }
            let per = samples / strata;
            let vol = ball_volume(dim) * big_r.powi(dim as i32) / strata as f64;
            let mut radii = Vec::with_capacity(per * strata);
            let mut nodes = Vec::with_capacity(per * strata);
            for s in 0..strata {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                for _ in 0..per {
                    let t: f64 = (s as f64 + rng.gen::<f64>()) / strata as f64;
                    let r = big_r * t.powf(1.0 / dim as f64);
                    let e = random_direction(dim, &mut rng);
                    nodes.push(ZNode {
                        z: scale(r, &e),
                        dir: e,
                        weight: vol / per as f64,
                        radius: radii.len(),
                        stratum: s,
                    });
                    radii.push(r);
                }
            }
            Ok(ZRule {
                radii,
                nodes,
                sphere_nodes: 0,
                mc: Some((seed, per * strata, strata)),
            })
        }
    }
}

fn hemisphere(rule: &SphereRule) -> SphereRule {
    let upper = |e: &Point| {
        e.iter()
            .find(|c| c.abs() > 1e-12)
            .is_some_and(|&c| c > 0.0)
    };
    let (directions, weights) = rule
        .directions
        .iter()
        .zip(&rule.weights)
        .filter(|(e, _)| upper(e))
        .map(|(e, w)| (*e, 2.0 * w))
        .unzip();
    SphereRule {
        dim: rule.dim,
        directions,
        weights,
    }
}

fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Point {
    match dim {
        1 => {
            if rng.gen::<bool>() {
                [1.0, 0.0, 0.0]
            } else {
                [-1.0, 0.0, 0.0]
            }
        }
        2 => {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            [t.cos(), t.sin(), 0.0]
        }
        _ => {
            let c: f64 = rng.gen_range(-1.0..1.0);
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - c * c).sqrt();
            [s * t.cos(), s * t.sin(), c]
        }
    }
}

/// Composite tensor rule on the hull of the support and its translate by
/// `−shift`, split where `u(x)` or `u(x + shift)` may lose smoothness.
fn x_rule(u: &ScalarField, shift: &Point, q: &QuadratureScheme) -> TensorRule {
    let s = u.support();
    let axes = (0..u.dim())
        .map(|i| {
            let lo = s.lo[i].min(s.lo[i] - shift[i]);
            let hi = s.hi[i].max(s.hi[i] - shift[i]);
            let cuts = u.breakpoints(i).iter().flat_map(|&p| [p, p - shift[i]]);
            let b = breakpoints(lo, hi, cuts);
            composite_nodes(&b, q.nd_panel_width, q.nd_gauss_nodes, 0)
        })
        .collect();
    TensorRule { dim: u.dim(), axes }
}

/// `Σ_z w_z c_z ∫_x g(x, z)`, parallel over z with an ordered reduction.
/// `coeff` maps a node to its kernel factor; nodes with factor 0 are skipped.
fn integrate_xz<C, G>(
    u: &ScalarField,
    rule: &ZRule,
    shift_scale: f64,
    q: &QuadratureScheme,
    coeff: C,
    g: G,
) -> Result<(f64, usize, Option<f64>)>
where
    C: Fn(&ZNode) -> Result<f64> + Sync + Send,
    G: Fn(&Point, &ZNode) -> f64 + Sync + Send,
{
    let parts = try_map_indexed(rule.nodes.len(), q.parallel, |i| -> Result<(f64, usize)> {
        let node = &rule.nodes[i];
        let c = coeff(node)?;
        if c == 0.0 {
            return Ok((0.0, 0));
        }
        let xr = x_rule(u, &scale(shift_scale, &node.z), q);
        Ok((node.weight * c * xr.integrate(|x| g(x, node)), xr.len()))
    })?;
    let x_nodes = parts.iter().map(|p| p.1).max().unwrap_or(0);
    let value = compensated_sum(parts.iter().map(|p| p.0));
    let std_error = rule.mc.map(|(_, _, strata)| stratified_error(rule, &parts, strata));
    Ok((value, x_nodes, std_error))
}

fn stratified_error(rule: &ZRule, parts: &[(f64, usize)], strata: usize) -> f64 {
    let mut var = 0.0;
    for s in 0..strata {
        let vals: Vec<f64> = rule
            .nodes
            .iter()
            .zip(parts)
            .filter(|(n, _)| n.stratum == s)
            .map(|(_, p)| p.0)
            .collect();
        let n = vals.len() as f64;
        if n < 2.0 {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / n;
        let sample_var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var += n * sample_var;
    }
    var.sqrt()
}

fn report(rule: &ZRule, x_nodes: usize, std_error: Option<f64>) -> NdReport {
    NdReport {
        x_nodes,
        z_nodes: rule.nodes.len(),
        sphere_nodes: rule.sphere_nodes,
        mc_seed: rule.mc.map(|m| m.0),
        mc_samples: rule.mc.map(|m| m.1),
        std_error,
    }
}

/// Kernel factor per node; radial kernels are evaluated once per radius.
fn kernel_weights(k: &Kernel, rule: &ZRule) -> Option<Vec<f64>> {
    k.is_radial()
        .then(|| rule.radii.iter().map(|&r| k.profile(r)).collect())
}

fn check_inputs(u: &ScalarField, k: &Kernel, q: &QuadratureScheme) -> Result<()> {
    check_field_dim(u, k.dim())?;
    q.validate()
}

#[inline]
fn difference_quotient(u: &ScalarField, x: &Point, ux: f64, node: &ZNode, h: f64) -> f64 {
    let r = norm(&node.z);
    let mut y = *x;
    for i in 0..u.dim() {
        y[i] += h * node.z[i];
    }
    (u.value(&y) - ux).abs() / (h * r)
}

/// `F_h(u) = ∫∫ K(z) f(|u(x + hz) − u(x)|/(h|z|)) dz dx`.
pub fn energy_f_h(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    h: f64,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    ensure_positive("h", h)?;
    check_inputs(u, k, q)?;
    let rule = z_rule(k, q)?;
    let kw = kernel_weights(k, &rule);
    let (value, xn, se) = integrate_xz(
        u,
        &rule,
        h,
        q,
        |n| Ok(kw.as_ref().map_or_else(|| k.eval(&n.z), |w| w[n.radius])),
        |x, n| fi.f(difference_quotient(u, x, u.value(x), n, h)),
    )?;
    Ok(EnergyNDResult {
        value,
        h,
        method: Method::Direct,
        report: report(&rule, xn, se),
    })
}

fn support_rule(u: &ScalarField, q: &QuadratureScheme) -> TensorRule {
    x_rule(u, &ORIGIN, q)
}

/// `F_0(u) = ∫∫ K(z) f(|∇u(x)·ẑ|) dz dx`; radial kernels use
/// `‖K‖₁ ∫ ⨍_S f(|∇u·e|) de dx`.
pub fn energy_f_0(u: &ScalarField, fi: &ConvexIntegrand, k: &Kernel, q: &QuadratureScheme) -> Result<EnergyNDResult> {
    check_inputs(u, k, q)?;
    if k.is_radial() {
        let sphere = SphereRule::new(u.dim(), q.angular_nodes)?;
        let xr = support_rule(u, q);
        let v = xr.integrate(|x| {
            let g = u.gradient(x);
            sphere.average(|e| fi.f(dot(&g, e).abs()))
        });
        return Ok(EnergyNDResult {
            value: k.mass() * v,
            h: 0.0,
            method: Method::Factorized,
            report: NdReport {
                x_nodes: xr.len(),
                z_nodes: 0,
                sphere_nodes: sphere.len(),
                mc_seed: None,
                mc_samples: None,
                std_error: None,
            },
        });
    }
    energy_f_0_direct(u, fi, k, q)
}

/// `F_0` without the radial factorization.
pub fn energy_f_0_direct(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    check_inputs(u, k, q)?;
    let rule = z_rule(k, q)?;
    let (value, xn, se) = integrate_xz(u, &rule, 0.0, q, |n| Ok(k.eval(&n.z)), |x, n| {
        fi.f(dot(&u.gradient(x), &n.dir).abs())
    })?;
    Ok(EnergyNDResult {
        value,
        h: 0.0,
        method: Method::Direct,
        report: report(&rule, xn, se),
    })
}

/// `𝓔_h(u) = (F_0(u) − F_h(u))/h²` as one fused integral.
pub fn rate_functional(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    h: f64,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    ensure_positive("h", h)?;
    check_inputs(u, k, q)?;
    let rule = z_rule(k, q)?;
    let kw = kernel_weights(k, &rule);
    let inv = 1.0 / (h * h);
    let (value, xn, se) = integrate_xz(
        u,
        &rule,
        h,
        q,
        |n| Ok(kw.as_ref().map_or_else(|| k.eval(&n.z), |w| w[n.radius])),
        |x, n| {
            let ux = u.value(x);
            let local = fi.f(dot(&u.gradient(x), &n.dir).abs());
            let nonlocal = fi.f(difference_quotient(u, x, ux, n, h));
            (local - nonlocal) * inv
        },
    )?;
    Ok(EnergyNDResult {
        value,
        h,
        method: Method::Direct,
        report: report(&rule, xn, se),
    })
}

/// Offsets `ξ ∈ ẑ^⊥` on a uniform grid of spacing `dx` covering the
/// projection of a ball of radius `radius`.
fn hyperplane_grid(dim: usize, dir: &Point, radius: f64, dx: f64) -> Vec<Point> {
    let basis = orthonormal_complement(dim, dir);
    let n = (radius / dx).ceil() as i64;
    match basis.len() {
        0 => vec![ORIGIN],
        1 => (-n..=n).map(|i| scale(i as f64 * dx, &basis[0])).collect(),
        _ => {
            let mut out = Vec::new();
            for i in -n..=n {
                for j in -n..=n {
                    let (s, t) = (i as f64 * dx, j as f64 * dx);
                    if s * s + t * t > (radius + dx) * (radius + dx) {
                        continue;
                    }
                    let mut p = ORIGIN;
                    for a in 0..3 {
                        p[a] = s * basis[0][a] + t * basis[1][a];
                    }
                    out.push(p);
                }
            }
            out
        }
    }
}

/// `𝓔_h(u) = ∫_z K(z)|z|² ∫_{ξ ⊥ ẑ} E_{h|z|}(w'_{ẑ,ξ}) dξ dz` with
/// `w(t) = u(ξ + tẑ)`.
pub fn rate_functional_sliced(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    h: f64,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    ensure_positive("h", h)?;
    check_inputs(u, k, q)?;
    let rule = z_rule(k, q)?;
    let kw = kernel_weights(k, &rule);
    let dim = u.dim();
    let radius = u.support().max_corner_norm();
    let cell = q.slice_dx.powi(dim as i32 - 1);
    let parts = try_map_indexed(rule.nodes.len(), q.parallel, |i| -> Result<(f64, usize)> {
        let n = &rule.nodes[i];
        let kz = kw.as_ref().map_or_else(|| k.eval(&n.z), |w| w[n.radius]);
        if kz == 0.0 {
            return Ok((0.0, 0));
        }
        let r = norm(&n.z);
        let mut lines = Vec::new();
        let mut count = 0;
        for xi in hyperplane_grid(dim, &n.dir, radius, q.slice_dx) {
            let s = LineSlice::new(u, n.dir, xi)?;
            if s.range().is_none() {
                continue;
            }
            let w = s.derivative_field()?;
            let (e, nodes) = energy_e_h_level(&w, fi, h * r, q, 0, false);
            count += nodes;
            lines.push(e);
        }
        Ok((n.weight * kz * r * r * cell * compensated_sum(lines), count))
    })?;
    let value = compensated_sum(parts.iter().map(|p| p.0));
    let x_nodes = parts.iter().map(|p| p.1).max().unwrap_or(0);
    let se = rule.mc.map(|(_, _, s)| stratified_error(&rule, &parts, s));
    Ok(EnergyNDResult {
        value,
        h,
        method: Method::Sliced,
        report: report(&rule, x_nodes, se),
    })
}

fn require_hessian(u: &ScalarField) -> Result<()> {
    if u.has_analytic_hessian() || u.grid().is_some() {
        Ok(())
    } else {
        Err(Error::MissingDerivative("Hessian"))
    }
}

/// `𝓔_0(u) = (1/24) ∫∫ K(z)|z|² f''(|∇u·ẑ|) (ẑᵀ∇²u ẑ)² dz dx`; radial
/// kernels use the sphere-average form weighted by `∫K|z|²`.
pub fn limit_functional(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    check_inputs(u, k, q)?;
    require_hessian(u)?;
    if k.is_radial() {
        let sphere = SphereRule::new(u.dim(), q.angular_nodes)?;
        let xr = support_rule(u, q);
        let v = xr.integrate(|x| {
            let g = u.gradient(x);
            let hs = u.hessian(x);
            sphere.average(|e| fi.d2f(dot(&g, e).abs()) * quad_form(&hs, e).powi(2))
        });
        return Ok(EnergyNDResult {
            value: k.second_moment() * v / 24.0,
            h: 0.0,
            method: Method::Factorized,
            report: NdReport {
                x_nodes: xr.len(),
                z_nodes: 0,
                sphere_nodes: sphere.len(),
                mc_seed: None,
                mc_samples: None,
                std_error: None,
            },
        });
    }
    limit_functional_direct(u, fi, k, q)
}

pub fn limit_functional_direct(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    q: &QuadratureScheme,
) -> Result<EnergyNDResult> {
    check_inputs(u, k, q)?;
    require_hessian(u)?;
    let rule = z_rule(k, q)?;
    let (value, xn, se) = integrate_xz(
        u,
        &rule,
        0.0,
        q,
        |n| Ok(k.eval(&n.z) * dot(&n.z, &n.z)),
        |x, n| fi.d2f(dot(&u.gradient(x), &n.dir).abs()) * quad_form(&u.hessian(x), &n.dir).powi(2),
    )?;
    Ok(EnergyNDResult {
        value: value / 24.0,
        h: 0.0,
        method: Method::Direct,
        report: report(&rule, xn, se.map(|s| s / 24.0)),
    })
}

/// `(γ/4) ∫∫ K̃(z) [((∇u(x + hz) − ∇u(x))·ẑ)/h]² dz dx`.
pub fn lower_bound_form(
    u: &ScalarField,
    gamma: f64,
    kt: &EffectiveKernel,
    h: f64,
    q: &QuadratureScheme,
) -> Result<f64> {
    ensure_positive("h", h)?;
    let k = kt.base();
    check_inputs(u, k, q)?;
    let rule = z_rule_graded(k, q, q.effective_grading)?;
    let kw: Option<Vec<f64>> = if k.is_radial() {
        let mut e = ORIGIN;
        e[0] = 1.0;
        Some(
            rule.radii
                .iter()
                .map(|&r| kt.eval_along(r, &e))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let (value, _, _) = integrate_xz(
        u,
        &rule,
        h,
        q,
        |n| match &kw {
            Some(w) => Ok(w[n.radius]),
            None => kt.eval(&n.z),
        },
        |x, n| {
            let mut y = *x;
            for i in 0..u.dim() {
                y[i] += h * n.z[i];
            }
            let d = (dot(&u.gradient(&y), &n.dir) - dot(&u.gradient(x), &n.dir)) / h;
            d * d
        },
    )?;
    Ok(0.25 * gamma * value)
}

/// `∫ |∇²u|²_F dx`.
pub fn hessian_norm_sq(u: &ScalarField, q: &QuadratureScheme) -> Result<f64> {
    require_hessian(u)?;
    Ok(support_rule(u, q).integrate(|x| frobenius_sq(&u.hessian(x))))
}

/// `(c/2)(∫K|z|²) ∫|∇²u|²` for `f'' ≤ c`.
pub fn remcrit_upper_bound(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    q: &QuadratureScheme,
) -> Result<f64> {
    let c = fi
        .f2_upper
        .ok_or_else(|| invalid("integrand", format!("{} has no upper bound on f''", fi.name())))?;
    Ok(0.5 * c * k.second_moment() * hessian_norm_sq(u, q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Row {
    pub h: f64,
    pub value: f64,
    /// Explicit bound, when `u` has a Hessian and `f''` is bounded.
    pub upper_bound: Option<f64>,
}

/// Sweep of `𝓔_h` over `h_list` together with the explicit bound.
pub fn h2_criterion_probe(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    k: &Kernel,
    h_list: &[f64],
    q: &QuadratureScheme,
) -> Result<Vec<H2Row>> {
    if h_list.is_empty() {
        return Err(invalid("h_list", "empty"));
    }
    let bound = if u.has_analytic_hessian() && fi.f2_upper.is_some() {
        Some(remcrit_upper_bound(u, fi, k, q)?)
    } else {
        None
    };
    h_list
        .iter()
        .map(|&h| {
            Ok(H2Row {
                h,
                value: rate_functional(u, fi, k, h, q)?.value,
                upper_bound: bound,
            })
        })
        .collect()
}
