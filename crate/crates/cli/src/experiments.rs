use nonlocal_rate::energy1d::{
    dual_lower_bound, dual_test_library, energy_e_h, fitted_order, lower_bound_jh, pointwise_error,
    upper_bound_check,
};
use nonlocal_rate::energynd::{
    h2_criterion_probe, limit_functional, lower_bound_form, rate_functional,
    rate_functional_sliced, remcrit_upper_bound,
};
use nonlocal_rate::functions::{slice, ScalarField};
use nonlocal_rate::integrands::{ConvexIntegrand, IntegrandKind};
use nonlocal_rate::kernels::{
    ball_sample_points, effective_kernel, positivity_ball_radius, sigma_d, EffectiveKernel, Kernel,
};
use nonlocal_rate::oracles::{spectral_e_h_quadratic, OracleReport};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{config_err, Result};
use crate::plot::{Plot, Series};
use crate::report::{Audit, Cell, Report};

/// Tolerance for one-dimensional inequality audits.
pub const TOL_1D: f64 = 1e-8;
/// Tolerance for d-dimensional inequality audits.
pub const TOL_ND: f64 = 1e-6;
/// Relative agreement required of direct and sliced evaluations.
pub const SLICE_TOL: f64 = 1e-3;
pub const KERNEL_GRID_POINTS: usize = 200;

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::Rate1d => rate1d(cfg),
        Experiment::Ratend => ratend(cfg),
        Experiment::SliceCheck => slice_check(cfg),
        Experiment::KernelReport => kernel_report(cfg),
        Experiment::H2Probe => h2_probe(cfg),
        Experiment::BoundsAudit => bounds_audit(cfg),
    }
}

fn field_1d(cfg: &ExperimentConfig) -> Result<ScalarField> {
    let u = cfg.field.build()?;
    if u.dim() != 1 {
        return Err(config_err(format!("{} needs a 1-D field", cfg.experiment)));
    }
    Ok(u)
}

fn field_and_kernel(cfg: &ExperimentConfig) -> Result<(ScalarField, Kernel)> {
    let u = cfg.field.build()?;
    let k = cfg.kernel.build()?;
    if k.dim() != u.dim() {
        return Err(config_err(format!(
            "kernel dimension {} differs from field dimension {}",
            k.dim(),
            u.dim()
        )));
    }
    Ok((u, k))
}

/// Order over the window of at most four points ending at `i`.
fn running_orders(hs: &[f64], errs: &[f64]) -> Vec<Option<f64>> {
    (0..hs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(4);
            if i == lo {
                None
            } else {
                fitted_order(&hs[lo..=i], &errs[lo..=i])
            }
        })
        .collect()
}

fn final_order(hs: &[f64], errs: &[f64]) -> Option<f64> {
    let lo = hs.len().saturating_sub(4);
    fitted_order(&hs[lo..], &errs[lo..])
}

fn log_plot(title: &str, y_label: &str, series: Vec<Series>) -> Plot {
    Plot {
        title: title.to_string(),
        x_label: "h".to_string(),
        y_label: y_label.to_string(),
        log_x: true,
        log_y: true,
        series,
    }
}

fn rate1d(cfg: &ExperimentConfig) -> Result<Report> {
    let u = field_1d(cfg)?;
    let fi = cfg.integrand()?;
    let q = &cfg.quadrature;
    let pts = pointwise_error(&u, &fi, &cfg.h_list, q)?;
    let hs: Vec<f64> = pts.iter().map(|r| r.h).collect();
    let errs: Vec<f64> = pts.iter().map(|r| r.error).collect();
    let orders = running_orders(&hs, &errs);

    let mut audits = Vec::new();
    let upper = fi.f2_upper.map(|_| upper_bound_check(&u, &fi, q)).transpose()?;
    for r in &pts {
        audits.push(Audit::ge("E_h >= 0", Some(r.h), r.e_h, 0.0, TOL_1D));
        if let Some(b) = upper {
            audits.push(Audit::le("E_h <= (c/2)|u'|^2", Some(r.h), r.e_h, b, TOL_1D));
        }
    }
    let spectral = if fi.kind == IntegrandKind::Quadratic {
        let s = spectral_e_h_quadratic(&u, &fi, hs[0])?;
        Some(OracleReport::new("spectral", s, pts[0].e_h).with("h", hs[0]))
    } else {
        None
    };

    Ok(Report {
        columns: vec!["h", "value_h", "value_0", "abs_error", "order"],
        rows: pts
            .iter()
            .zip(&orders)
            .map(|(r, o)| vec![r.h.into(), r.e_h.into(), r.e_0.into(), r.error.into(), (*o).into()])
            .collect(),
        summary: json!({
            "value_0": pts[0].e_0,
            "fitted_order": final_order(&hs, &errs),
            "monotone_error": errs.windows(2).all(|w| w[1] < w[0]),
            "upper_bound": upper,
            "oracle": spectral,
        }),
        audits,
        plot: log_plot(
            "|E_h - E_0|",
            "abs error",
            vec![Series::new("|E_h - E_0|", hs.iter().copied().zip(errs.iter().copied()).collect())],
        ),
    })
}

fn ratend(cfg: &ExperimentConfig) -> Result<Report> {
    let (u, k) = field_and_kernel(cfg)?;
    let fi = cfg.integrand()?;
    let q = &cfg.quadrature;
    let limit = limit_functional(&u, &fi, &k, q)?;
    let vals = cfg
        .h_list
        .iter()
        .map(|&h| rate_functional(&u, &fi, &k, h, q))
        .collect::<nonlocal_rate::Result<Vec<_>>>()?;
    let hs = &cfg.h_list;
    let errs: Vec<f64> = vals.iter().map(|v| (v.value - limit.value).abs()).collect();
    let orders = running_orders(hs, &errs);
    let bound = if u.has_analytic_hessian() && fi.f2_upper.is_some() {
        Some(remcrit_upper_bound(&u, &fi, &k, q)?)
    } else {
        None
    };

    let mut audits = Vec::new();
    for v in &vals {
        audits.push(Audit::ge("E_h >= 0", Some(v.h), v.value, 0.0, TOL_ND));
        if let Some(b) = bound {
            audits.push(Audit::le("E_h <= (c/2) M2(K) |D^2 u|^2", Some(v.h), v.value, b, TOL_ND));
        }
    }
    let scaled: Vec<f64> = vals.iter().map(|v| v.h * v.value).collect();

    Ok(Report {
        columns: vec!["h", "value_h", "value_0", "abs_error", "order", "h_value_h", "std_error"],
        rows: vals
            .iter()
            .zip(&errs)
            .zip(&orders)
            .map(|((v, e), o)| {
                vec![
                    v.h.into(),
                    v.value.into(),
                    limit.value.into(),
                    (*e).into(),
                    (*o).into(),
                    (v.h * v.value).into(),
                    v.report.std_error.into(),
                ]
            })
            .collect(),
        summary: json!({
            "value_0": limit.value,
            "fitted_order": final_order(hs, &errs),
            "error_ratio_last_first": errs.last().unwrap() / errs[0],
            "h_value_h_decreasing": scaled.windows(2).all(|w| w[1] < w[0]),
            "upper_bound": bound,
            "quadrature": vals.last().map(|v| &v.report),
        }),
        audits,
        plot: log_plot(
            "|E_h - E_0|",
            "abs error",
            vec![
                Series::new("|E_h - E_0|", hs.iter().copied().zip(errs.iter().copied()).collect()),
                Series::new("h E_h", hs.iter().copied().zip(scaled).collect()),
            ],
        ),
    })
}

fn slice_check(cfg: &ExperimentConfig) -> Result<Report> {
    let (u, k) = field_and_kernel(cfg)?;
    let fi = cfg.integrand()?;
    let q = &cfg.quadrature;
    let mut rows = Vec::new();
    let mut audits = Vec::new();
    let (mut sd, mut ss) = (Vec::new(), Vec::new());
    for &h in &cfg.h_list {
        let d = rate_functional(&u, &fi, &k, h, q)?.value;
        let s = rate_functional_sliced(&u, &fi, &k, h, q)?.value;
        let rel = if d == 0.0 { (d - s).abs() } else { (d - s).abs() / d.abs() };
        audits.push(Audit::le("slicing identity (relative gap)", Some(h), rel, SLICE_TOL, 0.0));
        rows.push(vec![h.into(), d.into(), s.into(), rel.into()]);
        sd.push((h, d));
        ss.push((h, s));
    }
    Ok(Report {
        columns: vec!["h", "direct", "sliced", "rel_diff"],
        rows,
        summary: json!({ "tolerance": SLICE_TOL }),
        audits,
        plot: log_plot(
            "direct vs sliced",
            "E_h",
            vec![Series::new("direct", sd), Series::new("sliced", ss)],
        ),
    })
}

/// `K̃ ≥ bound` on the sample grid, reported at the tightest point.
fn effective_bound_audit(kt: &EffectiveKernel) -> Result<(Audit, f64)> {
    let k = kt.base();
    let radius = positivity_ball_radius(k.dim(), k.positivity_annulus().1);
    let mut worst: Option<(f64, f64, f64)> = None;
    let mut min_kt = f64::INFINITY;
    for z in ball_sample_points(k.dim(), radius, KERNEL_GRID_POINTS) {
        let v = kt.eval(&z)?;
        let lb = kt.lower_bound(&z)?;
        min_kt = min_kt.min(v);
        let slack = (v - lb) / lb.max(f64::MIN_POSITIVE);
        if worst.is_none_or(|w| slack < w.0) {
            worst = Some((slack, v, lb));
        }
    }
    let (_, v, lb) = worst.expect("sample grid is non-empty");
    Ok((Audit::ge("Kt >= closed-form bound (tightest point)", None, v, lb, 1e-9 * lb), min_kt))
}

fn kernel_report(cfg: &ExperimentConfig) -> Result<Report> {
    let k = cfg.kernel.build()?;
    let q = &cfg.quadrature;
    let kt = effective_kernel(&k, q.kernel_tol)?;
    let d = k.dim();
    let (r0, r1) = k.positivity_annulus();
    let radius = positivity_ball_radius(d, r1);
    let (bound_audit, min_kt) = effective_bound_audit(&kt)?;

    let mass_rel = (kt.mass() - k.mass()).abs() / k.mass();
    let m2_rel = (kt.second_moment() - k.second_moment() / 6.0).abs() / (k.second_moment() / 6.0);
    let mut positive = Audit::ge("min Kt on positivity ball", None, min_kt, 0.0, 0.0);
    positive.relation = ">";
    positive.pass = min_kt > 0.0;
    let audits = vec![
        Audit::le("mass(Kt) = mass(K) (relative gap)", None, mass_rel, 1e-8, 0.0),
        Audit::le("M2(Kt) = M2(K)/6 (relative gap)", None, m2_rel, 1e-6, 0.0),
        positive,
        bound_audit,
    ];

    let big_r = k.support_radius();
    let mut e = [0.0; 3];
    e[0] = 1.0;
    let n = 200;
    let mut rows = Vec::with_capacity(n);
    let (mut sk, mut st, mut sb) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let rho = big_r * (i as f64 + 0.5) / n as f64;
        let kv = k.profile(rho);
        let tv = kt.eval_along(rho, &e)?;
        let lb = if rho < r1 { Some(kt.lower_bound(&[rho, 0.0, 0.0])?) } else { None };
        rows.push(vec![rho.into(), kv.into(), tv.into(), lb.into()]);
        sk.push((rho, kv));
        st.push((rho, tv));
        if let Some(b) = lb {
            sb.push((rho, b));
        }
    }

    Ok(Report {
        columns: vec!["rho", "kernel", "effective_kernel", "lower_bound"],
        rows,
        summary: json!({
            "kernel": k.name(),
            "dim": d,
            "sigma_d": sigma_d(d).ok(),
            "positivity_annulus": [r0, r1],
            "positivity_radius": radius,
            "mass": k.mass(),
            "second_moment": k.second_moment(),
            "effective_mass": kt.mass(),
            "effective_second_moment": kt.second_moment(),
            "second_moment_ratio": kt.second_moment() / k.second_moment(),
            "min_effective_on_grid": min_kt,
            "grid_points": KERNEL_GRID_POINTS,
            "evenness_defect": k.evenness_defect(),
        }),
        audits,
        plot: Plot {
            title: format!("{} kernel profile, d = {d}", k.name()),
            x_label: "|z|".to_string(),
            y_label: "value".to_string(),
            log_x: false,
            log_y: true,
            series: vec![
                Series::new("K", sk),
                Series::new("Kt", st),
                Series::new("bound", sb),
            ],
        },
    })
}

fn h2_probe(cfg: &ExperimentConfig) -> Result<Report> {
    let (u, k) = field_and_kernel(cfg)?;
    let fi = cfg.integrand()?;
    let rows = h2_criterion_probe(&u, &fi, &k, &cfg.h_list, &cfg.quadrature)?;
    let audits: Vec<Audit> = rows
        .iter()
        .filter_map(|r| {
            r.upper_bound.map(|b| Audit::le("E_h <= (c/2) M2(K) |D^2 u|^2", Some(r.h), r.value, b, TOL_ND))
        })
        .collect();
    let vals: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let mut series = vec![Series::new("E_h", rows.iter().map(|r| (r.h, r.value)).collect())];
    if let Some(b) = rows[0].upper_bound {
        series.push(Series::new("bound", rows.iter().map(|r| (r.h, b)).collect()));
    }
    Ok(Report {
        columns: vec!["h", "value_h", "upper_bound", "h_value_h"],
        rows: rows
            .iter()
            .map(|r| vec![r.h.into(), r.value.into(), r.upper_bound.into(), (r.h * r.value).into()])
            .collect(),
        summary: json!({
            "upper_bound": rows[0].upper_bound,
            "growing": vals.windows(2).all(|w| w[1] > w[0]),
            "ratio_last_first": vals.last().unwrap() / vals[0],
        }),
        audits,
        plot: log_plot("H2 probe", "E_h", series),
    })
}

/// The 1-D field audited: `u` itself, or its line through the support
/// center along the first axis.
fn audit_line(u: &ScalarField) -> Result<ScalarField> {
    if u.dim() == 1 {
        return Ok(u.clone());
    }
    let mut dir = vec![0.0; u.dim()];
    dir[0] = 1.0;
    let mut offset = u.support().center()[..u.dim()].to_vec();
    offset[0] = 0.0;
    Ok(slice(u, &dir, &offset)?.values_field()?)
}

fn bounds_audit(cfg: &ExperimentConfig) -> Result<Report> {
    let (u, k) = field_and_kernel(cfg)?;
    let fi = cfg.integrand()?;
    let q = &cfg.quadrature;
    let line = audit_line(&u)?;
    let mut audits = audit_1d(&line, &fi, &cfg.h_list, q)?;
    let kt = effective_kernel(&k, q.kernel_tol)?;
    audits.push(effective_bound_audit(&kt)?.0);
    if u.dim() >= 2 {
        let bound = if u.has_analytic_hessian() && fi.f2_upper.is_some() {
            Some(remcrit_upper_bound(&u, &fi, &k, q)?)
        } else {
            None
        };
        for &h in &cfg.h_list {
            let e = rate_functional(&u, &fi, &k, h, q)?.value;
            let lb = lower_bound_form(&u, fi.gamma, &kt, h, q)?;
            audits.push(Audit::ge("E_h >= Kt form", Some(h), e, lb, TOL_ND));
            if let Some(b) = bound {
                audits.push(Audit::le("E_h <= (c/2) M2(K) |D^2 u|^2", Some(h), e, b, TOL_ND));
            }
        }
    }
    let jh: Vec<&Audit> = audits.iter().filter(|a| a.bound == "E_h >= J_h form").collect();
    Ok(Report {
        columns: vec!["bound", "h", "lhs", "relation", "rhs", "margin", "pass"],
        rows: audits
            .iter()
            .map(|a| {
                vec![
                    Cell::Text(a.bound.clone()),
                    a.h.into(),
                    a.lhs.into(),
                    a.relation.into(),
                    a.rhs.into(),
                    a.margin.into(),
                    (if a.pass { "pass" } else { "fail" }).into(),
                ]
            })
            .collect(),
        summary: json!({
            "line_field": u.dim() > 1,
            "checked": audits.len(),
            "failed": audits.iter().filter(|a| !a.pass).count(),
        }),
        plot: log_plot(
            "1-D energy and J_h form",
            "value",
            vec![
                Series::new("E_h", jh.iter().map(|a| (a.h.unwrap_or(0.0), a.lhs)).collect()),
                Series::new("J_h form", jh.iter().map(|a| (a.h.unwrap_or(0.0), a.rhs)).collect()),
            ],
        ),
        audits,
    })
}

/// Every one-dimensional inequality at each `h`.
pub fn audit_1d(
    u: &ScalarField,
    fi: &ConvexIntegrand,
    h_list: &[f64],
    q: &nonlocal_rate::quadrature::QuadratureScheme,
) -> Result<Vec<Audit>> {
    let upper = fi.f2_upper.map(|_| upper_bound_check(u, fi, q)).transpose()?;
    let mut out = Vec::new();
    for &h in h_list {
        let e = energy_e_h(u, fi, h, q)?.value;
        out.push(Audit::ge("E_h >= 0", Some(h), e, 0.0, TOL_1D));
        out.push(Audit::ge("E_h >= J_h form", Some(h), e, lower_bound_jh(u, fi.gamma, h, q)?, TOL_1D));
        for phi in dual_test_library(u, fi, h)? {
            let d = dual_lower_bound(u, fi, h, &phi, q)?;
            out.push(Audit::ge(format!("E_h >= dual form ({})", phi.label), Some(h), e, d, TOL_1D));
        }
        if let Some(b) = upper {
            out.push(Audit::le("E_h <= (c/2)|u'|^2", Some(h), e, b, TOL_1D));
        }
    }
    Ok(out)
}
