use std::time::Instant;

use nonlocal_rate::energynd::{
    energy_f_0, energy_f_0_direct, energy_f_h, h2_criterion_probe, limit_functional,
    limit_functional_direct, lower_bound_form, rate_functional, rate_functional_sliced,
    remcrit_upper_bound,
};
use nonlocal_rate::functions::{
    bump_1d, hat_ridge, monomial_bump, moving_average, radial_bump, slice, zero_field,
};
use nonlocal_rate::integrands::{ConvexIntegrand, IntegrandKind};
use nonlocal_rate::kernels::{effective_kernel, Kernel};
use nonlocal_rate::quadrature::{composite_nodes, gauss_legendre, QuadratureScheme, TensorRule};

fn quad() -> ConvexIntegrand {
    ConvexIntegrand::new(IntegrandKind::Quadratic)
}

#[test]
fn zero_field_vanishes() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let u = zero_field(2).unwrap();
    assert_eq!(rate_functional(&u, &quad(), &k, 0.2, &q).unwrap().value, 0.0);
    assert_eq!(energy_f_h(&u, &quad(), &k, 0.2, &q).unwrap().value, 0.0);
    assert_eq!(limit_functional(&u, &quad(), &k, &q).unwrap().value, 0.0);
}

#[test]
fn slicing_identity_d2() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let u = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let t = Instant::now();
    let direct = rate_functional(&u, &quad(), &k, 0.2, &q).unwrap().value;
    let t1 = t.elapsed();
    let sliced = rate_functional_sliced(&u, &quad(), &k, 0.2, &q).unwrap().value;
    eprintln!("direct {direct} ({t1:?}) sliced {sliced} ({:?})", t.elapsed() - t1);
    assert!((direct - sliced).abs() / direct.max(1.0) < 1e-3);
}

#[test]
fn one_dimensional_consistency() {
    let q = QuadratureScheme {
        nd_gauss_nodes: 16,
        nd_panel_width: 0.05,
        ..Default::default()
    };
    let u = bump_1d(0.5, 0.5, 1.0).unwrap();
    for name in ["ball", "annulus"] {
        let k = Kernel::builtin(name, 1).unwrap();
        for fi in IntegrandKind::ALL.map(ConvexIntegrand::new) {
            let d = rate_functional(&u, &fi, &k, 0.2, &q).unwrap().value;
            let s = rate_functional_sliced(&u, &fi, &k, 0.2, &q).unwrap().value;
            eprintln!("{name} {}: {d} {s}", fi.name());
            assert!((d - s).abs() <= 1e-8 * d.abs().max(1.0));
        }
    }
}

#[test]
fn one_dimensional_f_h_via_moving_averages() {
    let q = QuadratureScheme {
        nd_gauss_nodes: 16,
        nd_panel_width: 0.05,
        ..Default::default()
    };
    let u = bump_1d(0.5, 0.5, 1.0).unwrap();
    let k = Kernel::ball(1).unwrap();
    let fi = ConvexIntegrand::new(IntegrandKind::Cosh);
    let h = 0.2;
    let direct = energy_f_h(&u, &fi, &k, h, &q).unwrap().value;
    // (u(x+hz) − u(x))/(hz) is the moving average of u' over a window of
    // length h|z|, so F_h = ∫ K(z) [ F_0-type integral of f(D_{h|z|}) ] dz.
    let w = slice(&u, &[1.0], &[0.0]).unwrap().derivative_field().unwrap();
    let rule = gauss_legendre(40);
    let mut total = 0.0;
    for (z, wz) in rule.mapped(0.0, 1.0) {
        let hz = h * z;
        let mut cuts = [-1.0, 0.0, 0.5, 1.0, -hz, 0.5 - hz, 1.0 - hz];
        cuts.sort_by(f64::total_cmp);
        let mut s = 0.0;
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0].max(-hz), seg[1].min(1.0));
            if hi <= lo {
                continue;
            }
            for (x, wx) in rule.mapped(lo, hi) {
                s += wx * fi.f(moving_average(&w, hz, x).unwrap().abs());
            }
        }
        // K = 1/2 on (−1, 1) and both signs of z contribute equally
        total += wz * s;
    }
    eprintln!("{direct} {total}");
    assert!((direct - total).abs() < 1e-7 * direct);
}

#[test]
fn factorized_forms_match_direct() {
    let q = QuadratureScheme::default();
    let k = Kernel::builtin("gaussian", 2).unwrap();
    let u = monomial_bump(&[0.5, 0.5], 0.5, 1.0, &[1, 0]).unwrap();
    for fi in IntegrandKind::ALL.map(ConvexIntegrand::new) {
        let a = energy_f_0(&u, &fi, &k, &q).unwrap().value;
        let b = energy_f_0_direct(&u, &fi, &k, &q).unwrap().value;
        assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        let a = limit_functional(&u, &fi, &k, &q).unwrap().value;
        let b = limit_functional_direct(&u, &fi, &k, &q).unwrap().value;
        assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
    }
}

#[test]
fn quadratic_f0_is_half_dirichlet() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let u = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let f0 = energy_f_0(&u, &quad(), &k, &q).unwrap().value;
    let g2 = TensorRule {
        dim: 2,
        axes: vec![
            composite_nodes(&[0.0, 1.0], 0.05, 16, 0),
            composite_nodes(&[0.0, 1.0], 0.05, 16, 0),
        ],
    }
    .integrate(|x| {
        let g = u.gradient(x);
        g[0] * g[0] + g[1] * g[1]
    });
    assert!((f0 - 0.5 * g2).abs() < 1e-8 * f0);
}

#[test]
fn convergence_and_scaling_d2() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let u = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let e0 = limit_functional(&u, &quad(), &k, &q).unwrap().value;
    let hs = [0.2, 0.1, 0.05, 0.025];
    let vals: Vec<f64> = hs
        .iter()
        .map(|&h| rate_functional(&u, &quad(), &k, h, &q).unwrap().value)
        .collect();
    eprintln!("e0 {e0} vals {vals:?}");
    assert!((vals[3] - e0).abs() < 0.25 * (vals[0] - e0).abs());
    for i in 1..hs.len() {
        assert!(hs[i] * vals[i] < hs[i - 1] * vals[i - 1]);
    }
}

#[test]
fn lower_bound_form_below_energy() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let kt = effective_kernel(&k, q.kernel_tol).unwrap();
    let u = monomial_bump(&[0.5, 0.4], 0.45, 1.3, &[1, 1]).unwrap();
    for fi in IntegrandKind::ALL.map(ConvexIntegrand::new) {
        for h in [0.2, 0.1] {
            let e = rate_functional(&u, &fi, &k, h, &q).unwrap().value;
            let lb = lower_bound_form(&u, fi.gamma, &kt, h, &q).unwrap();
            eprintln!("{} h={h}: {e} >= {lb}", fi.name());
            assert!(e >= lb - 1e-6);
        }
    }
}

#[test]
fn h2_probe_bounded_and_blowup() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(2).unwrap();
    let u = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let ub = remcrit_upper_bound(&u, &quad(), &k, &q).unwrap();
    for row in h2_criterion_probe(&u, &quad(), &k, &[0.2, 0.1, 0.05], &q).unwrap() {
        assert!(row.value <= ub + 1e-6, "{row:?}");
    }
    let hat = hat_ridge(&[0.5, 0.5], 0.4, 0.5, 1.0).unwrap();
    let t = Instant::now();
    let rows = h2_criterion_probe(&hat, &quad(), &k, &[0.1, 0.05, 0.025, 0.0125], &q).unwrap();
    eprintln!("{rows:?} {:?}", t.elapsed());
    assert!(rows[3].value > 4.0 * rows[0].value);
}
