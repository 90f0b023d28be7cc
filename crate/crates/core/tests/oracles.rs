use std::f64::consts::PI;

use nonlocal_rate::energy1d::{energy_e_0, energy_e_h};
use nonlocal_rate::energynd::{energy_f_h, limit_functional};
use nonlocal_rate::functions::{bump_1d, indicator_1d, moving_average, radial_bump, sine_bump_1d, zero_field};
use nonlocal_rate::integrands::{lambda_h, ConvexIntegrand, IntegrandKind};
use nonlocal_rate::kernels::{effective_kernel, Kernel};
use nonlocal_rate::oracles::*;
use nonlocal_rate::quadrature::QuadratureScheme;

fn quad() -> ConvexIntegrand {
    ConvexIntegrand::new(IntegrandKind::Quadratic)
}

/// Closed form of `E_h(sin(πx) 1_[0,1])` for `f(t) = t²` at `h = 0.1`.
const SINE_E_H_01: f64 = 0.393_510_803_818_976_5;

#[test]
fn spectral_identity_against_closed_form_and_trapezoid() {
    let u = sine_bump_1d(0.0, 1.0).unwrap();
    let s = spectral_e_h_quadratic(&u, &quad(), 0.1).unwrap();
    assert!((s - SINE_E_H_01).abs() < 1e-7 * SINE_E_H_01, "{s}");
    let bf = bruteforce_e_h(&u, &quad(), 0.1, 20_001, 4001).unwrap();
    assert!((bf - SINE_E_H_01).abs() < 1e-5 * SINE_E_H_01, "{bf}");
    let main = energy_e_h(&u, &quad(), 0.1, &QuadratureScheme::default()).unwrap().value;
    let r = OracleReport::new("spectral", s, main);
    assert!(r.rel_diff < 1e-6 && r.is_consistent());
    assert!(spectral_e_h_quadratic(&u, &ConvexIntegrand::new(IntegrandKind::Cosh), 0.1).is_err());
    assert_eq!(spectral_e_h_quadratic(&zero_field(1).unwrap(), &quad(), 0.1).unwrap(), 0.0);
}

#[test]
fn spectral_small_h_tends_to_limit() {
    let u = sine_bump_1d(0.0, 1.0).unwrap();
    let s = spectral_e_h_quadratic(&u, &quad(), 0.002).unwrap();
    assert!((s - PI * PI / 24.0).abs() < 1e-3, "{s}");
}

#[test]
fn brute_force_values() {
    let fi = ConvexIntegrand::new(IntegrandKind::Cosh);
    let l = bruteforce_lambda(&fi, 0.0, 1.0, 10_000).unwrap();
    assert!((l - (1f64.cosh() - 1.0)).abs() < 1e-8);
    assert!((lambda_h(&fi, 0.0, 1.0) - l).abs() < 1e-8);
    assert!((bruteforce_lambda(&quad(), 0.3, -2.0, 10_000).unwrap() - 1.0).abs() < 1e-8);

    let u = sine_bump_1d(0.0, 1.0).unwrap();
    let bf = bruteforce_moving_average(&u, 0.1, 0.45, 100_000).unwrap();
    let main = moving_average(&u, 0.1, 0.45).unwrap();
    assert!((bf - main).abs() < 1e-10);
    assert!((main - 0.995_892_735_243_561_7).abs() < 1e-14);

    let q = QuadratureScheme::default();
    let e0 = bruteforce_e_0(&u, &quad(), 100_001).unwrap();
    assert!((e0 - PI * PI / 24.0).abs() < 1e-7);
    let ind = indicator_1d(0.0, 1.0).unwrap();
    assert!((moving_average(&ind, 0.5, 0.9).unwrap() - 0.2).abs() < 1e-15);
    let b = bump_1d(0.5, 0.5, 1.0).unwrap();
    let main = energy_e_0(&b, &fi, &q).unwrap().value;
    let bf = bruteforce_e_0(&b, &fi, 100_001).unwrap();
    assert!((main - bf).abs() < 1e-7 * main);
    let main = energy_e_h(&b, &fi, 0.1, &q).unwrap().value;
    let bf = bruteforce_e_h(&b, &fi, 0.1, 20_001, 4001).unwrap();
    assert!((main - bf).abs() < 1e-5 * main, "{main} {bf}");
}

#[test]
fn nested_quadrature_confirms_one_sixth() {
    for d in 1..=3 {
        for name in ["ball", "gaussian", "annulus"] {
            let k = Kernel::builtin(name, d).unwrap();
            let m0 = bruteforce_effective_moment(&k, 0, 2001, 4001).unwrap();
            let m2 = bruteforce_effective_moment(&k, 2, 2001, 4001).unwrap();
            let k0 = bruteforce_kernel_moment(&k, 0, 400_001).unwrap();
            let k2 = bruteforce_kernel_moment(&k, 2, 400_001).unwrap();
            assert!((m0 / k0 - 1.0).abs() < 2e-3, "{name} d={d}: {}", m0 / k0);
            assert!((m2 / k2 - 1.0 / 6.0).abs() < 2e-3, "{name} d={d}: {}", m2 / k2);
            assert!((k0 - k.mass()).abs() < 1e-4 * k.mass());
        }
    }
}

#[test]
fn effective_kernel_against_trapezoid() {
    let q = QuadratureScheme::default();
    let k = Kernel::ball(1).unwrap();
    let e = effective_kernel(&k, q.kernel_tol).unwrap();
    let z = [(-1.0f64).exp(), 0.0, 0.0];
    let bf = bruteforce_effective_kernel(&k, &z, 1_000_001).unwrap();
    assert!((bf - z[0]).abs() < 1e-6);
    assert!((e.eval(&z).unwrap() - z[0]).abs() < 1e-12);
    let k = Kernel::builtin("gaussian", 2).unwrap();
    let e = effective_kernel(&k, q.kernel_tol).unwrap();
    let z = [0.3, -0.2, 0.0];
    let bf = bruteforce_effective_kernel(&k, &z, 1_000_001).unwrap();
    assert!((e.eval(&z).unwrap() - bf).abs() < 1e-6 * bf);
}

#[test]
fn f_h_against_trapezoid_in_one_dimension() {
    let q = QuadratureScheme::default();
    let u = bump_1d(0.5, 0.5, 1.0).unwrap();
    let k = Kernel::ball(1).unwrap();
    let fi = ConvexIntegrand::new(IntegrandKind::Quartic);
    let main = energy_f_h(&u, &fi, &k, 0.2, &q).unwrap().value;
    let bf = bruteforce_f_h_1d(&u, &fi, &k, 0.2, 4001).unwrap();
    assert!((main - bf).abs() < 1e-5 * main, "{main} {bf}");
}

#[test]
fn monte_carlo_d2() {
    let q = QuadratureScheme::default();
    let u = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let k = Kernel::ball(2).unwrap();
    let main = energy_f_h(&u, &quad(), &k, 0.2, &q).unwrap().value;
    let mc = monte_carlo_f_h(&u, &quad(), &k, 0.2, 10_000_000, 11).unwrap();
    assert!((main - mc.value).abs() < 3.0 * mc.std_error, "{main} {mc:?}");
    let main = limit_functional(&u, &quad(), &k, &q).unwrap().value;
    let mc = monte_carlo_limit(&u, &quad(), &k, 10_000_000, 12).unwrap();
    assert!((main - mc.value).abs() < 3.0 * mc.std_error, "{main} {mc:?}");
}
