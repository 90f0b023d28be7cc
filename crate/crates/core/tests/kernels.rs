use nonlocal_rate::kernels::{
    ball_sample_points, effective_kernel, positivity_ball_radius, triangle_j, triangle_j_h, Kernel,
};
use nonlocal_rate::quadrature::QuadratureScheme;

fn builtins(d: usize) -> Vec<Kernel> {
    ["ball", "gaussian", "annulus"]
        .iter()
        .map(|n| Kernel::builtin(n, d).unwrap())
        .collect()
}

#[test]
fn effective_kernel_mass_and_moment() {
    let q = QuadratureScheme::default();
    for d in 1..=3 {
        for k in builtins(d) {
            k.validate().unwrap();
            let e = effective_kernel(&k, q.kernel_tol).unwrap();
            let rm = (e.mass() - k.mass()).abs() / k.mass();
            let rs = (e.second_moment() - k.second_moment() / 6.0).abs() / (k.second_moment() / 6.0);
            eprintln!("{k}: mass rel {rm:e}, moment rel {rs:e}");
            assert!(rm < 1e-8, "{k}: {rm:e}");
            assert!(rs < 1e-6, "{k}: {rs:e}");
        }
    }
}

#[test]
fn effective_kernel_positive_and_above_bound() {
    let q = QuadratureScheme::default();
    for d in 1..=3 {
        for k in builtins(d) {
            let e = effective_kernel(&k, q.kernel_tol).unwrap();
            let radius = positivity_ball_radius(d, k.positivity_annulus().1);
            let mut min = f64::INFINITY;
            for z in ball_sample_points(d, radius, 200) {
                let v = e.eval(&z).unwrap();
                let b = e.lower_bound(&z).unwrap();
                min = min.min(v);
                assert!(v >= b * (1.0 - 1e-9), "{k}: {v} < {b} at {z:?}");
            }
            assert!(min > 0.0, "{k}");
        }
    }
}

#[test]
fn rescaled_mass_is_scale_independent() {
    for d in 1..=3 {
        for k in builtins(d) {
            for h in [0.1, 0.3, 2.0] {
                let kh = k.rescale(h).unwrap();
                assert!((kh.mass() - k.mass()).abs() <= 1e-10 * k.mass(), "{k} h={h}");
                assert!((kh.support_radius() - h * k.support_radius()).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn radial_kernels_give_radial_effective_kernels() {
    for d in 2..=3 {
        for k in builtins(d) {
            let e = effective_kernel(&k, 1e-13).unwrap();
            let r = 0.37;
            let a = e.eval(&[r, 0.0, 0.0]).unwrap();
            let s = r / 2f64.sqrt();
            let b = e.eval(&[s, s, 0.0]).unwrap();
            assert!((a - b).abs() <= 1e-11 * a, "{k}");
        }
    }
}

#[test]
fn triangle_density() {
    assert_eq!(triangle_j(0.0), 1.0);
    assert_eq!(triangle_j(0.5), 0.5);
    assert_eq!(triangle_j(2.0), 0.0);
    assert_eq!(triangle_j_h(0.25, 0.5).unwrap(), 1.0);
    assert!(triangle_j_h(0.1, 0.0).is_err());
}
