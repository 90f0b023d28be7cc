use criterion::{criterion_group, criterion_main, Criterion};
use nonlocal_rate::energy1d::energy_e_h;
use nonlocal_rate::energynd::rate_functional;
use nonlocal_rate::functions::{bump_1d, radial_bump};
use nonlocal_rate::integrands::{ConvexIntegrand, IntegrandKind};
use nonlocal_rate::kernels::Kernel;
use nonlocal_rate::quadrature::QuadratureScheme;

fn bench(c: &mut Criterion) {
    let fi = ConvexIntegrand::new(IntegrandKind::Cosh);
    let u2 = radial_bump(&[0.5, 0.5], 0.5, 1.0).unwrap();
    let k2 = Kernel::ball(2).unwrap();
    let u1 = bump_1d(0.5, 0.5, 1.0).unwrap();
    let mut g = c.benchmark_group("parallel_vs_sequential");
    g.sample_size(10);
    for parallel in [false, true] {
        let q = QuadratureScheme { parallel, nd_gauss_nodes: 8, ..QuadratureScheme::default() };
        let tag = if parallel { "parallel" } else { "sequential" };
        g.bench_function(format!("rate_d2/{tag}"), |b| {
            b.iter(|| rate_functional(&u2, &fi, &k2, 0.2, &q).unwrap().value)
        });
        g.bench_function(format!("e_h_1d/{tag}"), |b| {
            b.iter(|| energy_e_h(&u1, &fi, 0.05, &q).unwrap().value)
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
