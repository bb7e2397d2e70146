use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use srevol::{
    default_g_init, empirical_lyapunov, qlik, run_filter, simulate, InnovationDist, ModelKind,
    ParamVector,
};

fn bench_filter(c: &mut Criterion) {
    let theta = ParamVector::egarch(0.0, 0.5, -0.1, 0.3);
    let dist = InnovationDist::StdNormal;
    let path = simulate(ModelKind::Egarch11, &theta, &dist, 4000, 2000, 1).unwrap();
    let g0 = default_g_init(&theta);

    c.bench_function("egarch_filter_n4000", |b| {
        b.iter_batched(
            || (),
            |_| run_filter(ModelKind::Egarch11, &theta, &path, g0).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("egarch_qlik_n4000", |b| {
        b.iter(|| qlik(ModelKind::Egarch11, &theta, &path, g0, 50).unwrap())
    });
    c.bench_function("egarch_empirical_lyapunov_n4000", |b| {
        b.iter(|| empirical_lyapunov(&theta, &path).unwrap())
    });

    let gtheta = ParamVector::garch(0.1, 0.8, 0.15);
    let gpath = simulate(ModelKind::Garch11, &gtheta, &dist, 4000, 2000, 2).unwrap();
    let gg0 = default_g_init(&gtheta);
    c.bench_function("garch_qlik_n4000", |b| {
        b.iter(|| qlik(ModelKind::Garch11, &gtheta, &gpath, gg0, 50).unwrap())
    });
}

criterion_group!(benches, bench_filter);
criterion_main!(benches);
