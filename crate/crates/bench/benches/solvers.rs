use criterion::{criterion_group, criterion_main, Criterion};
use fdisac::conic::SolverSettings;
use fdisac_bench::{power_surrogate, scenario, special_socp};

fn surrogate_solves(c: &mut Criterion) {
    let settings = SolverSettings::default();
    let uplink_only = scenario(0, false);
    let full = scenario(0, true);

    let mut g = c.benchmark_group("surrogate_solve");
    g.sample_size(20);
    let sdp = power_surrogate(&uplink_only);
    g.bench_function("power_sdp_l0", |b| b.iter(|| sdp.model.solve_optimal(&settings).unwrap()));
    let socp = special_socp(&uplink_only);
    g.bench_function("special_socp_l0", |b| b.iter(|| socp.model.solve_optimal(&settings).unwrap()));
    let sdp_full = power_surrogate(&full);
    g.bench_function("power_sdp_full", |b| b.iter(|| sdp_full.model.solve_optimal(&settings).unwrap()));
    g.finish();

    let mut g = c.benchmark_group("surrogate_build");
    g.bench_function("power_sdp_full", |b| b.iter(|| power_surrogate(&full)));
    g.bench_function("special_socp_l0", |b| b.iter(|| special_socp(&uplink_only)));
    g.finish();
}

criterion_group!(benches, surrogate_solves);
criterion_main!(benches);
