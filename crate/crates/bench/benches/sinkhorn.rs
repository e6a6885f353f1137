use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use vecuq_bench::score_fixture;
use vecuq_core::{fit_coupling, sample_reference, RankConfig, RankModel, ReferenceFamily, ReferenceSpec, SinkhornConfig};

fn bench_fit_coupling(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_coupling");
    group.sample_size(10);
    for &(n, m) in &[(250, 2), (1000, 2), (500, 3)] {
        let source = score_fixture(n, m);
        let weights = vec![1.0 / n as f64; n];
        let reference = sample_reference(&ReferenceSpec {
            family: ReferenceFamily::default(),
            dim: m,
            atom_budget: n,
        })
        .unwrap();
        let scaled = source.values().mapv(|v| v / 10.0);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{m}")), &n, |b, _| {
            b.iter(|| fit_coupling(black_box(scaled.view()), &weights, &reference, &SinkhornConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let calibration = score_fixture(1000, 2);
    let model = RankModel::fit(&calibration, &RankConfig::default()).unwrap();
    let query = score_fixture(2000, 2);
    c.bench_function("rank_score 2000 queries / 1024 atoms", |b| {
        b.iter(|| model.rank_score(black_box(&query)).unwrap())
    });
}

criterion_group!(benches, bench_fit_coupling, bench_projection);
criterion_main!(benches);
