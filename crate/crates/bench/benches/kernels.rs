use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dmdc_bench::{dense, field, random_system};
use dmdc_core::dmd::dmd_fit;
use dmdc_core::dmdc::dmdc_fit_unknown_b;
use dmdc_core::linalg::{eig, thin_svd, TruncationPolicy};
use dmdc_core::rom::{default_frequency_grid, frequency_response, realize};
use std::hint::black_box;

fn svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("thin_svd");
    for (rows, cols) in [(1024, 59), (16384, 59)] {
        let m = dense(rows, cols);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{rows}x{cols}")), &m, |b, m| {
            b.iter(|| thin_svd(black_box(m)).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let a = dense(50, 50);
    c.bench_function("eig_50", |b| b.iter(|| eig(black_box(&a)).unwrap()));
}

fn fits(c: &mut Criterion) {
    let ds = random_system(0);
    let t = TruncationPolicy::default();
    c.bench_function("dmdc_unknown_b_100x199", |b| {
        b.iter(|| dmdc_fit_unknown_b(&ds.x, &ds.xp, &ds.upsilon, t, t, 1.0).unwrap())
    });
    let f = field(64);
    c.bench_function("dmd_field_64", |b| {
        b.iter(|| dmd_fit(&f.x, &f.xp, TruncationPolicy::Rank(10), 1.0).unwrap())
    });
    c.bench_function("dmdc_field_64", |b| {
        b.iter(|| {
            dmdc_fit_unknown_b(&f.x, &f.xp, &f.upsilon, TruncationPolicy::Rank(11), TruncationPolicy::Rank(10), 1.0)
                .unwrap()
        })
    });
}

fn freq(c: &mut Criterion) {
    let ds = random_system(1);
    let t = TruncationPolicy::default();
    let (model, _) = dmdc_fit_unknown_b(&ds.x, &ds.xp, &ds.upsilon, t, t, 1.0).unwrap();
    let ss = realize(&model, None).unwrap();
    let grid = default_frequency_grid();
    c.bench_function("frequency_response_200", |b| b.iter(|| frequency_response(&ss, &grid).unwrap()));
}

criterion_group!(benches, svd, eigen, fits, freq);
criterion_main!(benches);
