use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use engulf::{check_full, estimate_k_char, FunctionSpec, RefineConfig, SamplerConfig};

fn config(parallel: bool) -> SamplerConfig {
    SamplerConfig {
        triples: 2_000,
        pairs: 4_000,
        parallel,
        ..SamplerConfig::default()
    }
}

fn bench_checks(c: &mut Criterion) {
    let quartic = FunctionSpec::from_tag("quartic").unwrap();
    let poly = FunctionSpec::from_tag("polyquad").unwrap();
    let mut group = c.benchmark_group("check_full");
    group.sample_size(10);
    for parallel in [false, true] {
        let label = if parallel { "rayon" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new("quartic", label), &parallel, |b, &p| {
            let s = config(p);
            b.iter(|| check_full(&quartic, 35.4, &s).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("estimate_k");
    group.sample_size(10);
    for parallel in [false, true] {
        let label = if parallel { "rayon" } else { "sequential" };
        group.bench_with_input(BenchmarkId::new("polyquad", label), &parallel, |b, &p| {
            let s = config(p);
            b.iter(|| estimate_k_char(&poly, &s, &RefineConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_checks);
criterion_main!(benches);
