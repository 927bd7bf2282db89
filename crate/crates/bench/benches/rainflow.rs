use std::hint::black_box;

use bess_core::rainflow::extract_cycles;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_trace(len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..len).map(|_| rng.gen_range(0.1..0.9)).collect()
}

fn rainflow(c: &mut Criterion) {
    let mut group = c.benchmark_group("rainflow");
    // one week at 60, 15 and 5 minutes
    for len in [169, 673, 2017] {
        let trace = random_trace(len);
        group.bench_with_input(BenchmarkId::from_parameter(len), &trace, |b, t| {
            b.iter(|| extract_cycles(black_box(t)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rainflow);
criterion_main!(benches);
