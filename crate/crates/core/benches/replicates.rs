use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use netgame::experiment::{preset, simulate, Executor};

fn replicates(c: &mut Criterion) {
    let mut s = preset("fig4a_sf_adoption_random").unwrap().reduced();
    s.steps = 5_000;
    s.replicates = 8;
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    let executors = [
        ("sequential", Executor::Sequential),
        ("parallel", Executor::Parallel(0)),
    ];
    for (name, exec) in executors {
        group.bench_with_input(BenchmarkId::new(name, s.replicates), &exec, |b, &exec| {
            b.iter(|| simulate(&s, exec).unwrap().result.finals())
        });
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
