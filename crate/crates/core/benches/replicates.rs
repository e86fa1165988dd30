use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use snowball_core::sim::{load_population, run_on, Execution, SimConfig};

fn replicates(c: &mut Criterion) {
    let mut cfg = SimConfig::benchmark();
    cfg.n_reps = 16;
    cfg.resample.resamples = 1_000;
    let (net, attrs) = load_population(&cfg.population, cfg.master_seed).unwrap();

    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    let modes = [
        ("sequential", Execution::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Execution::Parallel),
    ];
    for (name, exec) in modes {
        // resampling draws also use the rayon pool, so the sequential case
        // gets a single-thread pool
        let threads = if exec == Execution::Sequential { 1 } else { 0 };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        group.bench_with_input(BenchmarkId::new(name, cfg.n_reps), &exec, |b, &exec| {
            b.iter(|| pool.install(|| run_on(&net, &attrs, &cfg, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, replicates);
criterion_main!(benches);
