//! Ensemble throughput: single-worker sequential execution against the
//! default thread pool, on a workload heavy enough for the split to matter.
//! Run with --no-default-features to time the non-rayon fallback path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use opinion_dynamics::dynamics::UpdateRule;
use opinion_dynamics::engine::{run_ensemble, RunConfig};
use opinion_dynamics::graph::GraphSpec;

fn bench_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    let cases = [
        ("cycle200-voter", GraphSpec::Cycle(200), UpdateRule::Voter, 0.2),
        (
            "clique40-majority",
            GraphSpec::Cliques { k: 1, s: 40 },
            UpdateRule::Majority,
            0.6,
        ),
    ];
    for (label, spec, rule, alpha) in cases {
        for (mode, workers) in [("sequential", 1usize), ("pool", 0usize)] {
            group.bench_function(BenchmarkId::new(label, mode), |b| {
                let mut cfg = RunConfig::new(spec.clone(), rule, alpha, 42);
                cfg.cap = 1_000_000;
                b.iter(|| run_ensemble(&cfg, 64, workers).unwrap());
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_ensemble);
criterion_main!(benches);
