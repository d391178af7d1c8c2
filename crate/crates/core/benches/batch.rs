use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use session_actors::corpus::{
    compile_fixture, default_bindings, protocol_files, RunOptions, Scenario,
};
use session_actors::monitor::MonitorFsm;
use session_actors::parallel::{compile_all, oracle_check_all, sweep_seeds, ExecMode};

const MODES: [(ExecMode, &str); 2] = [
    (ExecMode::Parallel, "parallel"),
    (ExecMode::Sequential, "sequential"),
];

fn corpus_fsms() -> Vec<Arc<MonitorFsm>> {
    protocol_files()
        .into_iter()
        .flat_map(|p| {
            compile_fixture(p, &default_bindings())
                .unwrap()
                .fsms
                .into_values()
        })
        .filter(|f| f.state_count() <= 40)
        .collect()
}

fn batch(c: &mut Criterion) {
    let bindings = default_bindings();
    let fsms = corpus_fsms();
    let warehouse = Scenario::load("warehouse").unwrap();
    let seeds: Vec<u64> = (0..64).collect();

    let mut group = c.benchmark_group("compile_all");
    for (mode, name) in MODES {
        group.bench_function(name, |b| b.iter(|| compile_all(mode, &bindings)));
    }
    group.finish();

    let mut group = c.benchmark_group("oracle_check_all");
    group.sample_size(10);
    for (mode, name) in MODES {
        group.bench_function(name, |b| b.iter(|| oracle_check_all(mode, &fsms, 6)));
    }
    group.finish();

    let mut group = c.benchmark_group("sweep_seeds");
    group.sample_size(10);
    for (mode, name) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| sweep_seeds(mode, &warehouse, &seeds, RunOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
