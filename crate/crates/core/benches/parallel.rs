use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rte_core::exec::stream_rng;
use rte_core::gee::ModelSpec;
use rte_core::inference::{bootstrap, warp_speed};
use rte_core::pseudo::pseudo_matrix_with;
use rte_core::sim::{Scenario, ScenarioId, Setting};
use rte_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn pseudo(c: &mut Criterion) {
    let mut group = c.benchmark_group("pseudo_matrix");
    for n in [50, 200] {
        let s = Scenario::named(ScenarioId::Ii, Setting::I, n, n, true);
        let data = s.sample_dataset(&mut stream_rng(1, 0)).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &data, |b, d| {
                b.iter(|| pseudo_matrix_with(d, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn resampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("bootstrap_200");
    group.sample_size(10);
    let s = Scenario::named(ScenarioId::Ii, Setting::I, 50, 50, true);
    let data = s.sample_dataset(&mut stream_rng(2, 0)).unwrap();
    for (name, exec) in MODES {
        let spec = ModelSpec {
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| bootstrap(&data, &spec, 200, 7).unwrap()));
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("warp_speed_200");
    group.sample_size(10);
    let s = Scenario::named(ScenarioId::I, Setting::II, 50, 50, false);
    for (name, exec) in MODES {
        let spec = ModelSpec {
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| warp_speed(200, 9, &spec, |rng| s.sample_dataset(rng)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pseudo, resampling, simulation);
criterion_main!(benches);
