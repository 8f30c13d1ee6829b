use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use paoti_core::analytics::optimal_nc;
use paoti_core::fixtures::synthetic_curves;
use paoti_core::{run_sim, ControllerConfig, Dataset, Measurement, Model, SignMode, SimConfig, SystemParams};

fn fixed_nc(c: &mut Criterion) {
    let curves = synthetic_curves();
    let curve = curves.get(Dataset::Mnist, Model::Cnn, 3.0).unwrap();
    let mut group = c.benchmark_group("run_sim");
    for horizon in [10_000u64, 100_000] {
        group.throughput(Throughput::Elements(horizon));
        group.bench_with_input(BenchmarkId::new("fixed", horizon), &horizon, |b, &h| {
            let cfg = SimConfig::new(SystemParams::new(0.09, 5).unwrap(), h, 1);
            b.iter(|| run_sim(black_box(&cfg), curve).unwrap().stats)
        });
        group.bench_with_input(BenchmarkId::new("dynamic", horizon), &horizon, |b, &h| {
            let ctl = ControllerConfig {
                n_c_max: 11,
                sign_mode: SignMode::Descent,
                measurement: Measurement::BlockMean { departures: 500 },
                ..ControllerConfig::default()
            };
            let cfg = SimConfig::new(SystemParams::new(0.09, 5).unwrap(), h, 1).with_controller(ctl);
            b.iter(|| run_sim(black_box(&cfg), curve).unwrap().stats)
        });
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let curves = synthetic_curves();
    c.bench_function("optimal_nc/9 curves", |b| {
        b.iter(|| curves.iter().map(|cv| optimal_nc(cv, black_box(0.09), 1..=16).unwrap().n_c).sum::<u32>())
    });
}

criterion_group!(benches, fixed_nc, closed_form);
criterion_main!(benches);
