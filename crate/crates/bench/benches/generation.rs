//! Sample generation throughput across the protocol's regime corners.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tcda_core::generator::make_sample;
use tcda_core::violations::resolve;
use tcda_core::{Regime, ScheduleVariant, ViolationId};

fn regimes() -> Vec<Regime> {
    vec![
        Regime { d: 5, l: 3, t: 250, p_lag: 0.075, p_inst: 0.0 },
        Regime { d: 7, l: 4, t: 1000, p_lag: 0.15, p_inst: 0.1 },
    ]
}

fn clean_samples(c: &mut Criterion) {
    let mut group = c.benchmark_group("make_sample/clean");
    for regime in regimes() {
        group.bench_with_input(BenchmarkId::from_parameter(regime.id()), &regime, |b, r| {
            let mut index = 0u32;
            b.iter(|| {
                index = index.wrapping_add(1);
                black_box(make_sample(7, &[], r, index, None).unwrap())
            });
        });
    }
    group.finish();
}

fn violated_samples(c: &mut Criterion) {
    let mut group = c.benchmark_group("make_sample/obs_add_l3");
    let cfg = resolve(ViolationId::ObsAdd, 3, ScheduleVariant::Default).unwrap();
    let configs = vec![cfg];
    for regime in regimes() {
        group.bench_with_input(BenchmarkId::from_parameter(regime.id()), &regime, |b, r| {
            let mut index = 0u32;
            b.iter(|| {
                index = index.wrapping_add(1);
                black_box(make_sample(7, &configs, r, index, None).unwrap())
            });
        });
    }
    group.finish();
}

criterion_group!(benches, clean_samples, violated_samples);
criterion_main!(benches);
