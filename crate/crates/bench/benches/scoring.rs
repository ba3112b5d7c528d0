//! Baseline scoring and metric throughput on a fixed clean sample.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tcda_core::discovery::{cross_correlation_scores, gvar_fit};
use tcda_core::generator::make_sample;
use tcda_core::harness::{graph_metrics, grid_graphs, BaselineGrid};
use tcda_core::generator::SampleRecord;
use tcda_core::Regime;

fn fixture() -> SampleRecord {
    let regime = Regime { d: 5, l: 3, t: 250, p_lag: 0.075, p_inst: 0.0 };
    make_sample(11, &[], &regime, 0, None).unwrap()
}

fn base_methods(c: &mut Criterion) {
    let sample = fixture();
    c.bench_function("cross_correlation_scores/d5l3t250", |b| {
        b.iter(|| black_box(cross_correlation_scores(&sample.x, 3).unwrap()))
    });
    c.bench_function("gvar_fit/d5l3t250", |b| {
        b.iter(|| black_box(gvar_fit(&sample.x, 3).unwrap()))
    });
}

fn full_grid(c: &mut Criterion) {
    let sample = fixture();
    let grid = BaselineGrid::default();
    c.bench_function("grid_graphs/d5l3t250", |b| {
        b.iter(|| black_box(grid_graphs(&sample.x, 3, &grid)))
    });
}

fn metric_sweep(c: &mut Criterion) {
    let sample = fixture();
    let graph = cross_correlation_scores(&sample.x, 3).unwrap();
    c.bench_function("graph_metrics/d5l3t250", |b| {
        b.iter(|| black_box(graph_metrics(&graph, &sample.truth)))
    });
}

criterion_group!(benches, base_methods, full_grid, metric_sweep);
criterion_main!(benches);
