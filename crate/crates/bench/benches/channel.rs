use criterion::{criterion_group, criterion_main, Criterion};
use skg_core::capacity::{channel_matrix, Quantizer};
use skg_core::channel::{build_gain_map, FieldMethod, FieldSampler};
use skg_core::{ChannelParams, PathlossParams, PositionGrid, ReceiverConfig};

fn fields(c: &mut Criterion) {
    let grid = PositionGrid::over_area(30, 30, 300.0, 10.0).unwrap();
    let rx = ReceiverConfig::bob(&grid, 5.0, 20.0).unwrap();
    let mut g = c.benchmark_group("shadowing");
    g.sample_size(10);
    g.bench_function("exact_factor_900", |b| {
        b.iter(|| FieldSampler::new(&grid, 20.0, FieldMethod::Exact).unwrap())
    });
    let exact = FieldSampler::new(&grid, 20.0, FieldMethod::Exact).unwrap();
    g.bench_function("exact_draw_900", |b| b.iter(|| exact.field(&rx, 7).unwrap()));
    let nn = FieldSampler::new(&grid, 20.0, FieldMethod::NearestNeighbor { neighbors: 30 }).unwrap();
    g.bench_function("nn30_draw_900", |b| b.iter(|| nn.field(&rx, 7).unwrap()));
    g.finish();
}

fn matrix(c: &mut Criterion) {
    let grid = PositionGrid::over_area(30, 30, 300.0, 10.0).unwrap();
    let rx = ReceiverConfig::bob(&grid, 5.0, 20.0).unwrap();
    let sampler = FieldSampler::new(&grid, 20.0, FieldMethod::Exact).unwrap();
    let field = sampler.field(&rx, 3).unwrap();
    let pl = PathlossParams::new(2400.0, 60.0, 60.0).unwrap();
    let ch = ChannelParams::new(1e4, 1e-6).unwrap();
    let map = build_gain_map(&grid, &rx, &field, &pl, &ch).unwrap();
    let members: Vec<usize> = (0..200).map(|i| i * 4).collect();
    let q = Quantizer::over_values(members.iter().map(|&p| map.m[p]), 128).unwrap();
    c.bench_function("channel_matrix_200x128", |b| {
        b.iter(|| channel_matrix(&members, &map, &q, &ch, 10).unwrap())
    });
}

criterion_group!(benches, fields, matrix);
criterion_main!(benches);
