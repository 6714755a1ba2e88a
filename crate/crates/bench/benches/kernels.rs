use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scns_core::ops::laplacian;
use scns_core::*;

fn walled(nc: usize) -> Grid {
    Grid::build(2, &[1.0, 1.0], &[nc, nc], BoundarySpec::walled()).unwrap()
}

fn bench_laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian");
    for nc in [32, 64, 128] {
        let g = walled(nc);
        let f = ScalarField::from_fn(&g, |x| (PI * x[0]).cos() * (PI * x[1]).cos());
        group.bench_with_input(BenchmarkId::from_parameter(nc), &f, |b, f| {
            b.iter(|| laplacian(black_box(f), Bc::NeumannZero).unwrap())
        });
    }
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("leray_project");
    for nc in [32, 64, 128] {
        let g = walled(nc);
        let v = VectorField::from_fn(&g, |x| [x[1] * (PI * x[0]).sin(), x[0] * x[0], 0.0]);
        let mut ws = OperatorWorkspace::new(&g);
        group.bench_function(BenchmarkId::from_parameter(nc), |b| b.iter(|| ws.leray_project(black_box(&v)).unwrap()));
    }
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(20);
    for nc in [16, 64] {
        let text = format!(
            "grid.resolution = {nc},{nc}\ninit.u = taylor-green:0.5\nnoise.jump.small = 0.3,1\nnoise.jump.large = 4,0.5\n"
        );
        let setup = parse_config(&text).unwrap().setup().unwrap();
        let mut ws = OperatorWorkspace::new(&setup.grid);
        let stream = RngStream::new(1, 0);
        let draw = setup.sampler.draw(&stream, 0, 0.0, setup.settings.step.dt);
        group.bench_function(BenchmarkId::from_parameter(nc), |b| {
            b.iter(|| step(black_box(&setup.initial), &setup.params, &setup.settings.step, &draw, &mut ws).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_laplacian, bench_projection, bench_step);
criterion_main!(benches);
