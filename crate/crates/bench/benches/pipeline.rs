use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pscslice_core::conformal::SliceGeometry;
use pscslice_core::forcing::{build_bump, ForcingSpec};
use pscslice_core::metric::builtin::{SphereTwist, TwistedFlat};
use pscslice_core::normal::NormalFrame;
use pscslice_core::solver::{assemble, solve_dirichlet};
use pscslice_core::{
    build_domain, scalar_curvature, Backend, DiscreteDomain, DomainSpec, MetricField,
    SolverSettings,
};

fn torus(n: usize, t_nodes: usize) -> DiscreteDomain {
    build_domain(&DomainSpec {
        backend: Backend::Torus,
        dim_x: 2,
        resolution: vec![n, n],
        t_nodes,
    })
    .unwrap()
}

fn curvature(c: &mut Criterion) {
    let mut g = c.benchmark_group("scalar_curvature");
    for n in [16, 32, 64] {
        let d = torus(n, 5);
        let h = MetricField::from_analytic(&TwistedFlat::new(2, 0.5), d.x_grid(), 0.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| scalar_curvature(black_box(h)).unwrap())
        });
    }
    g.finish();
}

fn assembly_and_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("dirichlet");
    g.sample_size(10);
    for n in [16, 32] {
        let d = torus(n, 33);
        let h = MetricField::from_analytic(&TwistedFlat::new(2, 0.5), d.x_grid(), 0.0).unwrap();
        let s = SliceGeometry::new(&h).unwrap();
        let frame = NormalFrame::new(&h).unwrap();
        g.bench_with_input(BenchmarkId::new("assemble", n), &n, |b, _| {
            b.iter(|| assemble(&d, &s.sigma_g, &frame.v, s.r_h()).unwrap())
        });
        let a = assemble(&d, &s.sigma_g, &frame.v, s.r_h()).unwrap();
        let f = build_bump(
            &ForcingSpec {
                c: 2.2,
                p: 4,
                delta: 1.0,
                epsilon: 0.5,
            },
            &d,
        )
        .unwrap();
        let settings = SolverSettings::default();
        g.bench_with_input(BenchmarkId::new("solve", n), &n, |b, _| {
            b.iter(|| solve_dirichlet(&a, black_box(&f), &settings).unwrap())
        });
    }
    g.finish();
}

fn slice_geometry(c: &mut Criterion) {
    let d = build_domain(&DomainSpec {
        backend: Backend::SphereAxisym,
        dim_x: 2,
        resolution: vec![64],
        t_nodes: 5,
    })
    .unwrap();
    let h = MetricField::from_analytic(&SphereTwist::new(1.0, 0.5), d.x_grid(), 0.0).unwrap();
    c.bench_function("slice_geometry/sphere_twist_64", |b| {
        b.iter(|| SliceGeometry::new(black_box(&h)).unwrap())
    });
}

criterion_group!(benches, curvature, assembly_and_solve, slice_geometry);
criterion_main!(benches);
