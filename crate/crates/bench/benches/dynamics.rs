use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use lie_anneal::annealing::{gibbs_sampler, make_benchmark_potential, BenchmarkMode};
use lie_anneal::dynamics::{geometric_step, simulate, SdeSpec};
use lie_anneal::{AlgebraVector, GroupModel};
use std::hint::black_box;

fn models() -> [GroupModel; 3] {
    [GroupModel::Torus(2), GroupModel::HeisenbergNilmanifold, GroupModel::Su2]
}

fn steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometric_step");
    for m in models() {
        let x = m.identity();
        let v0 = AlgebraVector::zeros(m.dimension());
        let mut noise = AlgebraVector::zeros(m.dimension());
        noise.set(0, 0.01);
        noise.set(1, -0.02);
        g.bench_function(m.id(), |b| {
            b.iter(|| geometric_step(&m, black_box(&x), &v0, black_box(&noise), 1e-3).unwrap())
        });
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_potential_ou");
    g.sample_size(10);
    let n = 200;
    g.throughput(Throughput::Elements(n as u64));
    for m in models() {
        let b = make_benchmark_potential(&m, &m.identity(), BenchmarkMode::Smooth).unwrap();
        let spec = SdeSpec::diffusion(m, 1e-2).with_potential(b.field, b.label);
        g.bench_function(m.id(), |bch| {
            bch.iter(|| simulate(&spec, &m.identity(), &[1.0], n, 7).unwrap())
        });
    }
    g.finish();
}

fn gibbs(c: &mut Criterion) {
    let mut g = c.benchmark_group("gibbs_sampler");
    g.sample_size(10);
    for m in models() {
        let b = make_benchmark_potential(&m, &m.identity(), BenchmarkMode::Smooth).unwrap();
        g.bench_function(m.id(), |bch| {
            bch.iter(|| gibbs_sampler(&m, b.field.as_ref(), 0.5, 2_000, 500, 0.5, 3).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, steps, ensembles, gibbs);
criterion_main!(benches);
