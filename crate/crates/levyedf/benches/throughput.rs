//! Compares the crate's data-parallel execution of replication batches (the
//! default `parallel` feature) against a hand-rolled sequential baseline.
//! With `--no-default-features` both groups run sequentially, which is the
//! point of comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use levyedf::exec;
use levyedf::limitlaw::LimitSampler;
use levyedf::models::{LevyModel, RhoFunction};
use levyedf::pathsim::{
    CoefficientSpec, ObservationScheme, RngStream, SimOptions, Simulator,
};
use levyedf::{estimate, RhoSpec};

fn monte_carlo_paths(c: &mut Criterion) {
    let model = LevyModel::stable_tempered(0.25, 0.5, 1.0).unwrap();
    let rho = RhoSpec::Poly { p: 5.0 }.build().unwrap();
    let scheme = ObservationScheme::new(2_000, 1e-3, 0.5).unwrap();
    let coeffs = CoefficientSpec::constant(0.0, 0.3).unwrap();
    let sim = Simulator::new(&model, coeffs, scheme, SimOptions::default()).unwrap();
    let root = RngStream::root(7);
    let replications = 64u64;

    let run_one = |r: u64| {
        let path = sim.simulate(root.replication(r)).unwrap();
        let ldf = estimate(&path, &rho);
        ldf.total()
    };

    let mut group = c.benchmark_group("simulate_estimate_batch");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("exec_map", replications), &replications, |b, &m| {
        b.iter(|| exec::map_indexed(m, run_one).iter().sum::<f64>())
    });
    group.bench_with_input(
        BenchmarkId::new("sequential_baseline", replications),
        &replications,
        |b, &m| b.iter(|| (0..m).map(run_one).sum::<f64>()),
    );
    group.finish();
}

fn limit_sampler_batch(c: &mut Criterion) {
    let model = LevyModel::exp_jump().unwrap();
    let rho = RhoFunction::poly(2.0).unwrap();
    let grid: Vec<f64> = (0..50).map(|i| 0.1 + i as f64 * 0.1).collect();
    let sampler = LimitSampler::new(&model, &rho, &grid).unwrap();
    let root = RngStream::root(11);
    let paths = 2_000u64;

    let run_one = |k: u64| {
        let mut rng = root.replication(k).rng();
        let path = sampler.sample_path(&mut rng).unwrap();
        path.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };

    let mut group = c.benchmark_group("limit_sampler_batch");
    group.sample_size(20);
    group.bench_with_input(BenchmarkId::new("exec_map", paths), &paths, |b, &m| {
        b.iter(|| exec::map_indexed(m, run_one).iter().sum::<f64>())
    });
    group.bench_with_input(
        BenchmarkId::new("sequential_baseline", paths),
        &paths,
        |b, &m| b.iter(|| (0..m).map(run_one).sum::<f64>()),
    );
    group.finish();
}

criterion_group!(benches, monte_carlo_paths, limit_sampler_batch);
criterion_main!(benches);
