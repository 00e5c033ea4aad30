use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hamzoo::exec::Exec;
use hamzoo::legendre::{LagrangianSpec, VelocityPoint};
use hamzoo::verify::{pde_residual, random_points, run_suite, RunConfig};
use hamzoo::{parse_potential, HamiltonianSpec, Sign, SystemParams};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pde_sweep(c: &mut Criterion) {
    let pot = parse_potential("0.25*x^4").unwrap();
    let params = SystemParams::default();
    let spec = HamiltonianSpec::cabbatonian(&[2.0, 3.0, 4.0], Sign::Minus).unwrap();
    let points = random_points(42, 20_000, [2.0, 2.0]);
    let mut group = c.benchmark_group("pde_residual_20k");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exec.map(&points, |&pt| pde_residual(&spec, &params, &pot, pt).unwrap()))
        });
    }
    group.finish();
}

fn legendre_grid(c: &mut Criterion) {
    let lagr = LagrangianSpec::new(&[2.0, 3.0], SystemParams::default(), parse_potential("0.5*x^2").unwrap()).unwrap();
    let n = 24;
    let points: Vec<VelocityPoint> = (0..n * n)
        .map(|g| {
            VelocityPoint::new(
                -1.5 + 3.0 * (g / n) as f64 / (n - 1) as f64,
                -1.5 + 3.0 * (g % n) as f64 / (n - 1) as f64,
            )
        })
        .collect();
    let mut group = c.benchmark_group("legendre_grid_24x24");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exec.map(&points, |&pt| lagr.legendre_residual(pt).unwrap()))
        });
    }
    group.finish();
}

fn default_suite(c: &mut Criterion) {
    let config = RunConfig {
        points: 40,
        ..RunConfig::default()
    };
    let mut group = c.benchmark_group("run_suite");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_suite(&config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pde_sweep, legendre_grid, default_suite);
criterion_main!(benches);
