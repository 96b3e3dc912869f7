use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pfgamma_core::limit::optimal_profile;
use pfgamma_core::operator::classify_ellipticity;
use pfgamma_core::solver::{alternate_minimize, initialize};
use pfgamma_core::*;

fn square(cells: usize) -> (Grid, EpsParams, FirstOrderOperator, BulkDensity) {
    (
        Grid::new(&[1.0, 1.0], &[cells, cells]).unwrap(),
        EpsParams::new(0.05, 2.0, 1.0, 2.0, PsiSpec::default()).unwrap(),
        FirstOrderOperator::full_strain(2).unwrap(),
        BulkDensity::new(2.0, 0.0, HookeTensor::new(1.0, 0.5, 2).unwrap()).unwrap(),
    )
}

fn energy_and_gradients(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    for cells in [32usize, 128] {
        let (grid, params, op, density) = square(cells);
        let func = Functional::new(&grid, &params, &op, &density).unwrap();
        let mut f = GridField::new(&grid);
        for (i, u) in f.u.iter_mut().enumerate() {
            *u = (i as f64 * 0.37).sin() * 0.1;
        }
        for (i, v) in f.v.iter_mut().enumerate() {
            *v = 0.5 + 0.5 * (i as f64 * 0.11).cos();
        }
        group.bench_with_input(BenchmarkId::new("total", cells), &f, |b, f| {
            b.iter(|| func.energy(black_box(f)))
        });
        group.bench_with_input(BenchmarkId::new("gradient_u", cells), &f, |b, f| {
            b.iter(|| func.gradient_u(black_box(f)))
        });
        group.bench_with_input(BenchmarkId::new("gradient_v", cells), &f, |b, f| {
            b.iter(|| func.gradient_v(black_box(f)))
        });
    }
    group.finish();
}

fn bar_minimize(c: &mut Criterion) {
    let s = Scenario::bar(6.0);
    let problem = s.problem().unwrap();
    let params = problem.params(2f64.powi(-5)).unwrap();
    let grid = problem.grid(&[256]).unwrap();
    let func = Functional::new(&grid, &params, &problem.op, &problem.density).unwrap();
    let start = initialize(
        &func,
        &problem.field(&grid).unwrap(),
        Initializer::notched(),
        &s.solver,
    )
    .unwrap();
    c.bench_function("alternate_minimize/bar_256", |b| {
        b.iter(|| alternate_minimize(&func, black_box(&start), &s.solver).unwrap())
    });
}

fn limit_tools(c: &mut Criterion) {
    let phase = PhaseParams::default();
    c.bench_function("optimal_profile", |b| {
        b.iter(|| {
            optimal_profile(&phase, black_box(2f64.powi(-6)), RhoRule::GeometricMean).unwrap()
        })
    });
    let op = FirstOrderOperator::deviatoric(3).unwrap();
    c.bench_function("classify/deviatoric_3d_1000", |b| {
        b.iter(|| classify_ellipticity(&op, 1000, 1e-10, 0).unwrap())
    });
}

criterion_group!(benches, energy_and_gradients, bar_minimize, limit_tools);
criterion_main!(benches);
