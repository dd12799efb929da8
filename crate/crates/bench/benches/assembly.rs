use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cutcell_core::flowsolver::{assemble, FluidParams, StepInputs};
use cutcell_core::harness::kovasznay_problem;
use cutcell_core::quadrature::CutMethod;

fn kovasznay_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("kovasznay_31_assembly");
    group.sample_size(20);
    let mut methods = vec![CutMethod::Subtriangulation];
    methods.extend([2, 4, 6, 8].map(|level| CutMethod::Adaptive { level }));
    for m in methods {
        let problem = kovasznay_problem(31, 1, m, 40.0, FluidParams::default()).unwrap();
        let x = vec![0.0; problem.n_dofs()];
        group.bench_with_input(BenchmarkId::from_parameter(m), &x, |b, x| {
            b.iter(|| assemble(&problem, &StepInputs::steady(), black_box(x), true).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kovasznay_assembly);
criterion_main!(benches);
