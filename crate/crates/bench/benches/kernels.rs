use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sigmacell::cell::{assemble_energy, assemble_gradient, minimize_cell, CellGrid};
use sigmacell::{Mollifier, Potential, RationalUnitVector, SolverOptions, TransitionProfile, WellPair};

fn grid(t: f64, h: f64) -> CellGrid {
    CellGrid::for_direction(&RationalUnitVector::parse("3/5,4/5").unwrap(), t, h).unwrap()
}

fn kernels(c: &mut Criterion) {
    let pot = Potential::striped(0.5).unwrap();
    let profile = TransitionProfile::new(WellPair::scalar(), Mollifier::bump(2));
    let g = grid(4.0, 1.0 / 32.0);
    let state = g.initial_state(&profile);

    c.bench_function("energy 129^2", |b| b.iter(|| assemble_energy(black_box(&g), &pot, black_box(&state)).unwrap()));
    c.bench_function("gradient 129^2", |b| b.iter(|| assemble_gradient(black_box(&g), &pot, black_box(&state)).unwrap()));

    let small = grid(2.0, 1.0 / 8.0);
    let opts = SolverOptions::default();
    c.bench_function("solve T=2 h=1/8", |b| b.iter(|| minimize_cell(black_box(&small), &pot, &profile, &opts).unwrap()));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
