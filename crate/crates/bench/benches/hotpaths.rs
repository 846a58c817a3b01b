//! Criterion benchmarks for the numerically hot paths: the constrained
//! multiplier solve, droplet density quadrature, operator assembly in the
//! truncated Fock basis, exact Jack recursion, and the lattice-mode SDE.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num::One;

use droplet_core::fock::{build_i2, FockBasis};
use droplet_core::hydro::{droplet_density, Grid};
use droplet_core::jack::jack_basis;
use droplet_core::langevin::{
    matrix_simulate, mode_simulate, EuclideanLattice, MatrixSimConfig, ModeSimConfig,
};
use droplet_core::matrix::{build_annihilation, solve_multipliers};
use droplet_core::params::PhysParams;
use droplet_core::C64;

fn bench_solve_multipliers(c: &mut Criterion) {
    let params = PhysParams::unit();
    for n in [4usize, 8] {
        let state = build_annihilation(n, &params).unwrap();
        let raw = &state.z * C64::new(0.0, -params.omega);
        c.bench_function(&format!("solve_multipliers_n{n}"), |b| {
            b.iter(|| solve_multipliers(&state, &raw).unwrap())
        });
    }
}

fn bench_droplet_density(c: &mut Criterion) {
    let params = PhysParams::unit();
    let grid = Grid::for_droplet(12, 96, &params).unwrap();
    c.bench_function("droplet_density_n12_grid96", |b| {
        b.iter(|| droplet_density(12, &grid, &params).unwrap())
    });
}

fn bench_build_i2(c: &mut Criterion) {
    let params = PhysParams::unit();
    let basis = FockBasis::new(8);
    c.bench_function("build_i2_lambda8", |b| {
        b.iter(|| build_i2(&basis, 10, &params))
    });
}

fn bench_jack_basis(c: &mut Criterion) {
    let alpha = num::rational::BigRational::one();
    c.bench_function("jack_basis_degree6", |b| {
        b.iter(|| jack_basis(6, &alpha).unwrap())
    });
}

fn bench_mode_simulate(c: &mut Criterion) {
    let params = PhysParams::unit();
    let cfg = ModeSimConfig {
        lattice: EuclideanLattice::new(16, 0.1).unwrap(),
        n_max: 2,
        dtau: 0.01,
        sample_periods: 5.0,
        trajectories: 8,
        seed: 1,
        k_probe: vec![0, 1],
    };
    c.bench_function("mode_simulate_m16", |b| {
        b.iter_batched(
            || cfg.clone(),
            |cfg| mode_simulate(&cfg, &params).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_matrix_langevin(c: &mut Criterion) {
    let params = PhysParams::unit();
    c.bench_function("matrix_langevin_n4_100steps", |b| {
        b.iter(|| matrix_simulate(&MatrixSimConfig::new(4, 100, 5e-4, 3), &params).unwrap())
    });
}

criterion_group!(
    hotpaths,
    bench_solve_multipliers,
    bench_droplet_density,
    bench_build_i2,
    bench_jack_basis,
    bench_mode_simulate,
    bench_matrix_langevin
);
criterion_main!(hotpaths);
