//! Parallel core against a single worker on the same inputs.
//!
//! `cargo bench` compares the rayon pool with a one-thread pool; running
//! `cargo bench --no-default-features` measures the plain sequential build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fermirot::downfold::{build_pool, pool_gradients, DownfoldConfig};
use fermirot::dynamics::{apply_schedule, build_schedule, split_hamiltonian, TermOrdering};
use fermirot::models::{hubbard_chain, number_operator, synthetic_integrals, HubbardSpec};
use fermirot::par::with_threads;
use fermirot::rotations::{rotate_sum, Generator};
use fermirot::states::{apply_operator, ground_state, Determinant, SectorBasis};
use fermirot::{OperatorProduct, OperatorSum};

/// `n_0(t)` of a 4-site Hubbard chain after a few Trotter steps (a few
/// thousand terms).
fn evolved_observable() -> (OperatorSum, OperatorSum) {
    let h = hubbard_chain(&HubbardSpec::new(4, 1.0, 1.0).unwrap());
    let schedule = build_schedule(&split_hamiltonian(&h).unwrap(), 0.25, TermOrdering::HoppingFirst).unwrap();
    let mut o = number_operator(0);
    for _ in 0..4 {
        o = apply_schedule(&o, &schedule, 0.0).unwrap().0;
    }
    (o, h)
}

fn modes() -> [(&'static str, Option<usize>); 2] {
    [("parallel", None), ("one-thread", Some(1))]
}

fn bench_rotate_sum(c: &mut Criterion) {
    let (o, _) = evolved_observable();
    let g = Generator::hermitian(OperatorProduct::excitation(0, 2), 0.1);
    let mut group = c.benchmark_group("rotate_sum");
    for (name, threads) in modes() {
        group.bench_with_input(BenchmarkId::new(name, o.len()), &o, |b, o| {
            b.iter(|| with_threads(threads, || rotate_sum(o, &g).unwrap()))
        });
    }
    group.finish();
}

fn bench_trotter_step(c: &mut Criterion) {
    let (o, h) = evolved_observable();
    let schedule = build_schedule(&split_hamiltonian(&h).unwrap(), 0.125, TermOrdering::HoppingFirst).unwrap();
    let mut group = c.benchmark_group("trotter_step");
    group.sample_size(10);
    for (name, threads) in modes() {
        group.bench_with_input(BenchmarkId::new(name, o.len()), &o, |b, o| {
            b.iter(|| with_threads(threads, || apply_schedule(o, &schedule, 0.0).unwrap()))
        });
    }
    group.finish();
}

fn bench_state_kernels(c: &mut Criterion) {
    let h = synthetic_integrals(5, 4, 7).hamiltonian().unwrap();
    let (_, psi) = ground_state(&h, &SectorBasis::spin_sector(10, 2, 2)).unwrap();
    let active: Vec<usize> = (0..4).collect();
    let external: Vec<usize> = (4..10).collect();
    let cfg = DownfoldConfig::new(active, external, vec![Determinant::from_occupied(&[0, 1, 2, 3])]);
    let pool = build_pool(&cfg).unwrap();
    let mut group = c.benchmark_group("state_kernels");
    for (name, threads) in modes() {
        group.bench_function(BenchmarkId::new("apply_operator", name), |b| {
            b.iter(|| with_threads(threads, || apply_operator(&h, &psi)))
        });
        group.bench_function(BenchmarkId::new("pool_gradients", name), |b| {
            b.iter(|| with_threads(threads, || pool_gradients(&h, &pool, &psi)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rotate_sum, bench_trotter_step, bench_state_kernels);
criterion_main!(benches);
