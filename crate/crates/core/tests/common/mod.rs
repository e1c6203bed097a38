//! Shared strategies and dense-matrix oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use fermirot::rotations::{build_generator_sum, Generator, RotationKind};
use fermirot::states::{build_dense, eigensolve_hermitian, SectorBasis};
use fermirot::{OperatorProduct, OperatorSum};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn mask(n: usize) -> u64 {
    (1u64 << n) - 1
}

/// Any product on `n` spinorbitals.
pub fn product(n: usize) -> impl Strategy<Value = OperatorProduct> {
    (0..=mask(n), 0..=mask(n)).prop_map(|(a, b)| OperatorProduct::from_masks(a, b))
}

/// A product that is not a number product (so `T + T†` has two terms).
pub fn non_number_product(n: usize) -> impl Strategy<Value = OperatorProduct> {
    product(n).prop_filter("number product", |p| !p.is_number_product())
}

pub fn coefficient() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
}

/// Sum of up to `k` products on `n` spinorbitals.
pub fn sum(n: usize, k: usize) -> impl Strategy<Value = OperatorSum> {
    prop::collection::vec((product(n), coefficient()), 1..=k).prop_map(OperatorSum::from_terms)
}

pub fn kind() -> impl Strategy<Value = RotationKind> {
    prop_oneof![Just(RotationKind::AntiHermitian), Just(RotationKind::Hermitian)]
}

pub fn generator(n: usize) -> impl Strategy<Value = Generator> {
    (product(n), kind(), -3.2..3.2f64).prop_map(|(product, kind, theta)| Generator { product, kind, theta })
}

/// Matrix of `x` on the full Fock space of `n` spinorbitals.
pub fn dense(x: &OperatorSum, n: usize) -> DMatrix<Complex64> {
    build_dense(x, &SectorBasis::full(n)).expect("small Fock space")
}

/// `exp(-i t K)` for Hermitian `K`.
pub fn expm_hermitian(k: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = eigensolve_hermitian(k).expect("Hermitian");
    let v = &eig.vectors;
    let d = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -eig.values[i] * t)
        } else {
            c(0.0, 0.0)
        }
    });
    v * d * v.adjoint()
}

/// Dense unitary `U` with `rotate_sum(O, g) = U† O U`.
pub fn dense_unitary(g: &Generator, n: usize) -> DMatrix<Complex64> {
    let m = dense(&build_generator_sum(g), n);
    match g.kind {
        // exp(θA) = exp(-iθ (iA))
        RotationKind::AntiHermitian => expm_hermitian(&m.map(|z| z * c(0.0, 1.0)), g.theta),
        RotationKind::Hermitian => expm_hermitian(&m, g.theta),
    }
}

pub fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A product with as many creators as annihilators.
pub fn conserving_product(n: usize) -> impl Strategy<Value = OperatorProduct> {
    product(n).prop_filter("particle number changes", |p| p.is_particle_conserving())
}

pub fn conserving_sum(n: usize, k: usize) -> impl Strategy<Value = OperatorSum> {
    prop::collection::vec((conserving_product(n), coefficient()), 1..=k).prop_map(OperatorSum::from_terms)
}
