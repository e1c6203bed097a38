//! Exact closed-form fermionic rotations.
//!
//! Conjugating a normal-ordered product `O` by `exp(θA)` with `A = T - T†`,
//! or by `exp(-iθH)` with `H = T + T†`, for a single product `T`, reduces to
//! at most two nested commutators. This crate implements that algebra
//! exactly and builds two drivers on top of it:
//!
//! * [`downfold`]: adaptive block-diagonalization of a Hamiltonian by a
//!   gradient-selected sequence of rotations.
//! * [`dynamics`]: Heisenberg-picture evolution of observables with a
//!   symmetric second-order Trotter product of exact rotations.
//!
//! [`states`] holds determinant-basis machinery and the dense
//! exact-diagonalization oracle used for cross-validation, and [`models`]
//! builds Hubbard chains, the two-level model and FCIDUMP Hamiltonians.

pub mod algebra;
pub mod cli;
pub mod downfold;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod output;
pub mod par;
pub mod rotations;
pub mod states;

pub use algebra::{OperatorProduct, OperatorSum};
pub use error::{Error, Result};
pub use rotations::{Generator, RotationClass, RotationKind};
