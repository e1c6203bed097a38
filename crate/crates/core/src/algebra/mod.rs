//! Second-quantized operator algebra over the physical vacuum.

mod normal_order;
mod product;
mod sum;

pub use normal_order::{normal_order, Action, ElementaryOperator};
pub(crate) use product::parity_below;
pub use product::{multiply_products, OperatorProduct, OrbitalIndex, MAX_ORBITALS};
pub use sum::{axpy, commutator, multiply, OperatorSum, Rank, TermRecord, DEFAULT_DROP_TOL, ONE, ZERO};
