//! Dense complex linear algebra, seeded randomness, and order-stable reductions.

pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod sum;

pub use matrix::{
    inner, kron, kron_with_cap, partial_trace, qr, reduced_state, vector_norm, ComplexMatrix, DEFAULT_ELEMENT_CAP,
};
pub use rng::SeededRng;
pub use spectral::{deflated_leading_value, operator_norm, PowerIteration};

pub use num_complex::Complex64;
pub mod unitary;
pub use unitary::UnitaryMatrix;
