use std::ops::Deref;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Tolerance used when a unitary is produced by this crate's own arithmetic.
pub const UNITARY_TOL: f64 = 1e-12;

/// Square complex matrix known to satisfy ‖U†U − I‖ within a stated tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn try_new(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "unitary must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let residual = m.unitarity_residual();
        if residual > tol {
            return Err(Error::Validation(format!(
                "matrix is not unitary: ‖U†U − I‖ = {residual:e} > {tol:e}"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix whose unitarity follows from its construction.
    pub(crate) fn new_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(m.unitarity_residual() < 1e-9, "residual {}", m.unitarity_residual());
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0.matmul(&other.0))
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.0.matvec(psi)
    }

    /// Single-qubit gates used throughout tests and examples.
    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self(ComplexMatrix::from_fn(2, 2, |i, j| {
            Complex64::new(if i == 1 && j == 1 { -s } else { s }, 0.0)
        }))
    }

    pub fn t_gate() -> Self {
        Self::phase(std::f64::consts::FRAC_PI_4)
    }

    pub fn phase(theta: f64) -> Self {
        Self(ComplexMatrix::from_diag(&[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, theta),
        ]))
    }

    pub fn pauli_x() -> Self {
        Self(ComplexMatrix::from_fn(2, 2, |i, j| {
            Complex64::new(if i != j { 1.0 } else { 0.0 }, 0.0)
        }))
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::i();
        Self(ComplexMatrix::from_rows(&[vec![0.0.into(), -i], vec![i, 0.0.into()]]).unwrap())
    }

    pub fn pauli_z() -> Self {
        Self(ComplexMatrix::from_real_diag(&[1.0, -1.0]))
    }

    /// CNOT with the first (most significant) qubit as control.
    pub fn cnot() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = one;
        m[(1, 1)] = one;
        m[(2, 3)] = one;
        m[(3, 2)] = one;
        Self(m)
    }

    /// exp(−i θ/2 n·σ) for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], theta: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = axis.map(|a| a / norm);
        let (s, c) = (theta / 2.0).sin_cos();
        Self(
            ComplexMatrix::from_rows(&[
                vec![Complex64::new(c, -s * z), Complex64::new(-s * y, -s * x)],
                vec![Complex64::new(s * y, -s * x), Complex64::new(c, s * z)],
            ])
            .unwrap(),
        )
    }
}

impl Deref for UnitaryMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl Serialize for UnitaryMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::ensemble::matrix_to_pairs(&self.0).serialize(s)
    }
}
