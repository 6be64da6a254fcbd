//! Peter–Weyl Fourier analysis on SU(2) via Wigner-D matrices, and the U(D) irrep dimension
//! formula.
//!
//! Single-qubit gates enter through their determinant-one projection. Convolution powers are
//! analysed on the product of projected gates (`CircuitSample::su2_lift`), which is a group
//! homomorphism image of the circuit; for integer spins this agrees with projecting the
//! circuit product itself.

pub mod fourier;
pub mod quadrature;
pub mod wigner;

pub use fourier::{
    conv_power_blocks, fourier_block, fourier_block_from_density, fourier_blocks, norm_ratio, parseval,
    reconstruct_density, FourierBlock, FourierBlockExport, FourierMethod,
};
pub use quadrature::{gauss_legendre, QuadratureGrid, QuadratureNode, DEFAULT_RESOLUTION};
pub use wigner::{euler_zyz, irrep_dim, little_d, su2_from_euler, wigner_d, wigner_d_euler, wigner_d_with_limit, Spin};

use serde::{Deserialize, Serialize};

/// Irrep label: a spin of the single-qubit tower, or a `(k, l)` pair of U(D).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IrrepLabel {
    Spin(Spin),
    Unitary { dim: u64, k: u64, l: u64 },
}

impl IrrepLabel {
    pub fn dimension(&self) -> crate::error::Result<u64> {
        match *self {
            IrrepLabel::Spin(s) => Ok(s.dim() as u64),
            IrrepLabel::Unitary { dim, k, l } => irrep_dim(dim, k, l),
        }
    }
}
