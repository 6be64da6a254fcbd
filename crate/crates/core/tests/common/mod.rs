#![allow(dead_code)]

use haarflow::ensemble::GateEnsemble;
use haarflow::numkernel::UnitaryMatrix;

/// {H, T, T†} with weights 1/2, 1/4, 1/4.
pub fn htt_symmetric() -> GateEnsemble {
    GateEnsemble::from_atoms([(0.5, UnitaryMatrix::hadamard()), (0.5, UnitaryMatrix::t_gate())])
        .unwrap()
        .symmetrize()
        .unwrap()
}

/// {H, T} with equal weights; not closed under inverses.
pub fn h_t() -> GateEnsemble {
    GateEnsemble::from_atoms([(0.5, UnitaryMatrix::hadamard()), (0.5, UnitaryMatrix::t_gate())]).unwrap()
}

pub fn identity_delta() -> GateEnsemble {
    GateEnsemble::from_atoms([(1.0, UnitaryMatrix::identity(2))]).unwrap()
}

/// Relative difference |a − b| / max(|b|, tiny).
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
