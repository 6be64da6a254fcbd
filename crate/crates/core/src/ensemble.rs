//! Gate ensembles (probability measures over gates) and the random circuits whose products
//! realize their convolution powers.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::sample_haar;
use crate::numkernel::unitary::{UnitaryMatrix, UNITARY_TOL};
use crate::numkernel::{qr, ComplexMatrix, SeededRng};

/// Tolerance for unitarity and weight normalization of loaded documents.
pub const LOAD_TOL: f64 = 1e-9;
/// Gates equal to this tolerance are merged by `symmetrize`.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKindTag {
    Discrete,
    Haar,
    GaussianPacket,
    TwoLocalCircuit,
}

/// Gate applied on a randomly chosen ordered qubit pair of a two-local circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LocalRule {
    /// Haar-random element of U(4).
    #[default]
    #[value(name = "haar_su4")]
    HaarSu4,
    /// CNOT (first qubit of the pair controls) with probability 1/2, otherwise independent
    /// Haar single-qubit unitaries on both qubits.
    #[value(name = "cnot_plus_su2")]
    CnotPlusSu2,
    /// Independent uniform phases on the four computational basis states of the pair.
    /// All such gates commute, so the support cannot generate the unitary group.
    #[value(name = "diagonal_phase")]
    DiagonalPhase,
}

impl LocalRule {
    pub fn name(self) -> &'static str {
        match self {
            LocalRule::HaarSu4 => "haar_su4",
            LocalRule::CnotPlusSu2 => "cnot_plus_su2",
            LocalRule::DiagonalPhase => "diagonal_phase",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub gate: UnitaryMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleKind {
    Discrete {
        atoms: Vec<Atom>,
    },
    /// The Haar measure itself on U(dim).
    Haar,
    /// exp(i a·σ/2) with a ~ N(0, σ² I₃).
    GaussianPacket {
        sigma: f64,
    },
    TwoLocalCircuit {
        qubits: usize,
        rule: LocalRule,
    },
}

/// A probability measure over gates of a fixed dimension. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct GateEnsemble {
    dim: usize,
    kind: EnsembleKind,
}

/// One gate drawn from an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub enum DrawnGate {
    Atom(usize),
    Packet {
        generator: [f64; 3],
    },
    Haar(UnitaryMatrix),
    Local {
        qubits: (usize, usize),
        gate: UnitaryMatrix,
    },
}

/// Depth-`m` circuit: gates in draw order and their product `g_m ⋯ g_1`.
#[derive(Clone, Debug)]
pub struct CircuitSample {
    pub depth: usize,
    pub gates: Vec<DrawnGate>,
    pub product: UnitaryMatrix,
    /// For single-qubit ensembles: the product of the determinant-one projections of the
    /// drawn gates, the group element on which the spin-j Fourier analysis acts.
    pub su2_lift: Option<UnitaryMatrix>,
}

// ---------------------------------------------------------------------------------------------
// JSON document

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDocument {
    pub weight: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleDocument {
    pub dim: usize,
    pub kind: EnsembleKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_rule: Option<LocalRule>,
}

pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows)
}

pub fn matrix_to_pairs(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

/// Parses and validates an ensemble document.
pub fn load_ensemble(document: &str) -> Result<GateEnsemble> {
    GateEnsemble::from_document(&parse_ensemble_document(document)?)
}

/// Parses an ensemble document without validating its contents.
pub fn parse_ensemble_document(document: &str) -> Result<EnsembleDocument> {
    let de = &mut serde_json::Deserializer::from_str(document);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn absent<T>(field: &Option<T>, name: &str, kind: &str) -> Result<()> {
    if field.is_some() {
        return Err(Error::Parse {
            path: name.to_string(),
            message: format!("field not allowed for kind {kind}"),
        });
    }
    Ok(())
}

fn required<T: Copy>(field: &Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| Error::Parse {
        path: name.to_string(),
        message: format!("field required for kind {kind}"),
    })
}

/// Snaps a nearly unitary matrix onto the unitary group (QR with diagonal phase correction).
fn reunitarize(m: &ComplexMatrix) -> Result<UnitaryMatrix> {
    let (mut q, r) = qr(m)?;
    for j in 0..m.cols() {
        let rjj = r[(j, j)];
        let phase = rjj / rjj.norm();
        for i in 0..m.rows() {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::try_new(q, UNITARY_TOL)
}

impl GateEnsemble {
    pub fn from_document(doc: &EnsembleDocument) -> Result<Self> {
        let dim = doc.dim;
        if dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        match doc.kind {
            EnsembleKindTag::Discrete => {
                absent(&doc.sigma, "sigma", "discrete")?;
                absent(&doc.qubits, "qubits", "discrete")?;
                absent(&doc.local_rule, "local_rule", "discrete")?;
                let docs = doc.atoms.as_ref().ok_or_else(|| Error::Parse {
                    path: "atoms".into(),
                    message: "field required for kind discrete".into(),
                })?;
                let mut atoms = Vec::with_capacity(docs.len());
                for (i, a) in docs.iter().enumerate() {
                    let m = matrix_from_pairs(&a.matrix).map_err(|e| Error::Parse {
                        path: format!("atoms[{i}].matrix"),
                        message: e.to_string(),
                    })?;
                    if m.rows() != dim || m.cols() != dim {
                        return Err(Error::Validation(format!(
                            "atoms[{i}].matrix is {}x{}, expected {dim}x{dim}",
                            m.rows(),
                            m.cols()
                        )));
                    }
                    let residual = m.unitarity_residual();
                    if residual > LOAD_TOL {
                        return Err(Error::Validation(format!(
                            "atoms[{i}].matrix is not unitary: ‖U†U − I‖ = {residual:e}"
                        )));
                    }
                    let gate = if residual > UNITARY_TOL {
                        reunitarize(&m)?
                    } else {
                        UnitaryMatrix::new_unchecked(m)
                    };
                    atoms.push(Atom { weight: a.weight, gate });
                }
                Self::discrete(dim, atoms)
            }
            EnsembleKindTag::Haar => {
                absent(&doc.atoms, "atoms", "haar")?;
                absent(&doc.sigma, "sigma", "haar")?;
                absent(&doc.qubits, "qubits", "haar")?;
                absent(&doc.local_rule, "local_rule", "haar")?;
                Ok(Self::haar(dim))
            }
            EnsembleKindTag::GaussianPacket => {
                absent(&doc.atoms, "atoms", "gaussian_packet")?;
                absent(&doc.qubits, "qubits", "gaussian_packet")?;
                absent(&doc.local_rule, "local_rule", "gaussian_packet")?;
                let sigma = required(&doc.sigma, "sigma", "gaussian_packet")?;
                if dim != 2 {
                    return Err(Error::Validation(format!("gaussian_packet requires dim 2, got {dim}")));
                }
                Self::gaussian_packet(sigma)
            }
            EnsembleKindTag::TwoLocalCircuit => {
                absent(&doc.atoms, "atoms", "two_local_circuit")?;
                absent(&doc.sigma, "sigma", "two_local_circuit")?;
                let qubits = required(&doc.qubits, "qubits", "two_local_circuit")?;
                let rule = doc.local_rule.unwrap_or_default();
                let e = Self::two_local(qubits, rule)?;
                if e.dim != dim {
                    return Err(Error::Validation(format!(
                        "dim {dim} does not match 2^qubits = {}",
                        e.dim
                    )));
                }
                Ok(e)
            }
        }
    }

    pub fn to_document(&self) -> EnsembleDocument {
        let mut doc = EnsembleDocument {
            dim: self.dim,
            kind: self.kind_tag(),
            atoms: None,
            sigma: None,
            qubits: None,
            local_rule: None,
        };
        match &self.kind {
            EnsembleKind::Discrete { atoms } => {
                doc.atoms = Some(
                    atoms
                        .iter()
                        .map(|a| AtomDocument {
                            weight: a.weight,
                            matrix: matrix_to_pairs(&a.gate),
                        })
                        .collect(),
                );
            }
            EnsembleKind::Haar => {}
            EnsembleKind::GaussianPacket { sigma } => doc.sigma = Some(*sigma),
            EnsembleKind::TwoLocalCircuit { qubits, rule } => {
                doc.qubits = Some(*qubits);
                doc.local_rule = Some(*rule);
            }
        }
        doc
    }

    /// Discrete ensemble; weights must sum to one within `LOAD_TOL` and are then renormalized.
    pub fn discrete(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("discrete ensemble needs at least one atom".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::Validation(format!(
                    "atoms[{i}].weight = {} is not a probability",
                    a.weight
                )));
            }
            if a.gate.dim() != dim {
                return Err(Error::Validation(format!(
                    "atoms[{i}] has dimension {}, expected {dim}",
                    a.gate.dim()
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() >= LOAD_TOL {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom {
                weight: a.weight / total,
                gate: a.gate,
            })
            .collect();
        Ok(Self {
            dim,
            kind: EnsembleKind::Discrete { atoms },
        })
    }

    /// Convenience constructor from `(weight, gate)` pairs.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, UnitaryMatrix)>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.into_iter().map(|(weight, gate)| Atom { weight, gate }).collect();
        let dim = atoms.first().map_or(0, |a| a.gate.dim());
        Self::discrete(dim, atoms)
    }

    pub fn haar(dim: usize) -> Self {
        Self {
            dim,
            kind: EnsembleKind::Haar,
        }
    }

    pub fn gaussian_packet(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Validation(format!(
                "sigma = {sigma} must be a nonnegative width"
            )));
        }
        Ok(Self {
            dim: 2,
            kind: EnsembleKind::GaussianPacket { sigma },
        })
    }

    pub fn two_local(qubits: usize, rule: LocalRule) -> Result<Self> {
        if !(2..=20).contains(&qubits) {
            return Err(Error::Validation(format!(
                "two_local_circuit needs 2..=20 qubits, got {qubits}"
            )));
        }
        Ok(Self {
            dim: 1 << qubits,
            kind: EnsembleKind::TwoLocalCircuit { qubits, rule },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn kind_tag(&self) -> EnsembleKindTag {
        match self.kind {
            EnsembleKind::Discrete { .. } => EnsembleKindTag::Discrete,
            EnsembleKind::Haar => EnsembleKindTag::Haar,
            EnsembleKind::GaussianPacket { .. } => EnsembleKindTag::GaussianPacket,
            EnsembleKind::TwoLocalCircuit { .. } => EnsembleKindTag::TwoLocalCircuit,
        }
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            EnsembleKind::Discrete { atoms } => Some(atoms),
            _ => None,
        }
    }

    /// Number of qubits when the dimension is a power of two.
    pub fn qubits(&self) -> Option<usize> {
        match self.kind {
            EnsembleKind::TwoLocalCircuit { qubits, .. } => Some(qubits),
            _ if self.dim.is_power_of_two() && self.dim > 1 => Some(self.dim.trailing_zeros() as usize),
            _ => None,
        }
    }

    /// Short human-readable description used in reports.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            EnsembleKind::Discrete { atoms } => format!("discrete(dim={}, atoms={})", self.dim, atoms.len()),
            EnsembleKind::Haar => format!("haar(dim={})", self.dim),
            EnsembleKind::GaussianPacket { sigma } => format!("gaussian_packet(sigma={sigma})"),
            EnsembleKind::TwoLocalCircuit { qubits, rule } => {
                format!("two_local_circuit(qubits={qubits}, rule={})", rule.name())
            }
        }
    }

    /// True when every atom's inverse is also an atom of equal weight.
    pub fn is_inverse_closed(&self) -> bool {
        let Some(atoms) = self.atoms() else { return false };
        atoms.iter().all(|a| {
            let inv = a.gate.adjoint();
            atoms
                .iter()
                .any(|b| (b.weight - a.weight).abs() <= 1e-12 && b.gate.max_abs_diff(&inv) <= MERGE_TOL)
        })
    }

    /// Draws one gate record; `gate_of` turns it into a matrix.
    pub fn draw(&self, rng: &mut SeededRng) -> DrawnGate {
        match &self.kind {
            EnsembleKind::Discrete { atoms } => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (i, a) in atoms.iter().enumerate() {
                    acc += a.weight;
                    if u < acc {
                        return DrawnGate::Atom(i);
                    }
                }
                // u landed in the rounding gap above the cumulative sum.
                let last = atoms.iter().rposition(|a| a.weight > 0.0).unwrap_or(atoms.len() - 1);
                DrawnGate::Atom(last)
            }
            EnsembleKind::Haar => DrawnGate::Haar(sample_haar(self.dim, rng)),
            EnsembleKind::GaussianPacket { sigma } => DrawnGate::Packet {
                generator: [sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()],
            },
            EnsembleKind::TwoLocalCircuit { qubits, rule } => {
                let a = rng.below(*qubits);
                let mut b = rng.below(qubits - 1);
                if b >= a {
                    b += 1;
                }
                DrawnGate::Local {
                    qubits: (a, b),
                    gate: draw_local_gate(*rule, rng),
                }
            }
        }
    }

    /// Full `dim × dim` matrix of a drawn gate.
    pub fn gate_of(&self, drawn: &DrawnGate) -> UnitaryMatrix {
        match drawn {
            DrawnGate::Atom(i) => self.atoms().expect("atom record from discrete ensemble")[*i]
                .gate
                .clone(),
            DrawnGate::Packet { generator } => packet_gate(*generator),
            DrawnGate::Haar(u) => u.clone(),
            DrawnGate::Local { qubits: (a, b), gate } => {
                let n = self.qubits().expect("two-local ensemble");
                let mut m = ComplexMatrix::identity(self.dim);
                apply_two_qubit_to_columns(&mut m, gate, *a, *b, n);
                UnitaryMatrix::new_unchecked(m)
            }
        }
    }

    /// Left-multiplies `m` (`dim × k`) by a drawn gate in place.
    fn apply_drawn(&self, drawn: &DrawnGate, m: &mut ComplexMatrix) {
        match drawn {
            DrawnGate::Local { qubits: (a, b), gate } => {
                let n = self.qubits().expect("two-local ensemble");
                apply_two_qubit_to_columns(m, gate, *a, *b, n);
            }
            DrawnGate::Atom(i) => {
                *m = self.atoms().expect("discrete")[*i].gate.matmul(m);
            }
            other => {
                *m = self.gate_of(other).matmul(m);
            }
        }
    }

    pub fn sample_gate(&self, rng: &mut SeededRng) -> UnitaryMatrix {
        let d = self.draw(rng);
        self.gate_of(&d)
    }

    /// Depth-`m` circuit of independent draws; the newest gate multiplies on the left.
    pub fn sample_circuit(&self, m: usize, rng: &mut SeededRng) -> CircuitSample {
        let mut product = ComplexMatrix::identity(self.dim);
        let mut lift = (self.dim == 2).then(|| ComplexMatrix::identity(2));
        let mut gates = Vec::with_capacity(m);
        for _ in 0..m {
            let drawn = self.draw(rng);
            self.apply_drawn(&drawn, &mut product);
            if let Some(l) = lift.as_mut() {
                let g = det_one_projection(&self.gate_of(&drawn));
                *l = g.matmul(l);
            }
            gates.push(drawn);
        }
        CircuitSample {
            depth: m,
            gates,
            product: UnitaryMatrix::new_unchecked(product),
            su2_lift: lift.map(UnitaryMatrix::new_unchecked),
        }
    }

    /// Applies a depth-`m` circuit to `psi`, consuming the generator exactly as
    /// `sample_circuit` would.
    pub fn evolve_state(&self, m: usize, rng: &mut SeededRng, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim);
        let mut state = ComplexMatrix::from_vec(self.dim, 1, psi.to_vec()).expect("finite state");
        for _ in 0..m {
            let drawn = self.draw(rng);
            self.apply_drawn(&drawn, &mut state);
            // The lift in `sample_circuit` consumes no randomness, so the streams stay aligned.
        }
        state.into_vec()
    }

    /// Adds `(p/2, U†)` next to `(p/2, U)` for every atom, merging gates that coincide.
    pub fn symmetrize(&self) -> Result<Self> {
        let EnsembleKind::Discrete { atoms } = &self.kind else {
            return Err(Error::Unsupported(format!(
                "symmetrize needs a discrete ensemble, got {}",
                self.descriptor()
            )));
        };
        let mut out: Vec<Atom> = Vec::with_capacity(2 * atoms.len());
        let mut push = |weight: f64, gate: UnitaryMatrix| {
            if let Some(existing) = out.iter_mut().find(|a| a.gate.max_abs_diff(&gate) <= MERGE_TOL) {
                existing.weight += weight;
            } else {
                out.push(Atom { weight, gate });
            }
        };
        for a in atoms {
            push(a.weight / 2.0, a.gate.clone());
            push(a.weight / 2.0, a.gate.dagger());
        }
        Self::discrete(self.dim, out)
    }

    /// Second moment E[θ²] of the rotation angle θ ∈ [0, π] of depth-`m` products,
    /// estimated from `trials` circuits.
    pub fn angle_spread(&self, m: usize, trials: usize, rng: &mut SeededRng) -> Result<f64> {
        if self.dim != 2 {
            return Err(Error::Unsupported(format!(
                "angle_spread needs a single-qubit ensemble, got {}",
                self.descriptor()
            )));
        }
        if trials < 100 {
            return Err(Error::Precondition(format!(
                "angle_spread needs at least 100 trials, got {trials}"
            )));
        }
        let angles: Vec<f64> = (0..trials)
            .map(|_| rotation_angle(&self.sample_circuit(m, rng).product).powi(2))
            .collect();
        Ok(crate::numkernel::sum::pairwise_sum(&angles) / trials as f64)
    }

    /// Density with respect to the Haar measure on SU(2), for ensembles that have one.
    pub fn su2_density(&self) -> Option<Su2Density<'_>> {
        match self.kind {
            EnsembleKind::Haar if self.dim == 2 => Some(Box::new(|_| 1.0)),
            EnsembleKind::GaussianPacket { sigma } if sigma > 0.0 => {
                Some(Box::new(move |g| gaussian_packet_density(sigma, rotation_angle_su2(g))))
            }
            _ => None,
        }
    }
}

/// Density on SU(2) relative to the normalized Haar measure.
pub type Su2Density<'a> = Box<dyn Fn(&ComplexMatrix) -> f64 + Sync + 'a>;

fn draw_local_gate(rule: LocalRule, rng: &mut SeededRng) -> UnitaryMatrix {
    match rule {
        LocalRule::HaarSu4 => sample_haar(4, rng),
        LocalRule::CnotPlusSu2 => {
            if rng.uniform() < 0.5 {
                UnitaryMatrix::cnot()
            } else {
                let a = sample_haar(2, rng);
                let b = sample_haar(2, rng);
                UnitaryMatrix::new_unchecked(crate::numkernel::kron(&a, &b).expect("4x4"))
            }
        }
        LocalRule::DiagonalPhase => {
            let phases: Vec<Complex64> = (0..4)
                .map(|_| Complex64::from_polar(1.0, 2.0 * PI * rng.uniform()))
                .collect();
            UnitaryMatrix::new_unchecked(ComplexMatrix::from_diag(&phases))
        }
    }
}

/// exp(i a·σ/2).
pub fn packet_gate(a: [f64; 3]) -> UnitaryMatrix {
    let theta = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if theta == 0.0 {
        return UnitaryMatrix::identity(2);
    }
    UnitaryMatrix::rotation(a, -theta)
}

/// Applies a 4×4 gate on qubits `(a, b)` (qubit 0 most significant, `a` the gate's high bit)
/// to every column of `m`.
pub fn apply_two_qubit_to_columns(m: &mut ComplexMatrix, gate: &ComplexMatrix, a: usize, b: usize, n: usize) {
    let dim = 1usize << n;
    assert_eq!(m.rows(), dim);
    let cols = m.cols();
    let ma = 1usize << (n - 1 - a);
    let mb = 1usize << (n - 1 - b);
    let data = m.as_mut_slice();
    let mut local = [Complex64::new(0.0, 0.0); 4];
    for base in 0..dim {
        if base & (ma | mb) != 0 {
            continue;
        }
        let idx = [base, base | mb, base | ma, base | ma | mb];
        for c in 0..cols {
            for (k, &i) in idx.iter().enumerate() {
                local[k] = data[i * cols + c];
            }
            for (r, &i) in idx.iter().enumerate() {
                let row = gate.row(r);
                data[i * cols + c] = row[0] * local[0] + row[1] * local[1] + row[2] * local[2] + row[3] * local[3];
            }
        }
    }
}

/// Removes the global phase of a 2×2 unitary: `g / √det g` with the root's argument in
/// (−π/2, π/2].
pub fn det_one_projection(g: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!((g.rows(), g.cols()), (2, 2));
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let root = Complex64::from_polar(1.0, det.arg() / 2.0);
    g.scale(root.inv())
}

/// Rotation angle θ ∈ [0, π] of a 2×2 unitary: cos(θ/2) = |trace|/2 after removing the phase.
pub fn rotation_angle(g: &ComplexMatrix) -> f64 {
    let s = det_one_projection(g);
    (s.trace().norm() / 2.0).min(1.0).acos() * 2.0
}

/// Rotation angle θ ∈ [0, 2π] of an SU(2) element: cos(θ/2) = Re(trace)/2.
pub fn rotation_angle_su2(g: &ComplexMatrix) -> f64 {
    (g.trace().re / 2.0).clamp(-1.0, 1.0).acos() * 2.0
}

/// Density of the Gaussian packet w.r.t. normalized Haar measure on SU(2) at an element of
/// rotation angle `theta ∈ [0, 2π]`. Sums the Lie-algebra preimages of radius |θ + 4πk|.
pub fn gaussian_packet_density(sigma: f64, theta: f64) -> f64 {
    let norm = (2.0 * PI * sigma * sigma).powf(-1.5);
    let mut radial = 0.0;
    for k in -3i32..=3 {
        let r = (theta + 4.0 * PI * k as f64).abs();
        radial += norm * (-r * r / (2.0 * sigma * sigma)).exp() * r * r;
    }
    let half = (theta / 2.0).sin();
    if half.abs() < 1e-300 {
        // θ = 0 limit of r²/sin²(r/2) is 4; at θ = 2π the density is a point mass of weight ~0.
        return if theta < PI { 4.0 * PI * PI * norm * 4.0 } else { 0.0 };
    }
    4.0 * PI * PI * radial / (half * half)
}
