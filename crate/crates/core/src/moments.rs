//! Moment (transfer) operators M_t(f) = E_f[U^{⊗t} ⊗ Ū^{⊗t}], their gap to the Haar
//! projector, and the exponential decay of ‖M_t^m − P‖.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleKind, GateEnsemble, LocalRule};
use crate::error::{Error, Result};
use crate::haar::{haar_invariant_basis, haar_projector, MAX_MOMENT_ORDER};
use crate::numkernel::spectral::{deflated_leading_value, operator_norm, DEFAULT_NORM_TOL};
use crate::numkernel::sum::par_block_sum;
use crate::numkernel::unitary::UnitaryMatrix;
use crate::numkernel::{kron, ComplexMatrix, SeededRng, DEFAULT_ELEMENT_CAP};
use crate::probes::{fit_exponential, FitResult};

pub const DEFAULT_MOMENT_SAMPLES: usize = 100_000;
/// Squarings used for the asymptotic rate: ‖(M − P)^{2^k}‖^{2^{−k}}.
pub const RATE_SQUARINGS: u32 = 5;

const MOMENT_STREAM: u64 = 0x30;
const MEASURE_STREAM: u64 = 0x31;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Monte Carlo sample count for ensembles without an exact construction.
    pub samples: usize,
    pub seed: u64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_MOMENT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MomentOperator {
    pub t: usize,
    pub dim: usize,
    pub matrix: ComplexMatrix,
    /// Set when the ensemble is closed under inverses, so the matrix is Hermitian.
    pub hermitian: bool,
    /// `Some(N)` for Monte Carlo builds.
    pub n_samples: Option<usize>,
    /// Largest entrywise standard error (0 for exact builds).
    pub std_error: f64,
    pub ensemble: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// ‖M − P‖: the one-step contraction on the complement of the invariant subspace.
    pub lambda_star: f64,
    /// ‖(M − P)^{32}‖^{1/32}, the asymptotic rate estimate.
    pub rate_alpha: f64,
    pub t: usize,
    pub dim: usize,
    pub ensemble: String,
    pub n_samples: Option<usize>,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m: usize,
    /// Largest entrywise deviation of the sampled moment operator of depth-m circuits from P.
    pub measured: f64,
    /// Operator norm of the same sampled deviation; directly comparable with `predicted`.
    pub measured_norm: f64,
    /// lambda_star^m.
    pub predicted: f64,
    /// ‖(M − P)^m‖ from the built operator.
    pub exact_distance: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ensemble: String,
    pub t: usize,
    pub dim: usize,
    pub trials: usize,
    pub lambda_star: f64,
    pub rate_alpha: f64,
    pub points: Vec<ConvergencePoint>,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
}

fn check_order(t: usize) -> Result<()> {
    if t == 0 || t > MAX_MOMENT_ORDER {
        return Err(Error::Unsupported(format!(
            "moment order t = {t}; only 1 ≤ t ≤ {MAX_MOMENT_ORDER} is implemented"
        )));
    }
    Ok(())
}

fn check_capacity(dim: usize, t: usize) -> Result<()> {
    let side = (dim as u64).checked_pow(2 * t as u32).unwrap_or(u64::MAX);
    let requested = side.saturating_mul(side);
    if requested > DEFAULT_ELEMENT_CAP {
        return Err(Error::Capacity {
            requested,
            cap: DEFAULT_ELEMENT_CAP,
        });
    }
    Ok(())
}

/// U^{⊗t} ⊗ Ū^{⊗t}.
pub fn tensor_moment(u: &ComplexMatrix, t: usize) -> Result<ComplexMatrix> {
    check_order(t)?;
    let ubar = u.conj();
    match t {
        1 => kron(u, &ubar),
        _ => kron(&kron(u, u)?, &kron(&ubar, &ubar)?),
    }
}

/// Moment operator of `e` at order `t`: exact for discrete and two-local ensembles,
/// Monte Carlo otherwise.
pub fn build_moment_operator(e: &GateEnsemble, t: usize, opts: &MomentOptions) -> Result<MomentOperator> {
    check_order(t)?;
    check_capacity(e.dim(), t)?;
    match e.kind() {
        EnsembleKind::Discrete { atoms } => {
            let side = e.dim().pow(2 * t as u32);
            let mut acc = ComplexMatrix::zeros(side, side);
            for a in atoms {
                acc.add_scaled(&tensor_moment(&a.gate, t)?, Complex64::new(a.weight, 0.0));
            }
            Ok(MomentOperator {
                t,
                dim: e.dim(),
                matrix: acc,
                hermitian: e.is_inverse_closed(),
                n_samples: None,
                std_error: 0.0,
                ensemble: e.descriptor(),
            })
        }
        EnsembleKind::TwoLocalCircuit { qubits, rule } => {
            let matrix = two_local_moment(*qubits, *rule, t)?;
            Ok(MomentOperator {
                t,
                dim: e.dim(),
                matrix,
                hermitian: true,
                n_samples: None,
                std_error: 0.0,
                ensemble: e.descriptor(),
            })
        }
        _ => build_moment_operator_monte_carlo(e, t, opts.samples, opts.seed),
    }
}

#[derive(Clone)]
struct MatrixMoments {
    sum: ComplexMatrix,
    sum_sq: Vec<f64>,
}

impl std::ops::AddAssign<&MatrixMoments> for MatrixMoments {
    fn add_assign(&mut self, rhs: &MatrixMoments) {
        self.sum += &rhs.sum;
        for (a, b) in self.sum_sq.iter_mut().zip(&rhs.sum_sq) {
            *a += b;
        }
    }
}

/// Sample mean of `U^{⊗t} ⊗ Ū^{⊗t}` over `samples` draws of `draw(i)`, with the largest
/// entrywise standard error.
fn sampled_moment(
    side: usize,
    t: usize,
    samples: usize,
    draw: impl Fn(usize) -> UnitaryMatrix + Sync,
) -> Result<(ComplexMatrix, f64)> {
    let zero = MatrixMoments {
        sum: ComplexMatrix::zeros(side, side),
        sum_sq: vec![0.0; side * side],
    };
    let total = par_block_sum(samples, zero, |i| {
        let m = tensor_moment(&draw(i), t).expect("order checked");
        let sum_sq = m.as_slice().iter().map(|z| z.norm_sqr()).collect();
        MatrixMoments { sum: m, sum_sq }
    });
    let n = samples as f64;
    let mean = total.sum.scale_real(1.0 / n);
    let std_error = if samples < 2 {
        0.0
    } else {
        mean.as_slice()
            .iter()
            .zip(&total.sum_sq)
            .map(|(mu, &s2)| (((s2 - n * mu.norm_sqr()) / (n - 1.0)).max(0.0) / n).sqrt())
            .fold(0.0, f64::max)
    };
    Ok((mean, std_error))
}

/// Monte Carlo moment operator from `samples` single-gate draws.
pub fn build_moment_operator_monte_carlo(
    e: &GateEnsemble,
    t: usize,
    samples: usize,
    seed: u64,
) -> Result<MomentOperator> {
    check_order(t)?;
    check_capacity(e.dim(), t)?;
    if samples == 0 {
        return Err(Error::Usage(
            "Monte Carlo moment build needs at least one sample".into(),
        ));
    }
    let side = e.dim().pow(2 * t as u32);
    let (matrix, std_error) = sampled_moment(side, t, samples, |i| {
        let mut rng = SeededRng::derive(seed, &[MOMENT_STREAM, t as u64, i as u64]);
        e.sample_gate(&mut rng)
    })?;
    Ok(MomentOperator {
        t,
        dim: e.dim(),
        matrix,
        hermitian: false,
        n_samples: Some(samples),
        std_error,
        ensemble: e.descriptor(),
    })
}

/// Operator acting as `op` on the listed qubits (most significant first) and as the
/// identity elsewhere, in a register of `total` qubits.
pub fn embed_on_qubits(op: &ComplexMatrix, positions: &[usize], total: usize) -> ComplexMatrix {
    let k = positions.len();
    assert_eq!(op.rows(), 1 << k);
    let dim = 1usize << total;
    let bit = |q: usize| 1usize << (total - 1 - q);
    let scatter: Vec<usize> = (0..1usize << k)
        .map(|local| {
            (0..k)
                .filter(|&i| local & (1 << (k - 1 - i)) != 0)
                .map(|i| bit(positions[i]))
                .sum()
        })
        .collect();
    let mask: usize = positions.iter().map(|&q| bit(q)).sum();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for rest in (0..dim).filter(|x| x & mask == 0) {
        for (i, &si) in scatter.iter().enumerate() {
            for (j, &sj) in scatter.iter().enumerate() {
                let v = op[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    out[(rest | si, rest | sj)] = v;
                }
            }
        }
    }
    out
}

/// Moment of one local-rule gate on two qubits, indexed like `tensor_moment` of a 4×4 gate.
pub fn local_rule_moment(rule: LocalRule, t: usize) -> Result<ComplexMatrix> {
    check_order(t)?;
    match rule {
        LocalRule::HaarSu4 => haar_projector(t, 4),
        LocalRule::CnotPlusSu2 => {
            let cnot = tensor_moment(&UnitaryMatrix::cnot(), t)?;
            // Independent single-qubit Haar twirls: the high bit of every copy, then the low bit.
            let p2 = haar_projector(t, 2)?;
            let qubits = 4 * t;
            let high: Vec<usize> = (0..2 * t).map(|c| 2 * c).collect();
            let low: Vec<usize> = (0..2 * t).map(|c| 2 * c + 1).collect();
            let twirl = embed_on_qubits(&p2, &high, qubits).matmul(&embed_on_qubits(&p2, &low, qubits));
            let mut l = cnot.scale_real(0.5);
            l.add_scaled(&twirl, Complex64::new(0.5, 0.0));
            Ok(l)
        }
        LocalRule::DiagonalPhase => {
            let side = 4usize.pow(2 * t as u32);
            let mut l = ComplexMatrix::zeros(side, side);
            for idx in 0..side {
                let digits: Vec<usize> = (0..2 * t).map(|c| (idx >> (2 * (2 * t - 1 - c))) & 3).collect();
                let mut x = digits[..t].to_vec();
                let mut y = digits[t..].to_vec();
                x.sort_unstable();
                y.sort_unstable();
                if x == y {
                    l[(idx, idx)] = Complex64::new(1.0, 0.0);
                }
            }
            Ok(l)
        }
    }
}

/// Exact moment operator of a two-local circuit step: the average over ordered qubit pairs of
/// the local-rule moment embedded on that pair in every tensor copy.
pub fn two_local_moment(qubits: usize, rule: LocalRule, t: usize) -> Result<ComplexMatrix> {
    check_order(t)?;
    check_capacity(1 << qubits, t)?;
    let local = local_rule_moment(rule, t)?;
    let total = 2 * t * qubits;
    let side = 1usize << total;
    let mut acc = ComplexMatrix::zeros(side, side);
    let pairs: Vec<(usize, usize)> = (0..qubits)
        .flat_map(|a| (0..qubits).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let w = Complex64::new(1.0 / pairs.len() as f64, 0.0);
    for &(a, b) in &pairs {
        let positions: Vec<usize> = (0..2 * t).flat_map(|c| [c * qubits + a, c * qubits + b]).collect();
        acc.add_scaled(&embed_on_qubits(&local, &positions, total), w);
    }
    Ok(acc)
}

/// Gap of a moment operator to the Haar projector of the same order and dimension.
pub fn spectral_gap(m: &MomentOperator) -> Result<GapReport> {
    let basis = haar_invariant_basis(m.t, m.dim)?;
    let lambda_star = deflated_leading_value(&m.matrix, &basis, DEFAULT_NORM_TOL)?;
    let p = haar_projector(m.t, m.dim)?;
    let mut a = &m.matrix - &p;
    for _ in 0..RATE_SQUARINGS {
        a = a.matmul(&a);
    }
    let rate_alpha = operator_norm(&a, DEFAULT_NORM_TOL)?.powf(1.0 / f64::from(1u32 << RATE_SQUARINGS));
    if m.hermitian && (rate_alpha - lambda_star).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "Hermitian moment operator with lambda_star {lambda_star} but asymptotic rate {rate_alpha}"
        )));
    }
    Ok(GapReport {
        lambda_star,
        rate_alpha,
        t: m.t,
        dim: m.dim,
        ensemble: m.ensemble.clone(),
        n_samples: m.n_samples,
        std_error: m.std_error,
    })
}

fn check_depths(depths: &[usize]) -> Result<()> {
    if depths.is_empty() || depths[0] == 0 || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(format!(
            "depths must be positive and strictly ascending, got {depths:?}"
        )));
    }
    Ok(())
}

/// ‖M^m − P‖ = ‖(M − P)^m‖ for each depth.
pub fn distance_to_haar(m: &MomentOperator, depths: &[usize]) -> Result<Vec<(usize, f64)>> {
    check_depths(depths)?;
    let p = haar_projector(m.t, m.dim)?;
    let a = &m.matrix - &p;
    let mut out = Vec::with_capacity(depths.len());
    let mut power = ComplexMatrix::identity(a.rows());
    let mut at = 0usize;
    for &depth in depths {
        power = power.matmul(&a.pow((depth - at) as u64));
        at = depth;
        out.push((depth, operator_norm(&power, DEFAULT_NORM_TOL)?));
    }
    Ok(out)
}

fn is_deterministic(e: &GateEnsemble) -> bool {
    e.atoms()
        .is_some_and(|atoms| atoms.iter().filter(|a| a.weight > 0.0).count() == 1)
}

/// Predicted decay lambda_star^m against moment operators estimated from sampled depth-m
/// circuits.
pub fn predicted_vs_measured(
    e: &GateEnsemble,
    t: usize,
    depths: &[usize],
    trials: usize,
    opts: &MomentOptions,
) -> Result<ConvergenceReport> {
    check_depths(depths)?;
    let deterministic = is_deterministic(e);
    if !deterministic && trials < 1000 {
        return Err(Error::Precondition(format!(
            "Monte Carlo path needs at least 1000 trials, got {trials}"
        )));
    }
    let trials = if deterministic { 1 } else { trials };
    let op = build_moment_operator(e, t, opts)?;
    let gap = spectral_gap(&op)?;
    let exact = distance_to_haar(&op, depths)?;
    let p = haar_projector(t, e.dim())?;
    let side = p.rows();
    let stderr = if deterministic {
        0.0
    } else {
        (1.0 / trials as f64).sqrt()
    };

    let mut points = Vec::with_capacity(depths.len());
    for (di, &depth) in depths.iter().enumerate() {
        let (mean, _) = sampled_moment(side, t, trials, |i| {
            let mut rng = SeededRng::derive(opts.seed, &[MEASURE_STREAM, di as u64, i as u64]);
            e.sample_circuit(depth, &mut rng).product
        })?;
        let dev = &mean - &p;
        points.push(ConvergencePoint {
            m: depth,
            measured: dev.max_abs(),
            measured_norm: operator_norm(&dev, DEFAULT_NORM_TOL)?,
            predicted: gap.lambda_star.powi(depth as i32),
            exact_distance: exact[di].1,
            stderr,
        });
    }
    let series: Vec<(usize, f64, f64)> = points.iter().map(|p| (p.m, p.measured, p.stderr)).collect();
    let (fit, fit_error) = match fit_exponential(&series) {
        Ok(f) => (Some(f), None),
        Err(err) => (None, Some(err.to_string())),
    };
    Ok(ConvergenceReport {
        ensemble: e.descriptor(),
        t,
        dim: e.dim(),
        trials,
        lambda_star: gap.lambda_star,
        rate_alpha: gap.rate_alpha,
        points,
        fit,
        fit_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ensemble_moment_is_identity() {
        let e = GateEnsemble::from_atoms([(1.0, UnitaryMatrix::identity(2))]).unwrap();
        for t in 1..=2 {
            let m = build_moment_operator(&e, t, &MomentOptions::default()).unwrap();
            assert_eq!(m.matrix, ComplexMatrix::identity(2usize.pow(2 * t as u32)));
            let gap = spectral_gap(&m).unwrap();
            assert!((gap.lambda_star - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_phase_atom_is_unitary() {
        let e = GateEnsemble::from_atoms([(1.0, UnitaryMatrix::phase(2f64.sqrt()))]).unwrap();
        let m = build_moment_operator(&e, 1, &MomentOptions::default()).unwrap();
        assert!(m.matrix.unitarity_residual() < 1e-14);
    }

    #[test]
    fn order_three_is_unsupported() {
        let e = GateEnsemble::haar(2);
        assert!(matches!(
            build_moment_operator(&e, 3, &MomentOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn depths_must_ascend() {
        let e = GateEnsemble::from_atoms([(1.0, UnitaryMatrix::hadamard())]).unwrap();
        let m = build_moment_operator(&e, 1, &MomentOptions::default()).unwrap();
        assert!(distance_to_haar(&m, &[2, 2]).is_err());
        assert!(distance_to_haar(&m, &[0, 1]).is_err());
        assert!(distance_to_haar(&m, &[]).is_err());
    }

    #[test]
    fn embedding_single_qubit_matches_kron() {
        let x = UnitaryMatrix::pauli_x();
        let y = UnitaryMatrix::pauli_y();
        let xy = kron(&x, &y).unwrap();
        // X on qubit 2, Y on qubit 0 of three qubits: Y ⊗ I ⊗ X.
        let yx = kron(&y, &x).unwrap();
        let direct = kron(&kron(&y, &ComplexMatrix::identity(2)).unwrap(), &x).unwrap();
        assert_eq!(embed_on_qubits(&yx, &[0, 2], 3), direct);
        let swapped = kron(&kron(&y, &ComplexMatrix::identity(2)).unwrap(), &x).unwrap();
        assert_eq!(embed_on_qubits(&xy, &[2, 0], 3), swapped);
    }

    #[test]
    fn identity_ensemble_distance_is_one() {
        let e = GateEnsemble::from_atoms([(1.0, UnitaryMatrix::identity(2))]).unwrap();
        let m = build_moment_operator(&e, 1, &MomentOptions::default()).unwrap();
        for (_, d) in distance_to_haar(&m, &[1, 2, 5]).unwrap() {
            assert!((d - 1.0).abs() < 1e-12);
        }
    }
}
