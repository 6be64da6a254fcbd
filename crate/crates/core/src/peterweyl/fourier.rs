use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{matrix_to_pairs, GateEnsemble};
use crate::error::{Error, Result};
use crate::numkernel::spectral::{operator_norm, DEFAULT_NORM_TOL};
use crate::numkernel::sum::par_block_sum;
use crate::numkernel::{ComplexMatrix, SeededRng};

use super::quadrature::{QuadratureGrid, DEFAULT_RESOLUTION};
use super::wigner::{wigner_d, wigner_d_euler, Spin};

/// Stream tag for Monte Carlo Fourier estimates.
const FOURIER_STREAM: u64 = 0xf0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FourierMethod {
    /// Exact sum over the atoms of a discrete ensemble.
    FiniteSum,
    /// Integrates the ensemble's density against an Euler-angle grid.
    Quadrature { resolution: usize },
    /// Averages over `samples` depth-`depth` circuits, one derived stream per sample.
    MonteCarlo { samples: usize, depth: usize, seed: u64 },
}

impl FourierMethod {
    pub fn quadrature() -> Self {
        FourierMethod::Quadrature {
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FourierMethod::FiniteSum => "finite_sum",
            FourierMethod::Quadrature { .. } => "quadrature",
            FourierMethod::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Coefficient block f̂ʲ = d_j ∫ f(g) conj(Dʲ(g)) dμ(g) for one spin label.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierBlock {
    pub label: Spin,
    pub matrix: ComplexMatrix,
    pub method: String,
    pub n_samples: Option<usize>,
    /// Largest entrywise standard error of a Monte Carlo estimate.
    pub std_error: Option<f64>,
}

/// JSON form of a block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierBlockExport {
    pub twice_j: u32,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub method: String,
    pub n_samples: Option<usize>,
    pub std_error: Option<f64>,
}

impl FourierBlock {
    pub fn dim(&self) -> usize {
        self.label.dim()
    }

    /// Block of the normalized Haar measure: [1] at the trivial label, zero elsewhere.
    pub fn haar(label: Spin) -> Self {
        let d = label.dim();
        let matrix = if label.is_trivial() {
            ComplexMatrix::identity(1)
        } else {
            ComplexMatrix::zeros(d, d)
        };
        Self {
            label,
            matrix,
            method: "exact".into(),
            n_samples: None,
            std_error: None,
        }
    }

    pub fn export(&self) -> FourierBlockExport {
        FourierBlockExport {
            twice_j: self.label.twice_j,
            matrix: matrix_to_pairs(&self.matrix),
            method: self.method.clone(),
            n_samples: self.n_samples,
            std_error: self.std_error,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale_real(s),
            ..self.clone()
        }
    }
}

/// Fourier block of `e` at one spin label.
pub fn fourier_block(e: &GateEnsemble, label: Spin, method: FourierMethod) -> Result<FourierBlock> {
    let mut blocks = fourier_blocks(e, &[label], method)?;
    Ok(blocks.remove(0))
}

/// Fourier blocks of `e` at several labels. Monte Carlo estimates share one set of samples.
pub fn fourier_blocks(e: &GateEnsemble, labels: &[Spin], method: FourierMethod) -> Result<Vec<FourierBlock>> {
    if e.dim() != 2 {
        return Err(Error::Usage(format!(
            "Fourier blocks are defined for single-qubit ensembles, got {}",
            e.descriptor()
        )));
    }
    match method {
        FourierMethod::FiniteSum => finite_sum(e, labels),
        FourierMethod::Quadrature { resolution } => {
            let density = e.su2_density().ok_or_else(|| {
                Error::Usage(format!(
                    "quadrature needs an ensemble with a density, got {}",
                    e.descriptor()
                ))
            })?;
            let grid = QuadratureGrid::new(resolution);
            labels
                .iter()
                .map(|&l| Ok(fourier_block_from_density(&*density, l, &grid)))
                .collect()
        }
        FourierMethod::MonteCarlo { samples, depth, seed } => monte_carlo(e, labels, samples, depth, seed),
    }
}

fn finite_sum(e: &GateEnsemble, labels: &[Spin]) -> Result<Vec<FourierBlock>> {
    let atoms = e
        .atoms()
        .ok_or_else(|| Error::Usage(format!("finite_sum needs a discrete ensemble, got {}", e.descriptor())))?;
    labels
        .iter()
        .map(|&label| {
            let d = label.dim();
            let mut acc = ComplexMatrix::zeros(d, d);
            for a in atoms {
                let dj = wigner_d(label, &a.gate)?;
                acc.add_scaled(&dj.conj(), Complex64::new(a.weight, 0.0));
            }
            Ok(FourierBlock {
                label,
                matrix: acc.scale_real(d as f64),
                method: "finite_sum".into(),
                n_samples: None,
                std_error: None,
            })
        })
        .collect()
}

/// Sum of a block and of its entrywise squared moduli, for standard errors.
#[derive(Clone)]
struct BlockMoments {
    sum: ComplexMatrix,
    sum_sq: Vec<f64>,
}

impl std::ops::AddAssign<&BlockMoments> for BlockMoments {
    fn add_assign(&mut self, rhs: &BlockMoments) {
        self.sum += &rhs.sum;
        for (a, b) in self.sum_sq.iter_mut().zip(&rhs.sum_sq) {
            *a += b;
        }
    }
}

#[derive(Clone)]
struct MultiMoments(Vec<BlockMoments>);

impl std::ops::AddAssign<&MultiMoments> for MultiMoments {
    fn add_assign(&mut self, rhs: &MultiMoments) {
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

fn monte_carlo(
    e: &GateEnsemble,
    labels: &[Spin],
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<FourierBlock>> {
    if samples < 2 {
        return Err(Error::Usage("monte_carlo needs at least 2 samples".into()));
    }
    let zero = MultiMoments(
        labels
            .iter()
            .map(|l| BlockMoments {
                sum: ComplexMatrix::zeros(l.dim(), l.dim()),
                sum_sq: vec![0.0; l.dim() * l.dim()],
            })
            .collect(),
    );
    let total = par_block_sum(samples, zero, |i| {
        let mut rng = SeededRng::derive(seed, &[FOURIER_STREAM, depth as u64, i as u64]);
        let c = e.sample_circuit(depth, &mut rng);
        let g = c.su2_lift.expect("single-qubit circuit carries its SU(2) lift");
        MultiMoments(
            labels
                .iter()
                .map(|&l| {
                    let dj = wigner_d(l, &g).expect("label within limit").conj();
                    let sum_sq = dj.as_slice().iter().map(|z| z.norm_sqr()).collect();
                    BlockMoments { sum: dj, sum_sq }
                })
                .collect(),
        )
    });
    let n = samples as f64;
    Ok(labels
        .iter()
        .zip(total.0)
        .map(|(&label, m)| {
            let d = label.dim() as f64;
            let mean = m.sum.scale_real(1.0 / n);
            let std_error = mean
                .as_slice()
                .iter()
                .zip(&m.sum_sq)
                .map(|(mu, &s2)| {
                    let var = ((s2 - n * mu.norm_sqr()) / (n - 1.0)).max(0.0);
                    d * (var / n).sqrt()
                })
                .fold(0.0, f64::max);
            FourierBlock {
                label,
                matrix: mean.scale_real(d),
                method: "monte_carlo".into(),
                n_samples: Some(samples),
                std_error: Some(std_error),
            }
        })
        .collect())
}

/// Block of a density (w.r.t. normalized Haar measure on SU(2)) by grid quadrature.
pub fn fourier_block_from_density(
    density: &(dyn Fn(&ComplexMatrix) -> f64 + Sync),
    label: Spin,
    grid: &QuadratureGrid,
) -> FourierBlock {
    let d = label.dim();
    let acc = grid.integrate(ComplexMatrix::zeros(d, d), |node| {
        let f = density(&node.element());
        wigner_d_euler(label, node.alpha, node.beta, node.gamma)
            .conj()
            .scale_real(f * node.weight)
    });
    FourierBlock {
        label,
        matrix: acc.scale_real(d as f64),
        method: "quadrature".into(),
        n_samples: None,
        std_error: None,
    }
}

/// ‖f̂ʲ‖ / d_j.
pub fn norm_ratio(b: &FourierBlock) -> Result<f64> {
    Ok(operator_norm(&b.matrix, DEFAULT_NORM_TOL)? / b.dim() as f64)
}

/// Block of the m-th convolution power: d_j (f̂ʲ/d_j)^m.
pub fn conv_power_blocks(b: &FourierBlock, m: u64) -> Result<FourierBlock> {
    if m == 0 {
        return Err(Error::Precondition("convolution power needs m ≥ 1".into()));
    }
    let d = b.dim() as f64;
    let powered = b.matrix.scale_real(1.0 / d).pow(m).scale_real(d);
    Ok(FourierBlock {
        matrix: powered,
        method: format!("{}^*{m}", b.method),
        ..b.clone()
    })
}

/// Truncated Peter–Weyl sum Σ_j Σ_{ab} f̂ʲ_{ab} Dʲ_{ab}(g) over the given blocks.
pub fn reconstruct_density(g: &ComplexMatrix, blocks: &[FourierBlock]) -> Result<Complex64> {
    if !blocks.iter().any(|b| b.label.is_trivial()) {
        return Err(Error::Precondition("reconstruction needs the trivial label".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for b in blocks {
        let dj = wigner_d(b.label, g)?;
        total += b
            .matrix
            .as_slice()
            .iter()
            .zip(dj.as_slice())
            .map(|(f, d)| f * d)
            .sum::<Complex64>();
    }
    Ok(total)
}

/// Σ_j trace(f̂ʲ† f̂ʲ) / d_j over the given blocks.
pub fn parseval(blocks: &[FourierBlock]) -> f64 {
    blocks
        .iter()
        .map(|b| b.matrix.frobenius_norm().powi(2) / b.dim() as f64)
        .sum()
}
