//! Operational test functions (subsystem purity, motion-reversal fidelity) evaluated on
//! sampled circuits, and the exponential-rate fit shared by every convergence experiment.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleKind, GateEnsemble, LocalRule};
use crate::error::{Error, Result};
use crate::haar::sample_haar_state;
use crate::moments::{build_moment_operator, distance_to_haar, MomentOptions};
use crate::numkernel::sum::{par_block_sum, Moments};
use crate::numkernel::unitary::UnitaryMatrix;
use crate::numkernel::{inner, reduced_state, ComplexMatrix, SeededRng};

pub const DEFAULT_BASELINE_SAMPLES: usize = 100_000;
/// Fits need at least this many admissible points.
pub const MIN_FIT_POINTS: usize = 4;
/// Admissible points must exceed this many combined standard errors.
pub const NOISE_FLOOR_SIGMAS: f64 = 3.0;
/// Absolute floor for noise-free series, below which values are treated as rounding.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;
/// Largest dense moment operator side used by `rate_vs_system_size` before it switches to
/// the sampled purity probe.
pub const DENSE_SIDE_LIMIT: usize = 1024;
pub const MAX_SCALING_QUBITS: usize = 5;

const PURITY_STREAM: u64 = 0x50;
const REVERSAL_STREAM: u64 = 0x52;
const BASELINE_STREAM: u64 = 0x5b;

pub const REVERSAL_DEFINITION: &str =
    "F = |<0|U^dagger L U|0>|^2 with U the sampled circuit and L the perturbation (one interpretation of motion-reversal fidelity)";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub trials: usize,
    pub seed: u64,
    pub baseline_samples: usize,
}

impl ProbeOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            baseline_samples: DEFAULT_BASELINE_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub m: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub probe: String,
    pub ensemble: String,
    pub trials: usize,
    pub points: Vec<ProbePoint>,
    pub baseline: f64,
    pub baseline_stderr: f64,
    pub baseline_source: String,
    /// Exact statistic evaluated, recorded so alternative forms stay distinguishable.
    pub definition: String,
}

impl ProbeSeries {
    /// `(m, |mean − baseline|, combined stderr)` for every point.
    pub fn deviations(&self) -> Vec<(usize, f64, f64)> {
        self.points
            .iter()
            .map(|p| {
                let se = p.stderr.hypot(self.baseline_stderr);
                (p.m, (p.mean - self.baseline).abs(), se)
            })
            .collect()
    }

    pub fn fit(&self) -> Result<FitResult> {
        fit_exponential(&self.deviations())
    }

    /// CSV with header `m,mean,stderr,baseline,baseline_stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,mean,stderr,baseline,baseline_stderr\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.m, p.mean, p.stderr, self.baseline, self.baseline_stderr
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// exp(slope) of ln|deviation| against depth.
    pub rate: f64,
    /// Intercept of the same line: ln of the extrapolated depth-0 deviation.
    pub offset: f64,
    pub r_squared: f64,
    /// First and last depth of the admissible window.
    pub window: [usize; 2],
}

fn check_schedule(depths: &[usize]) -> Result<()> {
    if depths.is_empty() || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(format!(
            "depth schedule must be nonempty and strictly increasing, got {depths:?}"
        )));
    }
    Ok(())
}

fn basis_state(dim: usize) -> Vec<Complex64> {
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    psi
}

/// trace(ρ²) for a Hermitian ρ.
fn purity_of(rho: &ComplexMatrix) -> f64 {
    rho.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

fn sample_statistic(n: usize, f: impl Fn(usize) -> f64 + Sync) -> Moments {
    par_block_sum(n, Moments::default(), |i| Moments::of(f(i)))
}

fn validate_cut(qubits: usize, cut: &[usize]) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = cut.iter().copied().collect();
    if set.len() != cut.len() {
        return Err(Error::Usage(format!("cut {cut:?} repeats a qubit")));
    }
    if let Some(&q) = set.iter().find(|&&q| q >= qubits) {
        return Err(Error::Usage(format!("cut qubit {q} out of range for {qubits} qubits")));
    }
    if set.is_empty() || set.len() == qubits {
        return Err(Error::Usage(format!(
            "cut must be a nonempty proper subset of 0..{qubits}"
        )));
    }
    Ok(set.into_iter().collect())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 trials for an error bar, got {trials}"
        )));
    }
    Ok(())
}

/// Haar value of the subsystem purity, estimated from `samples` Haar states.
pub fn haar_purity_baseline(qubits: usize, cut: &[usize], samples: usize, seed: u64) -> Result<(f64, f64)> {
    let cut = validate_cut(qubits, cut)?;
    check_trials(samples)?;
    let dims = vec![2; qubits];
    let stats = sample_statistic(samples, |i| {
        let mut rng = SeededRng::derive(seed, &[BASELINE_STREAM, PURITY_STREAM, i as u64]);
        let psi = sample_haar_state(1 << qubits, &mut rng);
        purity_of(&reduced_state(&psi, &dims, &cut).expect("validated cut"))
    });
    Ok((stats.mean(), stats.std_error()))
}

/// Closed-form Haar average of trace(ρ_A²) for a bipartition into dimensions `d_a`, `d_b`.
pub fn haar_purity_closed_form(d_a: usize, d_b: usize) -> f64 {
    let (a, b) = (d_a as f64, d_b as f64);
    (a + b) / (a * b + 1.0)
}

/// Mean subsystem purity of circuit-evolved |0…0⟩ at every depth.
pub fn purity_probe(
    e: &GateEnsemble,
    qubits: usize,
    cut: &[usize],
    depths: &[usize],
    opts: &ProbeOptions,
) -> Result<ProbeSeries> {
    if let EnsembleKind::TwoLocalCircuit { qubits: q, .. } = e.kind() {
        if *q != qubits {
            return Err(Error::Usage(format!(
                "ensemble acts on {q} qubits, probe asked for {qubits}"
            )));
        }
    }
    if qubits == 0 || qubits >= usize::BITS as usize || e.dim() != 1 << qubits {
        return Err(Error::Shape(format!(
            "ensemble dimension {} is not 2^{qubits}",
            e.dim()
        )));
    }
    let cut = validate_cut(qubits, cut)?;
    check_schedule(depths)?;
    check_trials(opts.trials)?;
    let dims = vec![2; qubits];
    let psi0 = basis_state(e.dim());

    let points = depths
        .iter()
        .enumerate()
        .map(|(di, &m)| {
            let stats = sample_statistic(opts.trials, |i| {
                let mut rng = SeededRng::derive(opts.seed, &[PURITY_STREAM, di as u64, i as u64]);
                let psi = e.evolve_state(m, &mut rng, &psi0);
                purity_of(&reduced_state(&psi, &dims, &cut).expect("validated cut"))
            });
            ProbePoint {
                m,
                mean: stats.mean(),
                stderr: stats.std_error(),
            }
        })
        .collect();
    let (baseline, baseline_stderr) = haar_purity_baseline(qubits, &cut, opts.baseline_samples, opts.seed)?;
    Ok(ProbeSeries {
        probe: "purity".into(),
        ensemble: e.descriptor(),
        trials: opts.trials,
        points,
        baseline,
        baseline_stderr,
        baseline_source: format!("Monte Carlo over {} Haar states", opts.baseline_samples),
        definition: format!("trace(rho_A^2) of |0...0> evolved by the circuit, A = qubits {cut:?}"),
    })
}

fn return_fidelity(lambda: &ComplexMatrix, phi: &[Complex64]) -> f64 {
    inner(phi, &lambda.matvec(phi)).norm_sqr()
}

/// Haar value of the motion-reversal fidelity for `perturbation`.
pub fn haar_reversal_baseline(perturbation: &UnitaryMatrix, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_trials(samples)?;
    let stats = sample_statistic(samples, |i| {
        let mut rng = SeededRng::derive(seed, &[BASELINE_STREAM, REVERSAL_STREAM, i as u64]);
        return_fidelity(perturbation, &sample_haar_state(perturbation.dim(), &mut rng))
    });
    Ok((stats.mean(), stats.std_error()))
}

/// Mean return probability |⟨0|U† Λ U|0⟩|² over sampled circuits U at every depth.
pub fn motion_reversal_probe(
    e: &GateEnsemble,
    perturbation: &UnitaryMatrix,
    depths: &[usize],
    opts: &ProbeOptions,
) -> Result<ProbeSeries> {
    if perturbation.dim() != e.dim() {
        return Err(Error::Shape(format!(
            "perturbation is {}×{}, ensemble dimension is {}",
            perturbation.dim(),
            perturbation.dim(),
            e.dim()
        )));
    }
    check_schedule(depths)?;
    check_trials(opts.trials)?;
    let psi0 = basis_state(e.dim());
    let points = depths
        .iter()
        .enumerate()
        .map(|(di, &m)| {
            let stats = sample_statistic(opts.trials, |i| {
                let mut rng = SeededRng::derive(opts.seed, &[REVERSAL_STREAM, di as u64, i as u64]);
                return_fidelity(perturbation, &e.evolve_state(m, &mut rng, &psi0))
            });
            ProbePoint {
                m,
                mean: stats.mean(),
                stderr: stats.std_error(),
            }
        })
        .collect();
    let (baseline, baseline_stderr) = haar_reversal_baseline(perturbation, opts.baseline_samples, opts.seed)?;
    Ok(ProbeSeries {
        probe: "reversal".into(),
        ensemble: e.descriptor(),
        trials: opts.trials,
        points,
        baseline,
        baseline_stderr,
        baseline_source: format!("Monte Carlo over {} Haar states", opts.baseline_samples),
        definition: REVERSAL_DEFINITION.into(),
    })
}

/// Weighted least-squares fit of ln|value| against depth.
///
/// Input rows are `(m, |value − baseline|, stderr)` with strictly increasing `m`. A point is
/// admissible when its value exceeds `max(3·stderr, 1e-12)`; the window is the first
/// contiguous run of admissible points. Weights are `(value/stderr)²`, the inverse variance
/// of the logarithm, unless some point in the window has zero stderr, in which case the fit
/// is unweighted.
pub fn fit_exponential(points: &[(usize, f64, f64)]) -> Result<FitResult> {
    if points.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Usage("fit input depths must be strictly increasing".into()));
    }
    let floor_of = |se: f64| (NOISE_FLOOR_SIGMAS * se).max(ABSOLUTE_FLOOR);
    let admissible = |&&(_, y, se): &&(usize, f64, f64)| y.is_finite() && y.abs() > floor_of(se);
    let window: Vec<(usize, f64, f64)> = points
        .iter()
        .skip_while(|p| !admissible(p))
        .take_while(admissible)
        .copied()
        .collect();
    if window.len() < MIN_FIT_POINTS {
        let noise_floor = points.iter().map(|p| floor_of(p.2)).fold(ABSOLUTE_FLOOR, f64::max);
        return Err(Error::InsufficientSignal {
            admissible: window.len(),
            noise_floor,
        });
    }

    let weighted = window.iter().all(|p| p.2 > 0.0);
    let rows: Vec<(f64, f64, f64)> = window
        .iter()
        .map(|&(m, y, se)| {
            let w = if weighted { (y / se).powi(2) } else { 1.0 };
            (m as f64, y.abs().ln(), w)
        })
        .collect();
    let sw: f64 = rows.iter().map(|r| r.2).sum();
    let xbar = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let ybar = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - xbar).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - xbar) * (r.1 - ybar)).sum();
    let syy: f64 = rows.iter().map(|r| r.2 * (r.1 - ybar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = rows.iter().map(|r| r.2 * (r.1 - intercept - slope * r.0).powi(2)).sum();
    let r_squared = if ss_res <= 1e-24 * sw || syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        rate: slope.exp(),
        offset: intercept,
        r_squared,
        window: [window[0].0, window[window.len() - 1].0],
    })
}

/// Fit of a noise-free distance series such as the output of `distance_to_haar`.
pub fn fit_distances(series: &[(usize, f64)]) -> Result<FitResult> {
    let rows: Vec<(usize, f64, f64)> = series.iter().map(|&(m, d)| (m, d, 0.0)).collect();
    fit_exponential(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub qubits: usize,
    /// `moment_distance` (exact dense operator) or `purity` (sampled probe).
    pub method: String,
    pub fit: Option<FitResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rule: LocalRule,
    pub t: usize,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
}

/// Fitted convergence rate of two-local circuits for each qubit count. Uses the exact
/// moment-operator distance when the dense operator has side at most 1024, otherwise the
/// sampled purity probe on the first ⌊n/2⌋ qubits. Numerical failures of a single row
/// (such as insufficient signal) are recorded in that row.
pub fn rate_vs_system_size(
    rule: LocalRule,
    qubit_range: &[usize],
    t: usize,
    depths: &[usize],
    opts: &ProbeOptions,
) -> Result<ScalingTable> {
    if !(1..=2).contains(&t) {
        return Err(Error::Unsupported(format!("moment order t = {t}")));
    }
    let mut rows = Vec::with_capacity(qubit_range.len());
    for &n in qubit_range {
        if n > MAX_SCALING_QUBITS {
            return Err(Error::Limit(format!(
                "{n} qubits; scaling runs support at most {MAX_SCALING_QUBITS}"
            )));
        }
        let e = GateEnsemble::two_local(n, rule)?;
        let dense = (1usize << (2 * t * n)) <= DENSE_SIDE_LIMIT;
        let (method, outcome) = if dense {
            let m = build_moment_operator(
                &e,
                t,
                &MomentOptions {
                    samples: 0,
                    seed: opts.seed,
                },
            )?;
            let series = distance_to_haar(&m, depths)?;
            ("moment_distance", fit_distances(&series))
        } else {
            let cut: Vec<usize> = (0..n / 2).collect();
            let series = purity_probe(&e, n, &cut, depths, opts)?;
            ("purity", series.fit())
        };
        let (fit, error) = match outcome {
            Ok(f) => (Some(f), None),
            Err(err) if err.is_numerical() => (None, Some(err.to_string())),
            Err(err) => return Err(err),
        };
        rows.push(ScalingRow {
            qubits: n,
            method: method.into(),
            fit,
            error,
        });
    }
    Ok(ScalingTable {
        rule,
        t,
        depths: depths.to_vec(),
        trials: opts.trials,
        seed: opts.seed,
        rows,
    })
}
