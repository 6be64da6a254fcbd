//! The `haarflow` experiment runner.
//!
//! Every subcommand resolves its flags into a serializable config, runs, and writes a JSON
//! envelope (plus CSV where tabular) named `{subcommand}_{config hash}_seed{seed}`. Wall-clock
//! duration goes to a sibling `.timing.json` so the reports themselves stay byte-reproducible.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    matrix_from_pairs, matrix_to_pairs, parse_ensemble_document, EnsembleDocument, GateEnsemble, LocalRule,
};
use crate::error::{Error, Result};
use crate::haar::sample_haar;
use crate::moments::{
    build_moment_operator, distance_to_haar, predicted_vs_measured, spectral_gap, ConvergenceReport, GapReport,
    MomentOptions, DEFAULT_MOMENT_SAMPLES,
};
use crate::numkernel::unitary::{UnitaryMatrix, UNITARY_TOL};
use crate::numkernel::{kron, SeededRng};
use crate::peterweyl::{fourier_blocks, norm_ratio, FourierBlockExport, FourierMethod, Spin, DEFAULT_RESOLUTION};
use crate::probes::{
    motion_reversal_probe, purity_probe, rate_vs_system_size, FitResult, ProbeOptions, ProbeSeries, ScalingTable,
    DEFAULT_BASELINE_SAMPLES,
};
use crate::report::{self, distance_csv, Envelope, OutputSet};

/// Default perturbation angle for the motion-reversal probe: Rz(θ) on qubit 0.
pub const DEFAULT_PERTURBATION_ANGLE: f64 = 0.2;

const HAAR_SAMPLE_STREAM: u64 = 0x4a;

/// Inclusive integer range `A:B[:STEP]`, or a single value `A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange(pub Vec<usize>);

impl FromStr for IntRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad integer {p:?} in range {s:?}")))
        };
        let (a, b, step) = match parts.as_slice() {
            [a] => (num(a)?, num(a)?, 1),
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, st] => (num(a)?, num(b)?, num(st)?),
            _ => return Err(Error::Usage(format!("range {s:?} is not A:B[:STEP]"))),
        };
        if step == 0 || a > b {
            return Err(Error::Usage(format!("range {s:?} is empty or has zero step")));
        }
        Ok(Self((a..=b).step_by(step).collect()))
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{}", items.join(","))
    }
}

/// Comma-separated qubit indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QubitList(pub Vec<usize>);

impl FromStr for QubitList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("bad qubit index {p:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    #[value(name = "finite_sum")]
    FiniteSum,
    #[value(name = "quadrature")]
    Quadrature,
    #[value(name = "monte_carlo")]
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Purity,
    Reversal,
}

#[derive(Debug, Parser)]
#[command(name = "haarflow", version = report::VERSION, about = "Random-circuit convergence experiments")]
pub struct Cli {
    /// Worker thread cap (default: machine parallelism). Results do not depend on it.
    #[arg(long, global = true, env = "HAARFLOW_THREADS")]
    pub threads: Option<usize>,
    /// Replace existing output files.
    #[arg(long, global = true)]
    pub overwrite: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fourier blocks on SU(2) for every spin up to --jmax.
    Fourier(FourierArgs),
    /// Spectral gap of the moment operator.
    Gap(GapArgs),
    /// Distance of the m-step moment operator to the Haar projector.
    Decay(DecayArgs),
    /// Purity or motion-reversal probe on sampled circuits.
    Probe(ProbeArgs),
    /// Fitted rates of two-local circuits across qubit counts.
    Scaling(ScalingArgs),
    /// Haar-random unitaries.
    HaarSample(HaarSampleArgs),
    /// Re-run the configuration embedded in a report.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct FourierArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub jmax: Spin,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Circuit depth for Monte Carlo estimates.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Grid points per Euler angle for quadrature.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub t: usize,
    #[arg(long, default_value_t = DEFAULT_MOMENT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub depths: IntRange,
    #[arg(long, default_value_t = DEFAULT_MOMENT_SAMPLES)]
    pub samples: usize,
    /// Also estimate the moment operator of sampled depth-m circuits from this many trials.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(value_enum)]
    pub kind: ProbeKind,
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub qubits: usize,
    #[arg(long)]
    pub depths: IntRange,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Kept qubits for the purity probe.
    #[arg(long, default_value = "0")]
    pub cut: QubitList,
    /// JSON matrix (rows of [re, im] pairs) for the reversal probe; default Rz(0.2) on qubit 0.
    #[arg(long)]
    pub perturb: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BASELINE_SAMPLES)]
    pub baseline_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, value_enum)]
    pub rule: LocalRule,
    #[arg(long)]
    pub qubits: IntRange,
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub depths: IntRange,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BASELINE_SAMPLES)]
    pub baseline_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HaarSampleArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Output directory (or file, for haar-sample reports).
    #[arg(long)]
    pub out: PathBuf,
}

// Resolved configurations, embedded verbatim in every report.

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierConfig {
    pub ensemble: EnsembleDocument,
    pub jmax: Spin,
    pub method: MethodArg,
    pub samples: Option<usize>,
    pub depth: Option<usize>,
    pub resolution: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub ensemble: EnsembleDocument,
    pub t: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub ensemble: EnsembleDocument,
    pub t: usize,
    pub depths: Vec<usize>,
    pub samples: usize,
    pub trials: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub probe: ProbeKind,
    pub ensemble: EnsembleDocument,
    pub qubits: usize,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub cut: Option<Vec<usize>>,
    pub perturbation: Option<Vec<Vec<[f64; 2]>>>,
    pub baseline_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub rule: LocalRule,
    pub qubits: Vec<usize>,
    pub t: usize,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub baseline_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaarSampleConfig {
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentConfig {
    Fourier(FourierConfig),
    Gap(GapConfig),
    Decay(DecayConfig),
    Probe(ProbeConfig),
    Scaling(ScalingConfig),
    HaarSample(HaarSampleConfig),
}

impl ExperimentConfig {
    pub fn subcommand(&self) -> &'static str {
        match self {
            ExperimentConfig::Fourier(_) => "fourier",
            ExperimentConfig::Gap(_) => "gap",
            ExperimentConfig::Decay(_) => "decay",
            ExperimentConfig::Probe(_) => "probe",
            ExperimentConfig::Scaling(_) => "scaling",
            ExperimentConfig::HaarSample(_) => "haar-sample",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Fourier(c) => c.seed,
            ExperimentConfig::Gap(c) => c.seed,
            ExperimentConfig::Decay(c) => c.seed,
            ExperimentConfig::Probe(c) => c.seed,
            ExperimentConfig::Scaling(c) => c.seed,
            ExperimentConfig::HaarSample(c) => c.seed,
        }
    }

    /// Recovers the config embedded in a report.
    pub fn from_report(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        let sub = value
            .get("subcommand")
            .and_then(|s| s.as_str())
            .ok_or_else(|| Error::Validation("report has no subcommand".into()))?;
        let config = value
            .get("config")
            .cloned()
            .ok_or_else(|| Error::Validation("report has no config".into()))?;
        Ok(match sub {
            "fourier" => ExperimentConfig::Fourier(serde_json::from_value(config)?),
            "gap" => ExperimentConfig::Gap(serde_json::from_value(config)?),
            "decay" => ExperimentConfig::Decay(serde_json::from_value(config)?),
            "probe" => ExperimentConfig::Probe(serde_json::from_value(config)?),
            "scaling" => ExperimentConfig::Scaling(serde_json::from_value(config)?),
            "haar-sample" => ExperimentConfig::HaarSample(serde_json::from_value(config)?),
            other => return Err(Error::Validation(format!("unknown subcommand {other:?} in report"))),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelSummary {
    pub twice_j: u32,
    pub label: String,
    pub norm_ratio: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FourierSummary {
    pub method: String,
    pub labels: Vec<LabelSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: usize,
    pub distance: f64,
    pub predicted: f64,
    pub stderr: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecayResult {
    pub gap: GapReport,
    pub points: Vec<DecayPoint>,
    pub convergence: Option<ConvergenceReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeResult {
    pub series: ProbeSeries,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct HaarSampleResult {
    pub dim: usize,
    pub samples: Vec<UnitaryMatrix>,
}

#[derive(Debug, Serialize)]
struct Timing<'a> {
    subcommand: &'a str,
    report: String,
    seconds: f64,
}

fn read_ensemble(path: &Path) -> Result<EnsembleDocument> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read ensemble {}: {e}", path.display())))?;
    let doc = parse_ensemble_document(&text)?;
    GateEnsemble::from_document(&doc)?;
    Ok(doc)
}

fn default_perturbation(qubits: usize) -> Result<UnitaryMatrix> {
    let rz = UnitaryMatrix::rotation([0.0, 0.0, 1.0], DEFAULT_PERTURBATION_ANGLE);
    let rest = UnitaryMatrix::identity(1 << (qubits - 1));
    UnitaryMatrix::try_new(kron(&rz, &rest)?, UNITARY_TOL)
}

/// Turns parsed flags into a resolved config. Returns `None` for `replay`.
pub fn resolve(command: &Command) -> Result<Option<(ExperimentConfig, PathBuf)>> {
    Ok(Some(match command {
        Command::Fourier(a) => {
            let mc = a.method == MethodArg::MonteCarlo;
            let config = FourierConfig {
                ensemble: read_ensemble(&a.ensemble)?,
                jmax: a.jmax,
                method: a.method,
                samples: mc.then(|| a.samples.unwrap_or(DEFAULT_MOMENT_SAMPLES)),
                depth: mc.then_some(a.depth),
                resolution: (a.method == MethodArg::Quadrature).then_some(a.resolution),
                seed: a.seed,
            };
            (ExperimentConfig::Fourier(config), a.out.clone())
        }
        Command::Gap(a) => (
            ExperimentConfig::Gap(GapConfig {
                ensemble: read_ensemble(&a.ensemble)?,
                t: a.t,
                samples: a.samples,
                seed: a.seed,
            }),
            a.out.clone(),
        ),
        Command::Decay(a) => (
            ExperimentConfig::Decay(DecayConfig {
                ensemble: read_ensemble(&a.ensemble)?,
                t: a.t,
                depths: a.depths.0.clone(),
                samples: a.samples,
                trials: a.trials,
                seed: a.seed,
            }),
            a.out.clone(),
        ),
        Command::Probe(a) => {
            if a.qubits == 0 || a.qubits > 20 {
                return Err(Error::Usage(format!("--qubits {} outside 1..=20", a.qubits)));
            }
            let perturbation = match (a.kind, &a.perturb) {
                (ProbeKind::Purity, Some(_)) => {
                    return Err(Error::Usage("--perturb applies to the reversal probe only".into()))
                }
                (ProbeKind::Purity, None) => None,
                (ProbeKind::Reversal, Some(path)) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
                    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text)?;
                    UnitaryMatrix::try_new(matrix_from_pairs(&rows)?, 1e-9)?;
                    Some(rows)
                }
                (ProbeKind::Reversal, None) => Some(matrix_to_pairs(default_perturbation(a.qubits)?.matrix())),
            };
            let config = ProbeConfig {
                probe: a.kind,
                ensemble: read_ensemble(&a.ensemble)?,
                qubits: a.qubits,
                depths: a.depths.0.clone(),
                trials: a.trials,
                seed: a.seed,
                cut: (a.kind == ProbeKind::Purity).then(|| a.cut.0.clone()),
                perturbation,
                baseline_samples: a.baseline_samples,
            };
            (ExperimentConfig::Probe(config), a.out.clone())
        }
        Command::Scaling(a) => (
            ExperimentConfig::Scaling(ScalingConfig {
                rule: a.rule,
                qubits: a.qubits.0.clone(),
                t: a.t,
                depths: a.depths.0.clone(),
                trials: a.trials,
                seed: a.seed,
                baseline_samples: a.baseline_samples,
            }),
            a.out.clone(),
        ),
        Command::HaarSample(a) => (
            ExperimentConfig::HaarSample(HaarSampleConfig {
                dim: a.dim,
                count: a.count,
                seed: a.seed,
            }),
            a.out.clone(),
        ),
        Command::Replay(_) => return Ok(None),
    }))
}

fn envelope_json<C: Serialize, R: Serialize>(sub: &str, seed: u64, config: &C, result: R) -> Result<(String, String)> {
    let env = Envelope::new(sub, seed, config, result)?;
    Ok((env.config_hash.clone(), env.to_json()?))
}

fn label_tag(spin: Spin) -> String {
    if spin.twice_j.is_multiple_of(2) {
        format!("j{}", spin.twice_j / 2)
    } else {
        format!("j{}-2", spin.twice_j)
    }
}

/// Runs a resolved experiment and queues its report files under `out`.
pub fn execute(config: &ExperimentConfig, out: &Path) -> Result<OutputSet> {
    let sub = config.subcommand();
    let seed = config.seed();
    let mut files = OutputSet::new();
    match config {
        ExperimentConfig::Fourier(c) => {
            let e = GateEnsemble::from_document(&c.ensemble)?;
            let method = match c.method {
                MethodArg::FiniteSum => FourierMethod::FiniteSum,
                MethodArg::Quadrature => FourierMethod::Quadrature {
                    resolution: c.resolution.unwrap_or(DEFAULT_RESOLUTION),
                },
                MethodArg::MonteCarlo => FourierMethod::MonteCarlo {
                    samples: c.samples.unwrap_or(DEFAULT_MOMENT_SAMPLES),
                    depth: c.depth.unwrap_or(1),
                    seed: c.seed,
                },
            };
            let labels: Vec<Spin> = Spin::up_to(c.jmax).collect();
            let blocks = fourier_blocks(&e, &labels, method)?;
            let hash = report::config_hash(c)?;
            let stem = report::stem(sub, &hash, seed);
            let mut summary = Vec::with_capacity(blocks.len());
            for b in &blocks {
                let export: FourierBlockExport = b.export();
                let (_, json) = envelope_json(sub, seed, c, export)?;
                files.push(out.join(format!("{stem}_{}.json", label_tag(b.label))), json);
                summary.push(LabelSummary {
                    twice_j: b.label.twice_j,
                    label: b.label.to_string(),
                    norm_ratio: norm_ratio(b)?,
                });
            }
            let (_, json) = envelope_json(
                sub,
                seed,
                c,
                FourierSummary {
                    method: method.name().into(),
                    labels: summary,
                },
            )?;
            files.push(out.join(format!("{stem}.json")), json);
        }
        ExperimentConfig::Gap(c) => {
            let e = GateEnsemble::from_document(&c.ensemble)?;
            let m = build_moment_operator(
                &e,
                c.t,
                &MomentOptions {
                    samples: c.samples,
                    seed: c.seed,
                },
            )?;
            let gap = spectral_gap(&m)?;
            let (hash, json) = envelope_json(sub, seed, c, gap)?;
            files.push(out.join(format!("{}.json", report::stem(sub, &hash, seed))), json);
        }
        ExperimentConfig::Decay(c) => {
            let e = GateEnsemble::from_document(&c.ensemble)?;
            let opts = MomentOptions {
                samples: c.samples,
                seed: c.seed,
            };
            let m = build_moment_operator(&e, c.t, &opts)?;
            let gap = spectral_gap(&m)?;
            let points: Vec<DecayPoint> = distance_to_haar(&m, &c.depths)?
                .into_iter()
                .map(|(depth, distance)| DecayPoint {
                    m: depth,
                    distance,
                    predicted: gap.lambda_star.powi(depth as i32),
                    stderr: m.std_error,
                })
                .collect();
            let convergence = match c.trials {
                Some(trials) => Some(predicted_vs_measured(&e, c.t, &c.depths, trials, &opts)?),
                None => None,
            };
            let rows: Vec<_> = points
                .iter()
                .map(|p| (p.m, p.distance, p.predicted, p.stderr))
                .collect();
            let (hash, json) = envelope_json(
                sub,
                seed,
                c,
                DecayResult {
                    gap,
                    points,
                    convergence,
                },
            )?;
            let stem = report::stem(sub, &hash, seed);
            files.push(out.join(format!("{stem}.json")), json);
            files.push(out.join(format!("{stem}.csv")), distance_csv(&rows));
        }
        ExperimentConfig::Probe(c) => {
            let e = GateEnsemble::from_document(&c.ensemble)?;
            let opts = ProbeOptions {
                trials: c.trials,
                seed: c.seed,
                baseline_samples: c.baseline_samples,
            };
            let series = match c.probe {
                ProbeKind::Purity => {
                    let cut = c.cut.clone().unwrap_or_else(|| vec![0]);
                    purity_probe(&e, c.qubits, &cut, &c.depths, &opts)?
                }
                ProbeKind::Reversal => {
                    let rows = c
                        .perturbation
                        .as_ref()
                        .ok_or_else(|| Error::Validation("reversal probe config lacks a perturbation".into()))?;
                    let lambda = UnitaryMatrix::try_new(matrix_from_pairs(rows)?, 1e-9)?;
                    if e.dim() != 1 << c.qubits {
                        return Err(Error::Shape(format!(
                            "ensemble dimension {} is not 2^{}",
                            e.dim(),
                            c.qubits
                        )));
                    }
                    motion_reversal_probe(&e, &lambda, &c.depths, &opts)?
                }
            };
            let csv = series.to_csv();
            let (fit, fit_error) = match series.fit() {
                Ok(f) => (Some(f), None),
                Err(err) => (None, Some(err.to_string())),
            };
            let (hash, json) = envelope_json(sub, seed, c, ProbeResult { series, fit, fit_error })?;
            let probe_name = match c.probe {
                ProbeKind::Purity => "purity",
                ProbeKind::Reversal => "reversal",
            };
            let stem = report::stem(&format!("{sub}-{probe_name}"), &hash, seed);
            files.push(out.join(format!("{stem}.json")), json);
            files.push(out.join(format!("{stem}.csv")), csv);
        }
        ExperimentConfig::Scaling(c) => {
            let opts = ProbeOptions {
                trials: c.trials,
                seed: c.seed,
                baseline_samples: c.baseline_samples,
            };
            let table = rate_vs_system_size(c.rule, &c.qubits, c.t, &c.depths, &opts)?;
            let csv = scaling_csv(&table);
            let (hash, json) = envelope_json(sub, seed, c, table)?;
            let stem = report::stem(sub, &hash, seed);
            files.push(out.join(format!("{stem}.json")), json);
            files.push(out.join(format!("{stem}.csv")), csv);
        }
        ExperimentConfig::HaarSample(c) => {
            if c.dim == 0 {
                return Err(Error::Usage("--dim must be positive".into()));
            }
            let samples = (0..c.count)
                .map(|i| sample_haar(c.dim, &mut SeededRng::derive(c.seed, &[HAAR_SAMPLE_STREAM, i as u64])))
                .collect();
            let (_, json) = envelope_json(sub, seed, c, HaarSampleResult { dim: c.dim, samples })?;
            files.push(out.to_path_buf(), json);
        }
    }
    Ok(files)
}

/// CSV `qubits,method,rate,offset,r_squared,window_start,window_end,error`.
pub fn scaling_csv(table: &ScalingTable) -> String {
    let mut out = String::from("qubits,method,rate,offset,r_squared,window_start,window_end,error\n");
    for row in &table.rows {
        match (&row.fit, &row.error) {
            (Some(f), _) => out.push_str(&format!(
                "{},{},{},{},{},{},{},\n",
                row.qubits, row.method, f.rate, f.offset, f.r_squared, f.window[0], f.window[1]
            )),
            (None, err) => out.push_str(&format!(
                "{},{},,,,,,\"{}\"\n",
                row.qubits,
                row.method,
                err.as_deref().unwrap_or("").replace('"', "'")
            )),
        }
    }
    out
}

fn timing_path(report: &Path) -> PathBuf {
    let name = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{name}.timing.json"))
}

/// Runs one experiment end to end and returns the written paths.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, overwrite: bool) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let mut files = execute(config, out)?;
    let main = files
        .paths()
        .last()
        .map(Path::to_path_buf)
        .ok_or_else(|| Error::Internal("experiment produced no files".into()))?;
    let main_report = match config {
        ExperimentConfig::Decay(_) | ExperimentConfig::Probe(_) | ExperimentConfig::Scaling(_) => {
            main.with_extension("json")
        }
        _ => main,
    };
    let timing = Timing {
        subcommand: config.subcommand(),
        report: main_report
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seconds: start.elapsed().as_secs_f64(),
    };
    files.push(timing_path(&main_report), serde_json::to_string_pretty(&timing)? + "\n");
    files.commit(overwrite)
}

fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>> {
    match resolve(&cli.command)? {
        Some((config, out)) => run_experiment(&config, &out, cli.overwrite),
        None => {
            let Command::Replay(r) = &cli.command else {
                unreachable!()
            };
            let text = fs::read_to_string(&r.report)
                .map_err(|e| Error::Validation(format!("cannot read report {}: {e}", r.report.display())))?;
            let config = ExperimentConfig::from_report(&text)?;
            run_experiment(&config, &r.out, cli.overwrite)
        }
    }
}

/// Exit code for an error: 2 for numerical non-convergence, 1 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

/// Parses `argv` (including the program name), runs, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot start worker pool: {err}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
