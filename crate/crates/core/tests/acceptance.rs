//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line with the measured values
//! and then asserts the same condition.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use haarflow::ensemble::{GateEnsemble, LocalRule};
use haarflow::error::Error;
use haarflow::haar::haar_projector;
use haarflow::moments::{
    build_moment_operator, build_moment_operator_monte_carlo, distance_to_haar, spectral_gap, MomentOptions,
};
use haarflow::numkernel::{Complex64, ComplexMatrix, SeededRng, UnitaryMatrix};
use haarflow::peterweyl::{
    conv_power_blocks, fourier_blocks, norm_ratio, parseval, wigner_d_euler, FourierMethod, QuadratureGrid, Spin,
};
use haarflow::probes::{
    haar_purity_baseline, haar_purity_closed_form, purity_probe, rate_vs_system_size, ProbeOptions,
};

use common::{htt_symmetric, identity_delta, rel};

fn verdict(n: u32, pass: bool, elapsed: Duration, budget: Duration, detail: &str) -> bool {
    let within = elapsed <= budget;
    let ok = pass && within;
    println!(
        "{} criterion {n}: {detail} [runtime {:.1}s, budget {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn criterion_01_orthogonality() -> bool {
    let start = Instant::now();
    let grid = QuadratureGrid::new(48);
    let labels: Vec<Spin> = Spin::up_to(Spin::integer(2)).collect();
    // Every matrix element (j, a, b) with j ≤ 2, flattened.
    let index: Vec<(Spin, usize, usize)> = labels
        .iter()
        .flat_map(|&s| (0..s.dim()).flat_map(move |a| (0..s.dim()).map(move |b| (s, a, b))))
        .collect();
    let n = index.len();
    let gram = grid.integrate(ComplexMatrix::zeros(n, n), |node| {
        let mut v = Vec::with_capacity(n);
        for &s in &labels {
            let d = wigner_d_euler(s, node.alpha, node.beta, node.gamma);
            v.extend_from_slice(d.as_slice());
        }
        ComplexMatrix::outer(&v, &v).scale_real(node.weight)
    });
    let mut worst: f64 = 0.0;
    for (p, &(s, a, b)) in index.iter().enumerate() {
        for (q, &(s2, a2, b2)) in index.iter().enumerate() {
            let expected = if (s, a, b) == (s2, a2, b2) {
                1.0 / s.dim() as f64
            } else {
                0.0
            };
            worst = worst.max((gram[(p, q)] - Complex64::new(expected, 0.0)).norm());
        }
    }
    let ok = verdict(
        1,
        worst <= 1e-6,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("{n}x{n} matrix-element Gram matrix, max deviation {worst:.3e} (tol 1e-6)"),
    );
    ok
}

fn criterion_02_parseval() -> bool {
    let start = Instant::now();
    let e = GateEnsemble::gaussian_packet(0.5).unwrap();
    let labels: Vec<Spin> = Spin::up_to(Spin::integer(4)).collect();
    let blocks = fourier_blocks(&e, &labels, FourierMethod::Quadrature { resolution: 48 }).unwrap();
    let spectral = parseval(&blocks);
    let density = e.su2_density().unwrap();
    let grid = QuadratureGrid::new(48);
    let direct = grid.integrate(0.0f64, |node| density(&node.element()).powi(2) * node.weight);
    let r = rel(spectral, direct);
    let ok = verdict(
        2,
        r <= 0.01,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("sum over j<=4 = {spectral:.6}, integral of |f|^2 = {direct:.6}, relative gap {r:.3e} (tol 1e-2)"),
    );
    ok
}

fn criterion_03_norm_bound() -> bool {
    let start = Instant::now();
    let labels: Vec<Spin> = Spin::up_to(Spin::integer(3)).skip(1).collect();
    let sym = fourier_blocks(&htt_symmetric(), &labels, FourierMethod::FiniteSum).unwrap();
    let ratios: Vec<f64> = sym.iter().map(|b| norm_ratio(b).unwrap()).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let delta = fourier_blocks(&identity_delta(), &labels, FourierMethod::FiniteSum).unwrap();
    let delta_dev = delta
        .iter()
        .map(|b| (norm_ratio(b).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    let ok = verdict(
        3,
        max_ratio <= 1.0 - 1e-4 && delta_dev <= 1e-12,
        start.elapsed(),
        Duration::from_secs(10),
        &format!(
            "{{H,T,T^dag}} max norm ratio over 0<j<=3 = {max_ratio:.6} (need <= 1-1e-4); identity delta max |ratio-1| = {delta_dev:.1e} (tol 1e-12)"
        ),
    );
    ok
}

fn criterion_04_convolution_power_law() -> bool {
    let start = Instant::now();
    let n = 100_000usize;
    let tol = 5.0 / (n as f64).sqrt();
    let e = htt_symmetric();
    let labels: Vec<Spin> = Spin::up_to(Spin::integer(2)).collect();
    let base = fourier_blocks(&e, &labels, FourierMethod::FiniteSum).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_at = (0, Spin::ZERO);
    let mut over = 0usize;
    let mut entries = 0usize;
    for m in [2usize, 4, 8] {
        let mc = fourier_blocks(
            &e,
            &labels,
            FourierMethod::MonteCarlo {
                samples: n,
                depth: m,
                seed: 0,
            },
        )
        .unwrap();
        for (b, est) in base.iter().zip(&mc) {
            let predicted = conv_power_blocks(b, m as u64).unwrap();
            for (x, y) in predicted.matrix.as_slice().iter().zip(est.matrix.as_slice()) {
                let dev = (x - y).norm();
                entries += 1;
                if dev > tol {
                    over += 1;
                }
                if dev > worst {
                    worst = dev;
                    worst_at = (m, b.label);
                }
            }
        }
    }
    let ok = verdict(
        4,
        worst <= tol,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "max entrywise deviation {worst:.4e} at m={}, j={} (tol 5/sqrt(N) = {tol:.4e}); {over}/{entries} entries over",
            worst_at.0, worst_at.1
        ),
    );
    ok
}

fn criterion_05_keystone_cross_check() -> bool {
    let start = Instant::now();
    let mut ensembles = vec![
        ("{H,T,T^dag}".to_string(), htt_symmetric()),
        ("{H,T}".to_string(), common::h_t()),
        ("identity".to_string(), identity_delta()),
    ];
    let mut rng = SeededRng::new(2024, 0);
    for k in 0..5 {
        let atoms: Vec<(f64, UnitaryMatrix)> = (0..3)
            .map(|_| (1.0 / 3.0, haarflow::haar::sample_haar(2, &mut rng)))
            .collect();
        ensembles.push((format!("random#{k}"), GateEnsemble::from_atoms(atoms).unwrap()));
    }
    let mut worst: f64 = 0.0;
    for (_, e) in &ensembles {
        let m = build_moment_operator(e, 1, &MomentOptions::default()).unwrap();
        let gap = spectral_gap(&m).unwrap().lambda_star;
        let block = fourier_blocks(e, &[Spin::integer(1)], FourierMethod::FiniteSum).unwrap();
        let ratio = norm_ratio(&block[0]).unwrap();
        worst = worst.max((gap - ratio).abs());
    }
    let ok = verdict(
        5,
        worst <= 1e-3,
        start.elapsed(),
        Duration::from_secs(10),
        &format!(
            "{} single-qubit ensembles, max |lambda_star(t=1) - norm_ratio(j=1)| = {worst:.3e} (tol 1e-3)",
            ensembles.len()
        ),
    );
    ok
}

fn criterion_06_exact_decay_hermitian() -> bool {
    let start = Instant::now();
    let depths: Vec<usize> = (1..=32).collect();
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for t in [1usize, 2] {
        let m = build_moment_operator(&htt_symmetric(), t, &MomentOptions::default()).unwrap();
        assert!(m.hermitian);
        let lambda = spectral_gap(&m).unwrap().lambda_star;
        let series = distance_to_haar(&m, &depths).unwrap();
        let dev = series
            .iter()
            .map(|&(k, d)| rel(d, lambda.powi(k as i32)))
            .fold(0.0, f64::max);
        detail.push(format!("t={t}: lambda_star={lambda:.6}, max rel dev {dev:.2e}"));
        worst = worst.max(dev);
    }
    let ok = verdict(
        6,
        worst <= 1e-8,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("{{H,T,T^dag}} m=1..32, {} (tol 1e-8)", detail.join("; ")),
    );
    ok
}

fn criterion_07_haar_oracle() -> bool {
    let start = Instant::now();
    let m = build_moment_operator_monte_carlo(&GateEnsemble::haar(4), 1, 100_000, 0).unwrap();
    let proj_dev = m.matrix.max_abs_diff(&haar_projector(1, 4).unwrap());
    let (purity, se) = haar_purity_baseline(2, &[0], 100_000, 0).unwrap();
    let closed = haar_purity_closed_form(2, 2);
    let z = (purity - closed).abs() / se;
    let ok = verdict(
        7,
        proj_dev <= 5e-3 && se <= 1e-3 && z <= 4.0,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "D=4 twirl max deviation {proj_dev:.3e} (tol 5e-3); purity baseline {purity:.5} +- {se:.2e} (tol 1e-3), closed form {closed:.5}, {z:.2} standard errors (tol 4)"
        ),
    );
    ok
}

fn criterion_08_probe_convergence() -> bool {
    let start = Instant::now();
    let opts = ProbeOptions::new(4000, 0);
    let e = GateEnsemble::two_local(2, LocalRule::HaarSu4).unwrap();

    let at20 = purity_probe(&e, 2, &[0], &[20], &opts).unwrap();
    let p = &at20.points[0];
    let combined = p.stderr.hypot(at20.baseline_stderr);
    let z20 = (p.mean - at20.baseline).abs() / combined;
    let depth20_ok = z20 <= 3.0;

    let depths: Vec<usize> = (1..=16).collect();
    let series = purity_probe(&e, 2, &[0], &depths, &opts).unwrap();
    let (fit_ok, fit_detail) = match series.fit() {
        Ok(f) => (
            f.r_squared >= 0.95,
            format!("fit rate {:.4}, r^2 {:.4}", f.rate, f.r_squared),
        ),
        Err(err) => (false, format!("fit over depths 1-16 failed: {err}")),
    };

    let diag = GateEnsemble::two_local(2, LocalRule::DiagonalPhase).unwrap();
    let diag_series = purity_probe(&diag, 2, &[0], &depths, &opts).unwrap();
    let (diag_ok, diag_detail) = match diag_series.fit() {
        Ok(f) => (
            (f.rate - 1.0).abs() <= 1e-2,
            format!("diagonal rule rate {:.6}", f.rate),
        ),
        Err(err @ Error::InsufficientSignal { .. }) => (true, format!("diagonal rule: {err}")),
        Err(err) => (false, format!("diagonal rule: unexpected {err}")),
    };

    let ok = verdict(
        8,
        depth20_ok && fit_ok && diag_ok,
        start.elapsed(),
        Duration::from_secs(300),
        &format!(
            "2-qubit haar_su4 depth 20 purity {:.5} vs baseline {:.5} ({z20:.2} se, tol 3); {fit_detail} (need r^2 >= 0.95); {diag_detail}",
            p.mean, at20.baseline
        ),
    );
    ok
}

fn criterion_09_rate_vs_size() -> bool {
    let start = Instant::now();
    let depths: Vec<usize> = (1..=20).collect();
    let opts = ProbeOptions::new(1000, 0);
    let table = rate_vs_system_size(LocalRule::CnotPlusSu2, &[2, 3, 4], 1, &depths, &opts).unwrap();
    let json = serde_json::to_string(&table).unwrap();
    let reparsed: haarflow::probes::ScalingTable = serde_json::from_str(&json).unwrap();
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| match &r.fit {
            Some(f) => format!("n={} rate {:.5} r^2 {:.6}", r.qubits, f.rate, f.r_squared),
            None => format!("n={} {}", r.qubits, r.error.as_deref().unwrap_or("no fit")),
        })
        .collect();
    let all_fit = table.rows.len() == 3 && table.rows.iter().all(|r| r.fit.is_some_and(|f| f.r_squared >= 0.95));
    let ok = verdict(
        9,
        all_fit && reparsed == table,
        start.elapsed(),
        Duration::from_secs(600),
        &format!(
            "cnot_plus_su2, t=1: {} (need r^2 >= 0.95 each; JSON table round-trips)",
            rows.join("; ")
        ),
    );
    ok
}

fn haarflow_bin() -> &'static str {
    env!("CARGO_BIN_EXE_haarflow")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(haarflow_bin())
        .args(args)
        .env("HAARFLOW_THREADS", "4")
        .output()
        .expect("spawn haarflow")
}

/// Report files (everything except timing sidecars) with their contents, sorted by name.
fn reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".timing.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn criterion_10_reproducibility() -> bool {
    let start = Instant::now();
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let write_doc = |name: &str, e: &GateEnsemble| {
        let path = w.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(&e.to_document()).unwrap()).unwrap();
        path.to_string_lossy().into_owned()
    };
    let htt = write_doc("htt.json", &htt_symmetric());
    let packet = write_doc("packet.json", &GateEnsemble::gaussian_packet(0.7).unwrap());
    let circuit = write_doc("circuit.json", &GateEnsemble::two_local(3, LocalRule::HaarSu4).unwrap());

    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "fourier",
            vec!["fourier", "--ensemble", &htt, "--jmax", "3/2", "--method", "finite_sum"],
        ),
        (
            "fourier-mc",
            vec![
                "fourier",
                "--ensemble",
                &packet,
                "--jmax",
                "1",
                "--method",
                "monte_carlo",
                "--samples",
                "2000",
                "--seed",
                "5",
            ],
        ),
        ("gap", vec!["gap", "--ensemble", &htt, "--t", "2"]),
        (
            "gap-mc",
            vec![
                "gap",
                "--ensemble",
                &packet,
                "--t",
                "1",
                "--samples",
                "3000",
                "--seed",
                "9",
            ],
        ),
        (
            "decay",
            vec![
                "decay",
                "--ensemble",
                &htt,
                "--t",
                "1",
                "--depths",
                "1:20:3",
                "--trials",
                "1000",
                "--seed",
                "2",
            ],
        ),
        (
            "purity",
            vec![
                "probe",
                "purity",
                "--ensemble",
                &circuit,
                "--qubits",
                "3",
                "--depths",
                "1:40",
                "--trials",
                "200",
                "--seed",
                "7",
                "--baseline-samples",
                "2000",
            ],
        ),
        (
            "reversal",
            vec![
                "probe",
                "reversal",
                "--ensemble",
                &circuit,
                "--qubits",
                "3",
                "--depths",
                "0:10:2",
                "--trials",
                "200",
                "--seed",
                "7",
                "--baseline-samples",
                "2000",
            ],
        ),
        (
            "scaling",
            vec![
                "scaling",
                "--rule",
                "cnot_plus_su2",
                "--qubits",
                "2:3",
                "--t",
                "1",
                "--depths",
                "1:10",
                "--trials",
                "100",
                "--seed",
                "1",
            ],
        ),
    ]
    .into_iter()
    .map(|(name, v)| (name, v.into_iter().map(String::from).collect()))
    .collect();

    let mut failures = Vec::new();
    for (name, args) in &commands {
        let a = w.join(format!("{name}-a"));
        let b = w.join(format!("{name}-b"));
        for (dir, threads) in [(&a, "1"), (&b, "3")] {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            let dir_s = dir.to_string_lossy().into_owned();
            full.extend(["--out", &dir_s, "--threads", threads]);
            let out = run_cli(&full);
            if !out.status.success() {
                failures.push(format!(
                    "{name}: exit {:?}: {}",
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
        let (ra, rb) = (reports(&a), reports(&b));
        if ra.is_empty() || ra != rb {
            failures.push(format!("{name}: reports differ between reruns"));
            continue;
        }
        // Replaying the embedded config of the main report reproduces every file it names.
        let main = ra
            .iter()
            .filter(|(n, _)| n.ends_with(".json"))
            .min_by_key(|(n, _)| n.len())
            .map(|(n, _)| a.join(n))
            .unwrap();
        let c = w.join(format!("{name}-replay"));
        let out = run_cli(&[
            "replay",
            "--report",
            &main.to_string_lossy(),
            "--out",
            &c.to_string_lossy(),
        ]);
        if !out.status.success() || reports(&c) != ra {
            failures.push(format!("{name}: replay did not reproduce the reports"));
        }
    }

    let hs1 = w.join("hs1.json");
    let hs2 = w.join("hs2.json");
    for p in [&hs1, &hs2] {
        let out = run_cli(&[
            "haar-sample",
            "--dim",
            "2",
            "--count",
            "3",
            "--seed",
            "1",
            "--out",
            &p.to_string_lossy(),
        ]);
        if !out.status.success() {
            failures.push(format!("haar-sample: exit {:?}", out.status.code()));
        }
    }
    if std::fs::read(&hs1).ok() != std::fs::read(&hs2).ok() {
        failures.push("haar-sample: files differ".into());
    }

    let ok = verdict(
        10,
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(600),
        &format!(
            "{} subcommand invocations rerun with 1 and 3 threads plus replay, haar-sample twice: {}",
            commands.len(),
            if failures.is_empty() {
                "all byte-identical".to_string()
            } else {
                failures.join(" | ")
            }
        ),
    );
    ok
}

fn main() {
    let criteria: [(&str, fn() -> bool); 10] = [
        ("criterion_01_orthogonality", criterion_01_orthogonality),
        ("criterion_02_parseval", criterion_02_parseval),
        ("criterion_03_norm_bound", criterion_03_norm_bound),
        ("criterion_04_convolution_power_law", criterion_04_convolution_power_law),
        ("criterion_05_keystone_cross_check", criterion_05_keystone_cross_check),
        ("criterion_06_exact_decay_hermitian", criterion_06_exact_decay_hermitian),
        ("criterion_07_haar_oracle", criterion_07_haar_oracle),
        ("criterion_08_probe_convergence", criterion_08_probe_convergence),
        ("criterion_09_rate_vs_size", criterion_09_rate_vs_size),
        ("criterion_10_reproducibility", criterion_10_reproducibility),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, criterion) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        match std::panic::catch_unwind(criterion) {
            Ok(true) => {}
            Ok(false) => failed.push(name),
            Err(_) => {
                println!("FAIL {name}: panicked");
                failed.push(name);
            }
        }
    }
    println!(
        "acceptance: {} passed; {} failed {failed:?}",
        ran - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
