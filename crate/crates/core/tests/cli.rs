mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use haarflow::cli::{exit_code, ExperimentConfig};
use haarflow::ensemble::GateEnsemble;
use haarflow::Error;

fn haarflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarflow"))
        .args(args)
        .env_remove("HAARFLOW_THREADS")
        .output()
        .unwrap()
}

fn write_ensemble(dir: &Path, name: &str, e: &GateEnsemble) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&e.to_document()).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn written(out: &Output) -> Vec<PathBuf> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(PathBuf::from)
        .collect()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(haarflow(&["--help"]).status.code(), Some(0));
    assert_eq!(haarflow(&["--version"]).status.code(), Some(0));
    assert_eq!(haarflow(&["probe", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    assert_eq!(haarflow(&["teleport"]).status.code(), Some(1));
    assert_eq!(haarflow(&["gap", "--t", "1", "--out", &out]).status.code(), Some(1));
    assert_eq!(
        haarflow(&["gap", "--ensemble", "/nonexistent.json", "--t", "1", "--out", &out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        haarflow(&[
            "haar-sample",
            "--dim",
            "2",
            "--count",
            "1",
            "--out",
            &out,
            "--threads",
            "x"
        ])
        .status
        .code(),
        Some(1)
    );
    let htt = write_ensemble(dir.path(), "htt.json", &common::htt_symmetric());
    assert_eq!(
        haarflow(&[
            "decay",
            "--ensemble",
            &htt,
            "--t",
            "1",
            "--depths",
            "5:2",
            "--out",
            &out
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        haarflow(&[
            "fourier",
            "--ensemble",
            &htt,
            "--jmax",
            "1/3",
            "--method",
            "finite_sum",
            "--out",
            &out
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn malformed_ensemble_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dim": 2, "kind": "gaussian_packet", "sigma": "wide"}"#).unwrap();
    let out = haarflow(&[
        "gap",
        "--ensemble",
        &bad.to_string_lossy(),
        "--t",
        "1",
        "--out",
        &dir.path().to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
}

#[test]
fn numerical_errors_map_to_exit_two() {
    assert_eq!(
        exit_code(&Error::InsufficientSignal {
            admissible: 1,
            noise_floor: 0.1
        }),
        2
    );
    assert_eq!(exit_code(&Error::Usage("x".into())), 1);
    assert_eq!(exit_code(&Error::Validation("x".into())), 1);
}

#[test]
fn fourier_writes_one_file_per_label() {
    let dir = tempfile::tempdir().unwrap();
    let htt = write_ensemble(dir.path(), "htt.json", &common::htt_symmetric());
    let out_dir = dir.path().join("out");
    let out = haarflow(&[
        "fourier",
        "--ensemble",
        &htt,
        "--jmax",
        "3/2",
        "--method",
        "finite_sum",
        "--out",
        &out_dir.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files = names(&out_dir);
    assert_eq!(files.len(), 6, "{files:?}");
    for tag in [
        "_j0.json",
        "_j1-2.json",
        "_j1.json",
        "_j3-2.json",
        "_seed0.json",
        "_seed0.timing.json",
    ] {
        assert!(files.iter().any(|f| f.ends_with(tag)), "missing {tag} in {files:?}");
    }
    assert!(files.iter().all(|f| f.starts_with("fourier_")));
    let block: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join(files.iter().find(|f| f.ends_with("_j1.json")).unwrap())).unwrap(),
    )
    .unwrap();
    assert_eq!(block["result"]["twice_j"], 2);
    assert_eq!(block["result"]["matrix"].as_array().unwrap().len(), 3);
}

#[test]
fn decay_csv_predicts_powers_of_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let htt = write_ensemble(dir.path(), "htt.json", &common::htt_symmetric());
    let out_dir = dir.path().join("out");
    let out = haarflow(&[
        "decay",
        "--ensemble",
        &htt,
        "--t",
        "2",
        "--depths",
        "1:9:2",
        "--out",
        &out_dir.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = written(&out);
    let json_path = paths
        .iter()
        .find(|p| p.extension().is_some_and(|e| e == "json") && !p.to_string_lossy().contains("timing"))
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    let lambda = report["result"]["gap"]["lambda_star"].as_f64().unwrap();
    let csv = std::fs::read_to_string(json_path.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,distance,predicted,stderr"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(),
        vec![1, 3, 5, 7, 9]
    );
    for r in &rows {
        assert!((r[2] - lambda.powi(r[0] as i32)).abs() < 1e-12);
        assert!((r[1] - r[2]).abs() < 1e-9);
    }
}

#[test]
fn existing_outputs_need_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let htt = write_ensemble(dir.path(), "htt.json", &common::htt_symmetric());
    let out_dir = dir.path().join("out").to_string_lossy().into_owned();
    let args = ["gap", "--ensemble", &htt, "--t", "1", "--out", &out_dir];
    assert_eq!(haarflow(&args).status.code(), Some(0));
    let again = haarflow(&args);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("exists"));
    let mut forced = args.to_vec();
    forced.push("--overwrite");
    assert_eq!(haarflow(&forced).status.code(), Some(0));
}

#[test]
fn embedded_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = write_ensemble(
        dir.path(),
        "c.json",
        &GateEnsemble::two_local(2, haarflow::ensemble::LocalRule::CnotPlusSu2).unwrap(),
    );
    let out_dir = dir.path().join("out");
    let out = haarflow(&[
        "probe",
        "purity",
        "--ensemble",
        &circuit,
        "--qubits",
        "2",
        "--depths",
        "1:6",
        "--trials",
        "50",
        "--baseline-samples",
        "500",
        "--seed",
        "4",
        "--out",
        &out_dir.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report_path = written(&out)
        .into_iter()
        .find(|p| p.to_string_lossy().ends_with("_seed4.json"))
        .unwrap();
    assert!(report_path
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("probe-purity_"));
    let text = std::fs::read_to_string(&report_path).unwrap();
    let config = ExperimentConfig::from_report(&text).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ExperimentConfig::Probe(probe) = &config else {
        panic!("probe config expected")
    };
    assert_eq!(serde_json::to_value(probe).unwrap(), value["config"]);

    let replay_dir = dir.path().join("replay");
    let replay = haarflow(&[
        "replay",
        "--report",
        &report_path.to_string_lossy(),
        "--out",
        &replay_dir.to_string_lossy(),
    ]);
    assert_eq!(replay.status.code(), Some(0));
    let name = report_path.file_name().unwrap();
    assert_eq!(std::fs::read(replay_dir.join(name)).unwrap(), text.as_bytes());
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let run = |path: &Path, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_haarflow"))
            .args([
                "haar-sample",
                "--dim",
                "3",
                "--count",
                "4",
                "--seed",
                "8",
                "--out",
                &path.to_string_lossy(),
            ])
            .env("HAARFLOW_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run(&a, "1").status.success());
    assert!(run(&b, "4").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a.timing.json").exists());
}

#[test]
fn reversal_perturbation_must_match_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = write_ensemble(
        dir.path(),
        "c.json",
        &GateEnsemble::two_local(2, haarflow::ensemble::LocalRule::HaarSu4).unwrap(),
    );
    let perturb = dir.path().join("p.json");
    std::fs::write(&perturb, "[[[0,0],[1,0]],[[1,0],[0,0]]]").unwrap();
    let out = haarflow(&[
        "probe",
        "reversal",
        "--ensemble",
        &circuit,
        "--qubits",
        "2",
        "--depths",
        "0:3",
        "--trials",
        "20",
        "--perturb",
        &perturb.to_string_lossy(),
        "--out",
        &dir.path().join("out").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
