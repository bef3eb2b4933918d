use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_delaypde");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn same_seed_gives_identical_files() {
    let sys = scenarios().join("systems/integral_feedback_g1_5.json");
    let dirs = [scratch("det_a"), scratch("det_b")];
    for d in &dirs {
        let out = run(&[
            "simulate-pde",
            "--system",
            sys.to_str().unwrap(),
            "--snapshots",
            "0,1,2",
            "--K",
            "32",
            "--T",
            "2",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n.to_string_lossy().ends_with(".csv")));
    for n in names {
        let a = fs::read(dirs[0].join(&n)).unwrap();
        let b = fs::read(dirs[1].join(&n)).expect("same file set");
        assert!(a == b, "{n:?} differs between runs");
    }
}

#[test]
fn misaligned_horizon_is_a_validation_error() {
    let sys = scenarios().join("systems/integral_feedback_g1.json");
    let out = run(&["simulate-pde", "--system", sys.to_str().unwrap(), "--K", "8", "--T", "1.05"]);
    assert_eq!(out.status.code(), Some(2));
    let rep = report(&out);
    assert_eq!(rep["error"], "validation");
    assert!(rep.to_string().contains("smallest valid K"), "{rep}");
}

#[test]
fn razumikhin_certificate_holds_at_unit_gain() {
    let sys = scenarios().join("systems/integral_feedback_g1.json");
    let cert = scenarios().join("systems/cert_k3.json");
    let out = run(&[
        "check-razumikhin",
        "--system",
        sys.to_str().unwrap(),
        "--cert",
        cert.to_str().unwrap(),
        "--samples",
        "2000",
        "--K",
        "32",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn contraction_certificate_fails_past_the_stability_boundary() {
    let dir = scratch("sharp");
    let sys = dir.join("sys.json");
    let cert = dir.join("cert.json");
    fs::write(&sys, r#"{"type": "preset", "name": "integral-feedback", "g": 2.0}"#).unwrap();
    fs::write(&cert, r#"{"weights": [1.0, 3.0], "lambda": 0.9}"#).unwrap();
    let out = run(&[
        "check-razumikhin",
        "--system",
        sys.to_str().unwrap(),
        "--cert",
        cert.to_str().unwrap(),
        "--samples",
        "2000",
        "--K",
        "32",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn feedback_demo_writes_traces() {
    let dir = scratch("demo");
    let out = run(&["feedback-demo", "--g", "1.5", "--K", "128", "--T", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["boundary_traces.csv", "control.csv", "sup_trace.csv", "report.json", "snapshot_t0.000000.csv", "snapshot_t3.000000.csv"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let rep = report(&out);
    assert!(rep["sup_after_settle"].as_f64().unwrap() < 1e-10, "{rep}");
}

#[test]
fn every_scenario_file_runs() {
    let mut paths: Vec<_> = fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    assert!(!paths.is_empty());
    for p in paths {
        let dir = scratch(p.file_stem().unwrap().to_str().unwrap());
        let out = run(&["run", p.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
    }
}
