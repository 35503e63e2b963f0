//! End-to-end tests of the `retrofit` binary against the fixture files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_retrofit")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_reference_plant() {
    let out = run(&["analyze", fixture("stable4.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("relative degrees"));
    assert!(text.contains("ordering assumptions satisfied"));
}

#[test]
fn analyze_json_mode_is_machine_readable() {
    let out = run(&["analyze", fixture("stable4.json").to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["reordered_degrees"], serde_json::json!([1, 2]));
    assert_eq!(value["assumptions_satisfied"], serde_json::json!(true));
}

#[test]
fn analyze_rejects_square_interconnection() {
    let out = run(&["analyze", fixture("cex2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("m < p"));
}

#[test]
fn analyze_rejects_malformed_json() {
    let path = scratch("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synthesize_verify_simulate_pipeline() {
    for (model, ctrl_name, csv_name) in [
        ("stable4.json", "stable4_ctrl.json", "stable4_traj.csv"),
        ("unstable4.json", "unstable4_ctrl.json", "unstable4_traj.csv"),
    ] {
        let model_path = fixture(model);
        let ctrl_path = scratch(ctrl_name);
        let out = run(&[
            "synthesize",
            model_path.to_str().unwrap(),
            "--out",
            ctrl_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", stdout(&out));
        assert!(ctrl_path.exists());

        // determinism: a second run produces byte-identical output
        let bytes1 = std::fs::read(&ctrl_path).unwrap();
        let out2 = run(&[
            "synthesize",
            model_path.to_str().unwrap(),
            "--out",
            ctrl_path.to_str().unwrap(),
        ]);
        assert_eq!(out2.status.code(), Some(0));
        let bytes2 = std::fs::read(&ctrl_path).unwrap();
        assert_eq!(bytes1, bytes2, "{model}: synthesis must be deterministic");

        let out = run(&[
            "verify",
            model_path.to_str().unwrap(),
            ctrl_path.to_str().unwrap(),
            "--trials",
            "40",
            "--seed",
            "7",
        ]);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", stdout(&out));
        assert!(stdout(&out).contains("verdict: PASS"));

        let csv_path = scratch(csv_name);
        let out = run(&[
            "simulate",
            model_path.to_str().unwrap(),
            ctrl_path.to_str().unwrap(),
            "--env-seed",
            "3",
            "--env-order",
            "2",
            "--dt",
            "0.002",
            "--t-final",
            "4.0",
            "--out",
            csv_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{model}: {}", stdout(&out));
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("t,x_plant_0"));
        assert_eq!(csv.lines().count(), 2002);

        // deterministic CSV bytes under fixed seeds
        let csv_path2 = scratch(&format!("again_{csv_name}"));
        let out = run(&[
            "simulate",
            model_path.to_str().unwrap(),
            ctrl_path.to_str().unwrap(),
            "--env-seed",
            "3",
            "--env-order",
            "2",
            "--dt",
            "0.002",
            "--t-final",
            "4.0",
            "--out",
            csv_path2.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(
            std::fs::read(&csv_path).unwrap(),
            std::fs::read(&csv_path2).unwrap()
        );
    }
}

#[test]
fn synthesize_rejects_unstabilizable_design_model() {
    // moving the actuator so it cannot reach the unstable residual
    // dynamics makes the reduced design model unstabilizable; synthesis
    // must refuse with the precondition diagnostic
    let base: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("unstable4.json")).unwrap()).unwrap();
    let mut broken = base;
    broken["B"] = serde_json::json!([[0.0], [0.0], [1.0], [0.0]]);
    let path = scratch("unstabilizable.json");
    std::fs::write(&path, serde_json::to_string_pretty(&broken).unwrap()).unwrap();
    let out_ctrl = scratch("unstabilizable_ctrl.json");
    let out = run(&[
        "synthesize",
        path.to_str().unwrap(),
        "--out",
        out_ctrl.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not stabilizable"), "stderr: {err}");
}

#[test]
fn verify_flags_naive_controller() {
    let out = run(&[
        "verify",
        fixture("cex2.json").to_str().unwrap(),
        fixture("cex2_naive_controller.json").to_str().unwrap(),
        "--trials",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: FAIL"));
    assert!(text.contains("destabilizing static environment"));
}

#[test]
fn verify_accepts_zero_controller() {
    // the zero controller is trivially admissible on the stable plant
    let path = scratch("zero_ctrl.json");
    std::fs::write(
        &path,
        r#"{
  "A": [],
  "B": [],
  "C": [[]],
  "D": [[0.0, 0.0]],
  "metadata": {
    "relative_degrees": [],
    "capped": [],
    "p_indices": [],
    "pbar_indices": [],
    "reorder": [],
    "tolerance": 1e-8,
    "margin": 0.1,
    "verdict": {
      "kg_yv_residual": 0.0,
      "qhat_abscissa": 0.0,
      "qhat_ghat_yv_abscissa": 0.0,
      "pass": true
    }
  }
}
"#,
    )
    .unwrap();
    let out = run(&[
        "verify",
        fixture("stable4.json").to_str().unwrap(),
        path.to_str().unwrap(),
        "--trials",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn verify_round_trip_verdict_matches_synthesis_report() {
    // synthesize writes residuals; verify recomputes them from the files
    let model_path = fixture("stable4.json");
    let ctrl_path = scratch("roundtrip_ctrl.json");
    let out = run(&[
        "synthesize",
        model_path.to_str().unwrap(),
        "--out",
        ctrl_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let synth: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();

    let out = run(&[
        "verify",
        model_path.to_str().unwrap(),
        ctrl_path.to_str().unwrap(),
        "--trials",
        "10",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let verify: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(verify["pass"], serde_json::json!(true));
    // the re-verified annihilation residual is of the same magnitude as
    // the one recorded at synthesis time
    let recorded = synth["kg_yv_residual"].as_f64().unwrap();
    let recomputed = verify["rectifying_residual"].as_f64().unwrap();
    assert!(recomputed < 1e-7 && recorded < 1e-7);
}

#[test]
fn fixture_files_match_reference_constructors() {
    use retrofit_control::model::{to_canonical_json, PlantFile};
    for (name, plant) in [
        ("stable4.json", retrofit_control::fixtures::stable4()),
        ("unstable4.json", retrofit_control::fixtures::unstable4()),
        ("cex2.json", retrofit_control::fixtures::cex2()),
    ] {
        let on_disk = std::fs::read_to_string(fixture(name)).unwrap();
        let expected = to_canonical_json(&PlantFile::from_plant(&plant)).unwrap();
        assert_eq!(on_disk, expected, "{name} drifted from its constructor");
    }
}

#[test]
fn tolerance_env_var_is_honored() {
    // an absurd tolerance swallows every Markov parameter, so the analysis
    // sees no output affected by the interconnection and reports an
    // assumption violation
    let model_path = fixture("stable4.json");
    let out = Command::new(bin())
        .args(["analyze", model_path.to_str().unwrap()])
        .env("RETROFIT_TOL", "1e9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    // an explicit flag overrides the environment again
    let out = Command::new(bin())
        .args(["analyze", model_path.to_str().unwrap(), "--tol", "1e-9"])
        .env("RETROFIT_TOL", "1e9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}
