//! End-to-end checks of the command-line surface against a built binary.

use std::path::Path;
use std::process::Command;

fn levy_sir() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-sir"))
}

fn stdout(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn preset_list_names_every_preset() {
    let text = stdout(levy_sir().arg("preset-list"));
    for name in [
        "fig2_extinction",
        "fig4_persistence",
        "fig6_matched_a02",
        "fig6_matched_a09",
        "deterministic_ode",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn analyze_prints_regime_and_r0_bar() {
    let text = stdout(levy_sir().args(["analyze", "--preset", "fig2_extinction"]));
    assert!(text.contains("regime: Extinction"), "{text}");
    assert!(text.contains("r0_bar: 9.976"), "{text}");
}

#[test]
fn check_reports_all_hypotheses() {
    let text = stdout(levy_sir().args(["check", "--preset", "fig4_persistence", "--p", "2"]));
    assert!(text.contains("all pass: true"), "{text}");
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let text = stdout(levy_sir().args([
        "simulate",
        "--preset",
        "deterministic_ode",
        "--t-end",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("detected_regime"), "{text}");
    for file in [
        "config.txt",
        "threshold_report.txt",
        "path_000.csv",
        "plot_data.csv",
        "path_summary.txt",
    ] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let plot = std::fs::read_to_string(out.join("plot_data.csv")).unwrap();
    assert!(plot.starts_with("t,S,I,R,avgS,avgI,avgR,refS,refI,refR"));
}

#[test]
fn ensemble_writes_summary_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let text = stdout(levy_sir().args([
        "ensemble",
        "--preset",
        "fig6_matched_a02",
        "--t-end",
        "2",
        "--paths",
        "3",
        "--dump-paths",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("extinct_fraction"), "{text}");
    assert!(out.join("ensemble_summary.txt").exists());
    assert!(out.join("plot_moments.csv").exists());
    assert!(out.join("path_000.csv").exists());
    assert!(out.join("path_001.csv").exists());
    assert!(!out.join("path_002.csv").exists());

    // The emitted config can drive a new run directly.
    let text2 = stdout(levy_sir().args([
        "analyze",
        "--config",
        out.join("config.txt").to_str().unwrap(),
    ]));
    assert!(text2.contains("regime: Persistence"), "{text2}");
}

#[test]
fn sample_ts_self_test_reports_z_scores() {
    let text = stdout(levy_sir().args([
        "sample-ts",
        "--preset",
        "fig2_extinction",
        "--trains",
        "2000",
    ]));
    assert!(text.contains("expected kappa2"), "{text}");
    // Parse the variance z-score and require it within a loose band.
    let z_line = text
        .lines()
        .find(|l| l.contains("sample variance"))
        .expect("variance line");
    let z: f64 = z_line.rsplit("z: ").next().unwrap().trim().parse().unwrap();
    assert!(z.abs() < 6.0, "variance z-score suspicious: {z_line}");
}

#[test]
fn invalid_config_lists_all_violations() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.cfg");
    std::fs::write(&file, "model.lambda = -3\nnope = 1\n").unwrap();
    let out = levy_sir()
        .args(["analyze", "--config", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope: unknown key"), "{err}");
    assert!(err.contains("required key missing"), "{err}");
}

#[test]
fn missing_source_is_an_error() {
    let out = levy_sir().arg("analyze").output().unwrap();
    assert!(!out.status.success());
    assert!(Path::new(env!("CARGO_BIN_EXE_levy-sir")).exists());
}
