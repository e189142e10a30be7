use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn superres(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superres"))
        .args(args)
        .current_dir(dir)
        .env_remove("SUPERRES_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(bytes: &[u8]) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(bytes).records().map(|r| r.unwrap()).collect()
}

#[test]
fn balanced_identical_sources_reach_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["precision", "--psf", "gaussian", "--sigma", "1", "--d", "0.5", "--eps", "0", "--model", "unknown-identical"],
        dir.path(),
    );
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert!((v["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["curse"], false);
}

#[test]
fn direct_imaging_ratio_falls_quadratically() {
    let dir = tempfile::tempdir().unwrap();
    let ratio = |d: &str| {
        let out = superres(&["precision", "--sigma", "1", "--d", d, "--model", "direct"], dir.path());
        json(&out)["ratio"].as_f64().unwrap()
    };
    let q = ratio("0.01") / ratio("0.005");
    assert!((q - 4.0).abs() < 0.01, "ratio {q}");
}

#[test]
fn separations_default_to_mean_width_units() {
    let dir = tempfile::tempdir().unwrap();
    let d_of = |extra: &[&str]| {
        let args = [&["precision", "--sigma", "2", "--d", "0.5", "--model", "known-N"][..], extra].concat();
        json(&superres(&args, dir.path()))["scene"]["d"].as_f64().unwrap()
    };
    assert_eq!(d_of(&[]), 1.0);
    assert_eq!(d_of(&["--units", "length"]), 0.5);
}

#[test]
fn unequal_widths_need_the_general_model() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["precision", "--sigma", "1", "--psf2", "gaussian", "--sigma2", "1.2", "--d", "0.3", "--eps", "0.2"];
    let general = superres(&[&base[..], &["--model", "unknown-general"]].concat(), dir.path());
    let r = json(&general)["ratio"].as_f64().unwrap();
    assert!(r > 0.0 && r <= 1.0);
    let wrong = superres(&[&base[..], &["--model", "known-N"]].concat(), dir.path());
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn missing_flag_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(&["precision", "--sigma", "1", "--d", "0.5", "--output", "p.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("p.json").exists());

    let out = superres(
        &["precision", "--psf", "grid", "--d", "0.5", "--model", "direct", "--output", "p.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn no_command_prints_help_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(superres(&[], dir.path()).status.code(), Some(2));
    assert_eq!(superres(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn samewidth_scan_is_one_when_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(&["scan", "--figure", "fig2", "--output", "fig2.csv"], dir.path());
    assert!(out.status.success());
    let bytes = std::fs::read(dir.path().join("fig2.csv")).unwrap();
    let rows = csv_rows(&bytes);
    assert_eq!(rows.len(), 3 * 199);
    for r in rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0) {
        assert!((r[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_separation_scan_peaks_at_eps_equal_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(&["scan", "--figure", "fig3a", "--values", "0.3"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&out.stdout);
    let best = rows
        .iter()
        .max_by(|a, b| a[2].parse::<f64>().unwrap().total_cmp(&b[2].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!(&best[0], "0.3");
    assert!((best[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn reversed_scan_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(&["scan", "--figure", "fig2", "--min", "0.5", "--max", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gaussian_regime_cell_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["regime", "--table", "gaussian", "--t", "3", "--s", "1", "--y", "1", "--verify"],
        dir.path(),
    );
    let v = json(&out);
    assert!((v["predicted_ratio"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-12);
    assert!((v["verified_limit"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-3);
    assert_eq!(v["agreement"], true);
}

#[test]
fn general_regime_formula_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["regime", "--table", "general", "--h", "0", "--s", "0", "--c", "0.3", "--y", "0.2"],
        dir.path(),
    );
    let r = json(&out)["predicted_ratio"].as_f64().unwrap();
    assert!((r - 0.824_150_943_396_226_4).abs() < 1e-12);
}

#[test]
fn invalid_exponents_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["regime", "--table", "general", "--h", "4", "--e", "1", "--f", "4", "--s", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("e < h/2"));
}

#[test]
fn oracle_check_passes_custom_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["oracle-check", "--sigma1", "1", "--sigma2", "1.3", "--d", "0.7", "--eps", "-0.4"],
        dir.path(),
    );
    let v = json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["scenes"][0]["comparison"]["max_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec![
            "simulate", "--sigma", "1", "--d", "1", "--eps", "0.2", "--fit", "xbar-d", "--photons", "500",
            "--trials", "6", "--seed", "11", "--output", name,
        ]
    };
    let a = superres(&args("a.csv"), dir.path());
    let b = superres(&args("b.csv"), dir.path());
    assert!(a.status.success() && b.status.success());
    let ra = std::fs::read(dir.path().join("a.csv")).unwrap();
    let rb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(csv_rows(&ra).len(), 6);
    let summary = json(&a);
    assert_eq!(summary["trials"], 6);
    assert!(summary["crb_d"].as_f64().unwrap() > 0.0);
}

#[test]
fn oversized_simulation_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = superres(
        &["simulate", "--sigma", "1", "--d", "1", "--fit", "d", "--photons", "100000000", "--trials", "11", "--output", "x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn config_file_runs_a_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "precision", "psf": "gaussian", "sigma": 1.0, "d": 0.5, "model": "unknown-identical"}"#,
    )
    .unwrap();
    let v = json(&superres(&["--config", cfg.to_str().unwrap()], dir.path()));
    assert!((v["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    std::fs::write(&cfg, r#"{"command": "precision", "d": 0.5}"#).unwrap();
    assert_eq!(superres(&["--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn output_directory_variable_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_superres"))
        .args(["scan", "--figure", "fig3a", "--values", "0.1", "--output", "s.csv"])
        .env("SUPERRES_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("s.csv").exists());
}
