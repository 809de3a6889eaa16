//! End-to-end CLI behavior: exit codes, artifact determinism, config
//! validation, and the preset listing.

use std::path::Path;
use std::process::Command;

fn hjlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjlab"))
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("missing {file}: {e}"))
}

#[test]
fn presets_listing_is_stable() {
    let a = hjlab().arg("presets").output().unwrap();
    let b = hjlab().arg("presets").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().count() >= 12);
    assert!(text.contains("example-4.1"));
    assert!(text.contains("dpp-prop7.2"));
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = std::env::temp_dir().join(format!("hjlab-bad-{}", std::process::id()));
    let cfg = dir.join("bad.json");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(&cfg, r#"{"cell": {"hamiltonians": [], "unknown_key": 1}}"#).unwrap();
    let out_dir = dir.join("out");
    let out = hjlab()
        .args(["cell", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let out = hjlab().args(["table", "--preset", "nonconvex-H0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rerunning_a_preset_yields_byte_identical_numeric_artifacts() {
    let base = std::env::temp_dir().join(format!("hjlab-det-{}", std::process::id()));
    let run = |sub: &str| {
        let out = hjlab()
            .args(["dpp", "--preset", "dpp-prop7.2", "--out"])
            .arg(base.join(sub))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("a");
    run("b");
    for file in ["mc.csv", "dpp.json", "jump_law.json", "verdicts.json"] {
        assert_eq!(
            read(&base.join("a"), file),
            read(&base.join("b"), file),
            "{file} differs between reruns"
        );
    }
    // the manifest lists every artifact with a digest
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&base.join("a"), "manifest.json")).unwrap();
    let listed: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap())
        .collect();
    for file in ["mc.csv", "dpp.json", "jump_law.json", "verdicts.json"] {
        assert!(listed.contains(&file), "{file} missing from manifest");
    }
    for a in manifest["artifacts"].as_array().unwrap() {
        assert_eq!(a["digest"].as_str().unwrap().len(), 16);
    }
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn seed_override_changes_estimates() {
    let base = std::env::temp_dir().join(format!("hjlab-seed-{}", std::process::id()));
    for (sub, seed) in [("s1", "1"), ("s2", "2")] {
        let out = hjlab()
            .args(["dpp", "--preset", "dpp-prop7.2", "--seed", seed, "--out"])
            .arg(base.join(sub))
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_ne!(read(&base.join("s1"), "mc.csv"), read(&base.join("s2"), "mc.csv"));
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn config_file_round_trips_through_the_cli() {
    let dir = std::env::temp_dir().join(format!("hjlab-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let preset = hjlab_cli::presets::find("nonconvex-H0").unwrap();
    let path = dir.join("cell.json");
    std::fs::write(&path, hjlab_cli::config::to_json(&preset.config)).unwrap();
    let out_dir = dir.join("out");
    let out = hjlab()
        .args(["cell", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("points.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn nonconvergence_exits_3_and_keeps_partial_artifacts() {
    let dir = std::env::temp_dir().join(format!("hjlab-nc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    // an iteration cap far too small for a genuinely oscillatory solve
    let preset = hjlab_cli::presets::find("remark-4.13").unwrap();
    let mut cfg = preset.config;
    if let hjlab_cli::config::ExperimentConfig::Cell(c) = &mut cfg {
        c.max_iters = 3;
        c.expected.clear();
        c.expected_lower.clear();
        c.min_gap_above_lower = None;
    }
    let path = dir.join("stall.json");
    std::fs::write(&path, hjlab_cli::config::to_json(&cfg)).unwrap();
    let out_dir = dir.join("out");
    let out = hjlab()
        .args(["cell", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // the partial table is still on disk, with the failed row flagged
    let table = std::fs::read_to_string(out_dir.join("points.csv")).unwrap();
    assert!(table.lines().last().unwrap().ends_with(",0"));
    assert!(out_dir.join("manifest.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn table_kind_runs_with_elementary_checks() {
    use hjlab_cli::config::*;
    use hjlab::Hamiltonian;
    let cfg = ExperimentConfig::Table(TableExperiment {
        hamiltonians: vec![Hamiltonian::quadratic(), Hamiltonian::quadratic()],
        coupling: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        grid_dim: 1,
        grid_n: 64,
        delta_seq: vec![0.08, 0.04],
        tol: 1e-6,
        r_grad: 3.0,
        h_factor: 1.0,
        max_iters: 2_000_000,
        h_over_delta: None,
        p_axes: vec![(-4..=4).map(|k| k as f64 * 0.5).collect()],
        expected: vec![
            ExpectedValue { p: vec![1.0], value: 1.0, tol: 0.02 },
            ExpectedValue { p: vec![-2.0], value: 4.0, tol: 0.02 },
        ],
        elementary: Some(ElementaryChecksCfg { scale_tol: 0.05, with_max_comparison: true }),
    });
    let outcome = hjlab_cli::runner::run(&cfg).unwrap();
    assert!(outcome.all_passed(), "{:?}", outcome.verdicts);
    assert!(outcome.artifacts.iter().any(|(f, _)| f == "table.csv"));
    assert!(outcome.artifacts.iter().any(|(f, _)| f == "elementary.json"));
}

#[test]
fn mc_kind_checks_the_closed_form() {
    use hjlab_cli::config::*;
    use hjlab::{Hamiltonian, ScalarField};
    let cfg = ExperimentConfig::Mc(McExperiment {
        hamiltonians: vec![
            Hamiltonian::Constant { value: 0.0 },
            Hamiltonian::Constant { value: 0.0 },
        ],
        rates: vec![1.0, 1.0],
        epsilon: 0.25,
        paths: 20_000,
        seed: 99,
        t: 0.3,
        x: vec![0.4],
        start_state: 1,
        terminal: vec![
            ScalarField::TrigPoly { axis: 0, mean: 0.0, cos: vec![0.5], sin: vec![] },
            ScalarField::Const { value: -0.2 },
        ],
        policy: McPolicyCfg::Stay,
        closed_form_sigmas: Some(3.0),
    });
    let outcome = hjlab_cli::runner::run(&cfg).unwrap();
    assert!(outcome.all_passed(), "{:?}", outcome.verdicts);
    assert!(outcome.artifacts.iter().any(|(f, _)| f == "mc.csv"));
}
