use std::path::Path;
use std::process::{Command, Output};

use paracalc::pcf::{self, Stored};
use paracalc::synthetic::lacunary_jittered;
use paracalc::torus_fields::SpaceGrid;

fn paracalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paracalc")).args(args).env_remove("PARACALC_SEED").output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_recovers_synthetic_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.pcf");
    let grid = SpaceGrid::new(1, 1 << 14).unwrap();
    pcf::write(&input, &Stored::Space(lacunary_jittered(grid, 0.7, 3))).unwrap();
    let out = dir.path().join("est.csv");
    let run = paracalc(&["estimate", "--in", s(&input), "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let first = text.lines().next().unwrap();
    let slope: f64 = first.split_whitespace().find_map(|t| t.strip_prefix("exponent=")).unwrap().parse().unwrap();
    assert!((slope - 0.7).abs() < 0.05, "slope {slope}");

    let report = dir.path().join("blocks.csv");
    let run = paracalc(&["decompose", "--in", s(&input), "--report", s(&report)]);
    assert!(run.status.success());
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().next(), Some("j,block_sup,block_l2"));
    assert_eq!(csv.lines().nth(1).unwrap().split(',').next(), Some("-1"));
}

#[test]
fn bad_window_and_missing_file_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.pcf");
    assert_eq!(paracalc(&["estimate", "--in", s(&missing)]).status.code(), Some(4));
    let input = dir.path().join("f.pcf");
    pcf::write(&input, &Stored::Space(lacunary_jittered(SpaceGrid::new(1, 256).unwrap(), 0.5, 1))).unwrap();
    assert_eq!(paracalc(&["estimate", "--in", s(&input), "--alpha-window", "3-5"]).status.code(), Some(2));
}

#[test]
fn alphabet_skeleton_and_alpha_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let run = paracalc(&["alphabet", "--alpha", "0.45", "--order", "3", "--chain-cap", "0", "--out", s(&out)]);
    assert!(run.status.success());
    let a = paracalc::word_algebra::Alphabet::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(a.params.chain_cap, 0);
    assert!(!a.excluded.is_empty());

    let bad = paracalc(&["alphabet", "--alpha", "0.6", "--chain-cap", "0", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("0.6") && msg.contains("(2/5, 1/2)"), "{msg}");
}

#[test]
fn refs_and_assumption_fit() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = dir.path().join("a.json");
    assert!(paracalc(&["alphabet", "--alpha", "0.45", "--chain-cap", "2", "--out", s(&alpha)]).status.success());
    let store = dir.path().join("refs");
    let run = paracalc(&[
        "build-refs", "--alphabet", s(&alpha), "--seed", "4", "--n", "32", "--steps", "16", "--out", s(&store),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(store.join("manifest.json").exists() && store.join("noise.pcf").exists());
    let fit = dir.path().join("fit.json");
    let run = paracalc(&["verify-assumption-a", "--refs", s(&store), "--out", s(&fit)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert!(v["r2"].is_number() && v["k_fit"].is_number());
}

#[test]
fn solve_writes_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 32, "steps": 20, "order": 3, "chain_cap": 0, "noise": {"seed": 2, "mol": 0.25, "amplitude": 1.0, "time_dependent": false}}"#).unwrap();
    let mut manifests = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let run = paracalc(&["--threads", "2", "solve-qpam", "--config", s(&cfg), "--out", s(&out), "--with-reference"]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        assert!(out.join("metadata.json").exists());
        manifests.push((std::fs::read(out.join("manifest.json")).unwrap(), std::fs::read(out.join("solution.pcf")).unwrap()));
    }
    assert_eq!(manifests[0], manifests[1]);

    let a = dir.path().join("out0/solution.pcf");
    let b = dir.path().join("out0/reference.pcf");
    let run = paracalc(&["compare", "--a", s(&a), "--b", s(&b)]);
    assert!(run.status.success());
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(v["max_sup"].as_f64().unwrap() < 1e-3);
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": "many"}"#).unwrap();
    let run = paracalc(&["solve-qpam", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(run.status.code(), Some(2));
    std::fs::write(&cfg, r#"{"alpha": 0.6}"#).unwrap();
    assert_eq!(paracalc(&["solve-qpam", "--config", s(&cfg), "--out", s(dir.path())]).status.code(), Some(2));
}
