//! End-to-end checks of the command-line pipeline.

use std::path::Path;
use std::process::Command;

fn modnet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modnet"))
}

fn run_ok(args: &[&str]) {
    let out = modnet().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "modnet {args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest_digests(dir: &Path) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest");
    let v: serde_json::Value = serde_json::from_str(&text).expect("json");
    v["outputs"]
        .as_array()
        .expect("outputs")
        .iter()
        .map(|o| {
            (
                Path::new(o["path"].as_str().unwrap())
                    .file_name()
                    .unwrap()
                    .to_string_lossy()
                    .into_owned(),
                o["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn full_pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = |name: &str| dir.join(name).to_string_lossy().into_owned();

    run_ok(&["gen", "--family", "separable", "--out-dir", &out("gen"), "--seed", "0"]);
    assert!(dir.join("gen/graph.json").exists());
    assert!(dir.join("gen/truth_table.csv").exists());

    run_ok(&[
        "train",
        "--graph",
        &out("gen/graph.json"),
        "--width",
        "8",
        "--depth",
        "1",
        "--out-dir",
        &out("train"),
        "--seed",
        "0",
    ]);
    assert!(dir.join("train/checkpoint.json").exists());

    // checkpoint round trip is bit-identical
    let text = std::fs::read_to_string(dir.join("train/checkpoint.json")).unwrap();
    let ck: serde_json::Value = serde_json::from_str(&text).unwrap();
    let re = serde_json::from_str::<modnet::io::Checkpoint>(&text).unwrap();
    let back = serde_json::to_value(&re).unwrap();
    assert_eq!(ck, back);

    run_ok(&[
        "prune",
        "--checkpoint",
        &out("train/checkpoint.json"),
        "--out-dir",
        &out("prune"),
        "--seed",
        "0",
    ]);
    assert!(dir.join("prune/sparse.json").exists());

    run_ok(&[
        "detect",
        "--checkpoint",
        &out("prune/sparse.json"),
        "--out-dir",
        &out("detect"),
        "--seed",
        "0",
    ]);
    let dot = std::fs::read_to_string(dir.join("detect/hierarchy.dot")).unwrap();
    assert!(dot.starts_with("digraph"));

    run_ok(&[
        "analyze",
        "--checkpoint",
        &out("prune/sparse.json"),
        "--out-dir",
        &out("analyze"),
        "--seed",
        "0",
    ]);
    for f in ["pi.csv", "coverage.csv", "welch.json", "manifest.json"] {
        assert!(dir.join("analyze").join(f).exists(), "missing {f}");
    }

    run_ok(&[
        "viz",
        "--hierarchy",
        &out("detect/hierarchy.json"),
        "--out-dir",
        &out("viz"),
        "--seed",
        "0",
    ]);
    assert!(dir.join("viz/hierarchy.dot").exists());
}

#[test]
fn separable_viz_has_two_components() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = |name: &str| dir.join(name).to_string_lossy().into_owned();
    run_ok(&["gen", "--family", "separable", "--out-dir", &out("gen"), "--seed", "0"]);
    run_ok(&[
        "train",
        "--graph",
        &out("gen/graph.json"),
        "--width",
        "12",
        "--depth",
        "1",
        "--out-dir",
        &out("train"),
        "--seed",
        "1",
    ]);
    run_ok(&[
        "prune",
        "--checkpoint",
        &out("train/checkpoint.json"),
        "--grid",
        "--out-dir",
        &out("prune"),
        "--seed",
        "1",
    ]);
    run_ok(&[
        "detect",
        "--checkpoint",
        &out("prune/sparse.json"),
        "--out-dir",
        &out("detect"),
        "--seed",
        "1",
    ]);
    let h: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("detect/hierarchy.json")).unwrap())
            .unwrap();
    // two modules covering disjoint input/output halves, no uses-edges
    assert_eq!(h["modules"].as_array().unwrap().len(), 2, "{h}");
    assert_eq!(h["uses"].as_array().unwrap().len(), 0, "{h}");
}

#[test]
fn identical_commands_produce_identical_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = |name: &str| dir.join(name).to_string_lossy().into_owned();
    for run in ["a", "b"] {
        run_ok(&["gen", "--family", "reused", "--out-dir", &out(run), "--seed", "7"]);
    }
    let da = manifest_digests(&dir.join("a"));
    let db = manifest_digests(&dir.join("b"));
    assert!(!da.is_empty());
    assert_eq!(da, db);
}

#[test]
fn seed_env_var_is_overridden_by_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = |name: &str| dir.join(name).to_string_lossy().into_owned();
    // NS_SEED alone
    let s = modnet()
        .args(["gen", "--family", "dense", "--out-dir", &out("env")])
        .env("NS_SEED", "3")
        .output()
        .unwrap();
    assert!(s.status.success());
    // explicit --seed with a conflicting env var
    let s = modnet()
        .args(["gen", "--family", "dense", "--out-dir", &out("flag"), "--seed", "3"])
        .env("NS_SEED", "99")
        .output()
        .unwrap();
    assert!(s.status.success());
    let ga = std::fs::read(dir.join("env/graph.json")).unwrap();
    let gb = std::fs::read(dir.join("flag/graph.json")).unwrap();
    assert_eq!(ga, gb);
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    let out = modnet().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let out = modnet()
        .args([
            "gen",
            "--family",
            "nonsense",
            "--out-dir",
            &tmp.path().to_string_lossy(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = modnet()
        .args([
            "detect",
            "--checkpoint",
            "/nonexistent/ck.json",
            "--out-dir",
            &tmp.path().to_string_lossy(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
