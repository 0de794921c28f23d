use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mmbody(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmbody")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("stderr is not json: {line}"));
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn help_lists_flags_for_every_subcommand() {
    let cases: [(&str, &[&str]); 9] = [
        ("synth-bodies", &["--count", "--seed", "--spacing-mm", "--ranges", "--out"]),
        ("extract-surface", &["--volume", "--iso", "--out"]),
        ("tissue-volumes", &["--volume", "--out"]),
        ("measure", &["--mesh", "--keypoints", "--out"]),
        ("simulate-scan", &["--mesh", "--cloud", "--config", "--seed", "--out"]),
        ("extract-real", &["--intensity", "--min-intensity", "--out"]),
        ("train", &["--data", "--config", "--out"]),
        ("eval", &["--checkpoint", "--data", "--split", "--out"]),
        ("pipeline", &["--count", "--seed", "--out"]),
    ];
    for (cmd, flags) in cases {
        let out = mmbody(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout);
        for f in flags {
            assert!(text.contains(f), "{cmd} help misses {f}");
        }
    }
    let top = mmbody(&["--help"]);
    assert!(String::from_utf8_lossy(&top.stdout).contains("simulate-scan"));
}

#[test]
fn usage_errors_exit_two_with_json() {
    let out = mmbody(&["synth-bodies", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
    let out = mmbody(&["simulate-scan", "--mesh", "a.obj", "--cloud", "b.ply", "--out", "c.ply"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mmbody(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_before_train_reports_missing_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    let out = mmbody(&[
        "eval",
        "--checkpoint",
        path(&d.path().join("ckpt")),
        "--data",
        path(d.path()),
        "--out",
        path(&d.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "checkpoint_not_found");
    assert!(!d.path().join("r.json").exists());
}

#[test]
fn malformed_inputs_fail_cleanly() {
    let d = tempfile::tempdir().unwrap();
    let obj = d.path().join("bad.obj");
    std::fs::write(&obj, "v 0 0\nf 1 2 3\n").unwrap();
    let out = mmbody(&["measure", "--mesh", path(&obj), "--out", path(&d.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "format");

    let vol = d.path().join("v.lvol.json");
    std::fs::write(&vol, "{\"dims\": [2, 2]}").unwrap();
    let out = mmbody(&["tissue-volumes", "--volume", path(&vol), "--out", path(&d.path().join("t.json"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = mmbody(&["train", "--data", path(&d.path().join("nothing")), "--out", path(&d.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "io");

    let cfg = d.path().join("train.json");
    std::fs::write(&cfg, "{\"epochs\": 3, \"learning_rate\": 1}").unwrap();
    let out = mmbody(&["train", "--data", path(d.path()), "--config", path(&cfg), "--out", path(&d.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "json");
}

#[test]
fn stage_commands_chain() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data");
    let out = mmbody(&["synth-bodies", "--count", "3", "--seed", "5", "--spacing-mm", "6", "--out", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["bodies"], 3);

    let vol = data.join("volumes").join("body_0001.lvol.json");
    let mesh = d.path().join("s.obj");
    let out = mmbody(&["extract-surface", "--volume", path(&vol), "--out", path(&mesh)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let tv = d.path().join("t.json");
    assert!(mmbody(&["tissue-volumes", "--volume", path(&vol), "--out", path(&tv)]).status.success());
    let t: Value = serde_json::from_slice(&std::fs::read(&tv).unwrap()).unwrap();
    assert!(t["SAT"].as_f64().unwrap() > 0.0);

    let m = d.path().join("m.json");
    let out = mmbody(&["measure", "--mesh", path(&mesh), "--out", path(&m)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(&m).unwrap()).unwrap();
    assert!(m["height_cm"].as_f64().unwrap() > 100.0);

    let ply = d.path().join("s.ply");
    let out = mmbody(&["simulate-scan", "--mesh", path(&mesh), "--surface-samples", "20000", "--seed", "2", "--out", path(&ply)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(&ply).unwrap();
    assert!(mmbody(&["--jobs", "1", "simulate-scan", "--mesh", path(&mesh), "--surface-samples", "20000", "--seed", "2", "--out", path(&ply)])
        .status
        .success());
    assert_eq!(std::fs::read(&ply).unwrap(), first);
}
