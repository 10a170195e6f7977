use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn silt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silt")).args(args).env_remove("SILT_THREADS").output().expect("spawn silt")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn error_kind(out: &Output) -> (String, String) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    let v: Value = serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"));
    (v["error"]["kind"].as_str().unwrap().to_string(), v["error"]["message"].as_str().unwrap().to_string())
}

/// Fixture directory plus a dictionary learned from its auxiliary set.
fn prepared(dir: &Path, classes: usize) {
    let out = silt(&[
        "bench",
        "fixtures",
        "--out",
        p(dir),
        "--seed",
        "4",
        "--classes",
        &classes.to_string(),
        "--queries",
        "3",
        "--atoms",
        "3",
        "--size",
        "24",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out =
        silt(&["learn", "--manifest", p(&dir.join("auxiliary.json")), "-k", "3", "--out", p(&dir.join("dict.bin"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path, command: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        command.to_string(),
        "--dict".into(),
        p(&dir.join("dict.bin")).into(),
        "--gallery".into(),
        p(&dir.join("gallery.json")).into(),
        "--queries".into(),
        p(&dir.join("queries.json")).into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    silt(&refs)
}

#[test]
fn help_and_version_exit_zero() {
    assert!(silt(&["--help"]).status.success());
    assert!(silt(&["--version"]).status.success());
    assert!(silt(&["bench", "align-sweep", "--help"]).status.success());
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["frobnicate"],
        vec!["learn", "--manifest", "x.json"],
        vec!["bench", "align-sweep", "--trials", "many"],
        vec!["bench", "align-sweep", "--axis", "diagonal"],
        vec!["--threads", "0", "bench", "align-sweep"],
    ] {
        let out = silt(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(error_kind(&out).0, "usage", "{args:?}");
    }
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.bin");
    let out = silt(&["align", "--dict", p(&missing), "--gallery", "g.json", "--queries", "q.json"]);
    assert_eq!(out.status.code(), Some(2));
    let (kind, message) = error_kind(&out);
    assert_eq!(kind, "data");
    assert!(message.starts_with("dictionary not found"), "{message}");

    let out = silt(&["learn", "--manifest", p(&dir.path().join("aux.json")), "-k", "2", "--out", p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn too_many_atoms_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = silt(&[
        "bench",
        "fixtures",
        "--out",
        p(dir.path()),
        "--classes",
        "1",
        "--queries",
        "1",
        "--size",
        "8",
        "-k",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = silt(&[
        "learn",
        "--manifest",
        p(&dir.path().join("auxiliary.json")),
        "-k",
        "65",
        "--out",
        p(&dir.path().join("d.bin")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let (_, message) = error_kind(&out);
    assert!(message.contains("exceeds"), "{message}");
    assert!(!dir.path().join("d.bin").exists());
}

#[test]
fn recognize_end_to_end_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path(), 3);
    let truth: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();

    let out = pipeline(dir.path(), "recognize", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = results.as_array().unwrap();
    assert_eq!(results.len(), 3);
    for (r, t) in results.iter().zip(truth["queries"].as_array().unwrap()) {
        assert_eq!(r["predicted_class"], t["class_id"], "{r}");
    }

    let out = pipeline(dir.path(), "align", &["--transform-kind", "affine"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let aligned: Value = serde_json::from_slice(&out.stdout).unwrap();
    let first = &aligned[0]["outcomes"];
    assert_eq!(first.as_array().unwrap().len(), 3);
    assert_eq!(first[0]["tau"]["kind"], "affine");
}

#[test]
fn single_class_gallery_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    prepared(dir.path(), 1);
    let out = pipeline(dir.path(), "recognize", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(results.as_array().unwrap().iter().all(|r| r["predicted_class"] == 0));
}

#[test]
fn gallery_dictionary_size_mismatch_is_reported() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    prepared(a.path(), 2);
    let out = silt(&[
        "bench",
        "fixtures",
        "--out",
        p(b.path()),
        "--classes",
        "2",
        "--queries",
        "1",
        "--size",
        "16",
        "-k",
        "2",
    ]);
    assert!(out.status.success());
    let out = silt(&[
        "align",
        "--dict",
        p(&a.path().join("dict.bin")),
        "--gallery",
        p(&b.path().join("gallery.json")),
        "--queries",
        p(&b.path().join("queries.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
