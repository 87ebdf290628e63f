use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hsi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsi-mvt"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = hsi(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

/// Exit status and the parsed one-line error.
fn fails(dir: &Path, args: &[&str]) -> Value {
    let out = hsi(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).unwrap_or_else(|_| panic!("not json: {last}"))
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &[&str] = &["synth", "--height", "24", "--width", "24", "--bands", "40", "--seed", "3"];

#[test]
fn synth_is_reproducible_and_loadable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(a.path(), &["synth"]);
    ok(b.path(), &["synth"]);
    for f in ["data/cube.hsz", "data/labels.hsz"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let cube = hsi_mvt::data::load_cube(a.path().join("data/cube.hsz")).unwrap();
    let labels = hsi_mvt::data::load_labels(a.path().join("data/labels.hsz")).unwrap();
    assert_eq!((cube.height, cube.width, cube.bands), (64, 64, 40));
    assert_eq!(labels.classes, 3);
}

#[test]
fn noiseless_synth_has_constant_class_spectra() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--noise", "0", "--out", "scene"]);
    let cube = hsi_mvt::data::load_cube(d.path().join("scene/cube.hsz")).unwrap();
    let labels = hsi_mvt::data::load_labels(d.path().join("scene/labels.hsz")).unwrap();
    let mut first: Vec<Option<Vec<f32>>> = vec![None; 4];
    for i in (0..cube.pixels()).step_by(37) {
        let (h, w) = (i / cube.width, i % cube.width);
        let c = labels.get(h, w) as usize;
        let px = cube.pixel(h, w).to_vec();
        match &first[c] {
            None => first[c] = Some(px),
            Some(s) => assert_eq!(s, &px),
        }
    }
}

#[test]
fn preprocess_shapes_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), SMALL);
    write(d.path(), "mpca.json", r#"{"mpca": {"g": 4, "d": 2}, "output": {"dir": "a"}}"#);
    let v = ok(d.path(), &["preprocess", "--config", "mpca.json"]);
    assert_eq!(v["shape"], serde_json::json!([24, 24, 8]));
    write(d.path(), "again.json", r#"{"mpca": {"g": 4, "d": 2}, "output": {"dir": "b"}}"#);
    ok(d.path(), &["preprocess", "--config", "again.json"]);
    for f in ["representation.hsz", "pca.hsz"] {
        assert_eq!(
            std::fs::read(d.path().join("a").join(f)).unwrap(),
            std::fs::read(d.path().join("b").join(f)).unwrap()
        );
    }
    write(d.path(), "plain.json", r#"{"mpca": {"enabled": false}, "output": {"dir": "p"}}"#);
    let v = ok(d.path(), &["preprocess", "--config", "plain.json"]);
    assert_eq!(v["shape"], serde_json::json!([24, 24, 30]));
}

#[test]
fn golden_path_with_defaults() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth"]);
    ok(d.path(), &["preprocess"]);
    write(d.path(), "short.json", r#"{"train": {"epochs": 20}}"#);
    let t = ok(d.path(), &["train", "--config", "short.json"]);
    assert_eq!(t["epochs"], 20);
    assert!(d.path().join("out/model.hsz").exists());
    let history = std::fs::read_to_string(d.path().join("out/history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 20);
    for line in history.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        assert!(rec["train_loss"].as_f64().unwrap().is_finite());
    }

    let e1 = hsi(d.path(), &["eval", "--config", "short.json"]);
    let e2 = hsi(d.path(), &["eval", "--config", "short.json"]);
    assert!(e1.status.success());
    assert_eq!(e1.stdout, e2.stdout);
    let report: Value = serde_json::from_slice(&e1.stdout).unwrap();
    assert!(report["oa"].as_f64().unwrap() > 0.9);

    let audit = ok(d.path(), &["audit", "--config", "short.json"]);
    let delta = audit["delta_oa"].as_f64().unwrap();
    assert!(delta.abs() <= 0.02, "delta oa {delta}");
    assert_eq!(audit["original"]["counts"], audit["rotated"]["counts"]);

    let m = ok(d.path(), &["map", "--config", "short.json", "--out", "m1.ppm"]);
    assert_eq!((m["height"].as_u64(), m["width"].as_u64()), (Some(64), Some(64)));
    ok(d.path(), &["map", "--config", "short.json", "--out", "m2.ppm"]);
    let (a, b) = (std::fs::read(d.path().join("m1.ppm")).unwrap(), std::fs::read(d.path().join("m2.ppm")).unwrap());
    assert_eq!(a, b);
    let header = b"P6\n64 64\n255\n";
    assert_eq!(&a[..header.len()], header);
    assert_eq!(a.len(), header.len() + 64 * 64 * 3);
}

#[test]
fn config_errors_are_one_json_line() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.json", r#"{"model": {"dropout": 0.5}}"#);
    let e = fails(d.path(), &["train", "--config", "bad.json"]);
    assert_eq!(e["error"], "config");
    let e = fails(d.path(), &["train"]);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("labels.hsz"));
    ok(d.path(), SMALL);
    ok(d.path(), &["preprocess"]);
    write(d.path(), "heads.json", r#"{"model": {"heads": 7}}"#);
    let e = fails(d.path(), &["train", "--config", "heads.json"]);
    assert_eq!(e["error"], "config");
}

#[test]
fn mismatched_checkpoint_is_compatibility_error() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), SMALL);
    write(
        d.path(),
        "a.json",
        r#"{"mpca": {"g": 4, "d": 2}, "model": {"P": 3, "K1": 2, "K2": 6, "K3": 8, "heads": 2, "j": 8}, "train": {"epochs": 1, "train_fraction": 0.2}}"#,
    );
    ok(d.path(), &["preprocess", "--config", "a.json"]);
    ok(d.path(), &["train", "--config", "a.json"]);
    write(
        d.path(),
        "b.json",
        r#"{"mpca": {"g": 4, "d": 2}, "model": {"P": 5, "K1": 2, "K2": 6, "K3": 8, "heads": 2, "j": 8}}"#,
    );
    let e = fails(d.path(), &["eval", "--config", "b.json"]);
    assert_eq!(e["error"], "compatibility");
    let e = fails(d.path(), &["eval", "--config", "a.json", "--checkpoint", "missing.hsz"]);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("missing.hsz"));
}

#[test]
fn sweep_writes_csv() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), SMALL);
    write(
        d.path(),
        "s.json",
        r#"{"mpca": {"g": 4, "d": 2}, "model": {"P": 3, "K1": 2, "K2": 6, "K3": 8, "heads": 2, "j": 8}, "train": {"epochs": 2, "train_fraction": 0.2}}"#,
    );
    let v = ok(d.path(), &["sweep", "--config", "s.json", "--axis", "patch_size", "--values", "3,5"]);
    assert_eq!(v["rows"], 2);
    let text = std::fs::read_to_string(d.path().join("out/sweep_patch_size.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis,value,oa,aa,test_samples,seconds");
    assert!(lines[1].starts_with("patch_size,3.0,"));
    assert!(lines[2].starts_with("patch_size,5.0,"));
    let e = fails(d.path(), &["sweep", "--config", "s.json", "--axis", "depth", "--values", "1"]);
    assert_eq!(e["error"], "config");
}
