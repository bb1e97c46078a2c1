use std::fs;
use std::process::Command;

fn grasplab(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_grasplab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env("GRASPLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

#[test]
fn config_and_io_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = grasplab(&["collect", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_attempts": 10, "colour": "red"}"#).unwrap();
    let out = grasplab(&["collect", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let zero = dir.path().join("zero.json");
    fs::write(&zero, r#"{"n_attempts": 0}"#).unwrap();
    assert_eq!(grasplab(&["collect", "--config", zero.to_str().unwrap()], dir.path()).status.code(), Some(2));

    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"not a model").unwrap();
    assert_eq!(grasplab(&["eval", "--model", junk.to_str().unwrap()], dir.path()).status.code(), Some(2));
    let absent = dir.path().join("absent.bin");
    assert_eq!(grasplab(&["eval", "--model", absent.to_str().unwrap()], dir.path()).status.code(), Some(3));
    assert_eq!(grasplab(&["baseline", "--test", "t9"], dir.path()).status.code(), Some(2));
}

#[test]
fn collect_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n_attempts": 120, "objects": ["SoftToys25"]}"#).unwrap();
    let out = grasplab(&["--seed", "4", "collect", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dataset = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .expect("dataset directory");

    let model = dir.path().join("model.bin");
    let out = grasplab(
        &["train", "--dataset", dataset.to_str().unwrap(), "--out", model.to_str().unwrap(), "--epochs", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists() && dir.path().join("loss.csv").exists());

    let out = grasplab(&["eval", "--model", model.to_str().unwrap(), "--test", "t4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("eval-t4");
    for f in ["report.json", "summary.csv", "config.json"] {
        assert!(report.join(f).exists(), "{f} missing");
    }
    let out = grasplab(&["clutter", "--model", model.to_str().unwrap(), "--trials", "1", "--budget", "10"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
