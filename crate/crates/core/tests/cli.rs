use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_driftqec"))
}

fn recipe(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(format!("{name}.toml"))
}

#[test]
fn verify_passes() {
    let out = bin().args(["verify", "--trials", "100"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["run", "--config", "/nonexistent.toml", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(3));
    let status = bin().args(["run", "--bogus-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin()
        .args(["run", "--smoke", "--window", "50000", "--config"])
        .arg(recipe("fig7a"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn simulate_estimate_decode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = recipe("fig7a");
    let ok = |c: &mut Command| assert!(c.status().unwrap().success());
    ok(bin().args(["simulate", "--seed", "5", "--config"]).arg(&cfg).arg("--out").arg(d.join("est.det")));
    assert!(d.join("est.det.json").is_file());
    ok(bin()
        .args(["estimate", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(d.join("est.det"))
        .arg("--out")
        .arg(d.join("est")));
    for f in ["series.csv", "dem.json"] {
        assert!(d.join("est").join(f).is_file(), "{f}");
    }
    ok(bin()
        .args(["estimate", "--mode", "sliding", "--window", "1500", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(d.join("est.det"))
        .arg("--out")
        .arg(d.join("sliding")));
    ok(bin()
        .args(["simulate", "--seed", "6", "--cycles", "100", "--shots", "2000", "--start-cycle", "5000", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.join("dec.det")));
    ok(bin()
        .args(["decode", "--range", "5000:100", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(d.join("dec.det"))
        .arg("--dem")
        .arg(d.join("est/dem.json"))
        .arg("--dem")
        .arg(d.join("sliding/dem.json"))
        .arg("--out")
        .arg(d.join("decode.json")));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("decode.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
    assert!(report[1]["delta"].is_number());

    let status = bin()
        .args(["decode", "--range", "5000:99", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(d.join("dec.det"))
        .arg("--dem")
        .arg(d.join("est/dem.json"))
        .arg("--out")
        .arg(d.join("x.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn mismatched_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bin().args(["simulate", "--config"]).arg(recipe("fig7a")).arg("--out").arg(d.join("a.det")).status().unwrap().success());
    let status = bin()
        .args(["estimate", "--config"])
        .arg(recipe("fig7b"))
        .arg("--data")
        .arg(d.join("a.det"))
        .arg("--out")
        .arg(d.join("e"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}
