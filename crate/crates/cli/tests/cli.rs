use std::path::Path;
use std::process::Command;

fn lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mourre-lab"))
        .args(args)
        .env("MOURRE_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn passing_run_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "experiment = mourre-gap\n");
    let out = dir.path().join("out");
    let o = lab(&[&cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(o.stdout.is_empty());
    for f in ["report.json", "table.csv", "summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
    assert_eq!(json["experiment"], "mourre-gap");
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // On this short box the (1+r)^-1.5 tail has not yet decayed.
    let cfg = write_cfg(dir.path(), "experiment = decay-threshold\nprofiles = power:1.5; const\nr_max = 21\n");
    let out = dir.path().join("out");
    let o = lab(&[&cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("FAIL"));
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_cfg(dir.path(), "experiment = virial\nfoo = 1\n");
    let o = lab(&[&bad_key]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(lab(&["/nonexistent/run.cfg"]).status.code(), Some(1));
    assert_eq!(lab(&[]).status.code(), Some(1));

    // A module error is captured in the report and still exits 1.
    let cfg = write_cfg(dir.path(), "experiment = final-gap\nr_max = 401\n");
    let out = dir.path().join("out");
    let o = lab(&[&cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(json["error"].as_str().unwrap().contains("resolution floor"));
}

#[test]
fn bad_thread_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "experiment = mourre-gap\n");
    let o = Command::new(env!("CARGO_BIN_EXE_mourre-lab"))
        .arg(&cfg)
        .env("MOURRE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MOURRE_LAB_THREADS"));
}
