//! End-to-end checks of the binary: exit codes, deterministic output,
//! config-file handling and the streaming detector.

use std::io::Write;
use std::process::{Command, Stdio};

fn srrs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srrs"))
}

#[test]
fn theory_values_and_exit_zero() {
    let out = srrs()
        .args(["theory", "--v2", "0", "--nu", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("v2(0),1.6449340668482"));
    assert!(text.contains("nu(10),0.01999998"));
    assert!(text.starts_with("# nu=10\n# v2=0\n"));
}

#[test]
fn config_error_exits_two() {
    let out = srrs().args(["theory"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = srrs()
        .args(["arl", "--family", "marsian", "--a", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = srrs().args(["--recipe", "table9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_two() {
    let out = srrs().args(["theory", "--zzz", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_alarm_exits_three() {
    let mut child = srrs()
        .args([
            "detect", "--family", "gamma", "--scheme", "srrs", "--s", "0", "--t", "0", "--a",
            "1",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"0.75\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ALARM n=1 R=1"), "got: {text}");
}

#[test]
fn detect_end_of_stream_exits_zero() {
    let mut child = srrs()
        .args([
            "detect", "--family", "gamma", "--scheme", "srrs", "--s", "1", "--t", "1", "--a",
            "10000",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"0.5\n2.0\n1.2\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# end-of-stream n=3"), "got: {text}");
}

#[test]
fn detect_multichannel_rows() {
    let mut child = srrs()
        .args([
            "detect", "--family", "gamma", "--scheme", "multi", "--m", "3", "--estimator",
            "mom", "--s", "1", "--t", "1", "--a", "100000",
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"0.5,2.0,1.0\n1.1 0.3 0.9\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("# end-of-stream n=2"));
}

#[test]
fn byte_identical_output_for_fixed_seed() {
    let args = [
        "gamma-const", "--family", "gamma", "--estimator", "mom", "--s", "1", "--t", "1",
        "--b0", "10", "--b1", "15", "--runs", "40", "--nmax", "20000", "--seed", "7",
    ];
    let a = srrs().args(args).output().unwrap();
    let b = srrs().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# seed=7"));
    assert!(text.contains("scheme,family,s,t,b0,b1,a,estimate,std_err,runs,truncated"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = std::env::temp_dir().join(format!("srrs-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "family=gamma\nestimator=mom\ns=1\nt=1\nb0=10\nb1=15\nruns=30\nnmax=20000\nseed=3\n",
    )
    .unwrap();
    // flag overrides the seed from the file
    let with_flag = srrs()
        .args([
            "gamma-const",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert!(with_flag.status.success());
    let text = String::from_utf8(with_flag.stdout).unwrap();
    assert!(text.contains("# seed=9"), "got: {text}");

    // unknown key in the file is rejected
    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "b0=10\nb1=15\nbogus=1\n").unwrap();
    let out = srrs()
        .args(["gamma-const", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn recipe_scaled_layout_and_determinism() {
    let args = ["--recipe", "table1", "--scale", "0.002", "--seed", "5"];
    let a = srrs().args(args).output().unwrap();
    assert!(a.status.success());
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 10, "header + nine cells: {text}");
    assert!(text.contains("# scale=0.002"));
    let b = srrs().args(args).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn demo_anticipating_reports_blown_bound() {
    let out = srrs()
        .args([
            "demo-anticipating", "--b", "5", "--runs", "60", "--nmax", "60000", "--seed", "2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let data_line = text.lines().last().unwrap();
    let ratio: f64 = data_line.split(',').last().unwrap().parse().unwrap();
    assert!(ratio >= 50.0, "ratio {ratio} should dwarf e^-b");
}
