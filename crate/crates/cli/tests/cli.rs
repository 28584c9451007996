use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cubquad"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn stdout(args: &[&str], stdin: Option<&str>) -> String {
    let out = run(args, stdin);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str], stdin: Option<&str>) -> Value {
    let mut full = vec!["--out", "json"];
    full.extend_from_slice(args);
    serde_json::from_str(&stdout(&full, stdin)).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn count_reference_system() {
    let sys = fixture("reference_system.txt");
    let text = stdout(&["count", "N", "--P", "1,2", "--system", sys.to_str().unwrap()], None);
    let rows = data_lines(&text);
    assert_eq!(rows[0], "P,count,method,seconds");
    assert!(rows[1].starts_with("1,525,mitm,"));
    assert!(rows[2].starts_with("2,35471,mitm,"));
    assert!(text.contains("# input_hash: "));
}

#[test]
fn naive_and_mitm_agree_through_cli() {
    let v = json(&["count", "moment10", "--P", "2", "--method", "naive"], None);
    let w = json(&["count", "moment10", "--P", "2"], None);
    assert_eq!(v["result"][0]["count"], w["result"][0]["count"]);
    assert_eq!(v["config"]["command"]["method"], "naive");
}

#[test]
fn runs_are_reproducible() {
    let sys = fixture("reference_system.txt");
    let args = ["density", "chiinf", "--system", sys.to_str().unwrap(), "--samples", "20000"];
    let a = json(&args, None);
    let b = json(&args, None);
    assert_eq!(a["input_hash"], b["input_hash"]);
    assert_eq!(a["result"]["value"], b["result"]["value"]);
    let mut reseeded = vec!["--seed", "2"];
    reseeded.extend_from_slice(&args);
    let c = json(&reseeded, None);
    assert_ne!(a["input_hash"], c["input_hash"]);
    assert_eq!(c["config"]["seed"], 2);
}

#[test]
fn expsum_pairs_and_batch_mode() {
    let single = stdout(&["expsum", "g", "0", "--P", "5"], None);
    let pair: Vec<f64> = data_lines(&single)[0]
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(pair, vec![11.0, 0.0]);

    let batch = stdout(&["expsum", "f", "--P", "3"], Some("0 0\n0.5 0\n"));
    let rows = data_lines(&batch);
    assert_eq!(rows.len(), 2);
    let re: f64 = rows[0].split_whitespace().next().unwrap().parse().unwrap();
    assert_eq!(re, 7.0);

    let s = json(&["expsum", "S", "1", "0", "0"], None);
    assert_eq!(s["result"][0][0], 1.0);
}

#[test]
fn arcs_classify_reads_points() {
    let text = stdout(
        &["arcs", "classify", "--level", "1d", "--P", "1000"],
        Some("0.5\n0.3183098861837907\n"),
    );
    assert_eq!(data_lines(&text), vec!["major q=2 a=1", "minor"]);

    let v = json(
        &["arcs", "classify", "--level", "N", "--P", "1000000", "--w", "2", "--r2", "1"],
        Some("0 0\n"),
    );
    assert_eq!(v["result"][0]["kind"], "Major");
}

#[test]
fn matrix_check_kinds() {
    let dir = std::env::temp_dir().join(format!("cubquad-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let m = dir.join("m.txt");
    std::fs::write(&m, "2 3\n0 1 2\n1 1 1\n").unwrap();
    let path = m.to_str().unwrap();
    let hns = json(&["matrix", "check", "--kind", "hns", path], None);
    assert_eq!(hns["result"]["holds"], true);
    let tns = json(&["matrix", "check", "--kind", "tns", path], None);
    assert_eq!(tns["result"]["holds"], false);
    let aux = run(&["matrix", "check", "--kind", "aux", path], None);
    assert!(!aux.status.success());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_from_config_file() {
    let dir = std::env::temp_dir().join(format!("cubquad-verify-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "system = {}\nP = 1, 2\nprime_bound = 7\nimax = 2\nsamples = 200000\nseries_Y = 6\nwitness_bound = 3\n",
            fixture("reference_system.txt").display()
        ),
    )
    .unwrap();
    let v = json(&["verify", cfg.to_str().unwrap()], None);
    let rows = &v["result"]["assessment"]["rows"];
    assert_eq!(rows[1]["count"], "35471");
    assert_eq!(v["result"]["config"]["density"]["prime_bound"], 7);
    assert!(v["result"]["density"]["c"].as_f64().unwrap() > 0.0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn suite_reports_slope() {
    let v = json(&["suite", "hua", "--P", "4,8,16,32"], None);
    assert_eq!(v["result"]["pass"], true);
    assert_eq!(v["result"]["predicted"], 2.0);
}

#[test]
fn bad_arguments_fail() {
    assert!(!run(&["count", "N", "--P", "2"], None).status.success());
    assert!(!run(&["expsum", "g", "--P", "2"], Some("1 2\n")).status.success());
    assert!(!run(&["suite", "nonsense"], None).status.success());
    assert!(!run(&["arcs", "classify", "--level", "Q", "--P", "10"], Some("0.1\n")).status.success());
}
