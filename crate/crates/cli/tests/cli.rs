use std::path::Path;
use std::process::{Command, Output};

fn bundling(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bundling")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const SHORT: [&str; 2] = ["--set", "horizon=7200"];

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bundling(&["run", "--out", &s(&out), "--set", "k=0"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&bundling(&["gen", "--out", &s(&dir.path().join("o.csv")), "--config", &s(&missing)])), 2);
    let o = bundling(&["sweep", "--out", &s(&dir.path().join("s.csv")), "--T_B_min", "-1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn runtime_failure_exits_with_3_and_removes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bundling(&[
        "run",
        "--out",
        &s(&out),
        SHORT[0],
        SHORT[1],
        "--set",
        "travel.kind=\"routing_service\"",
        "--set",
        "travel.service_endpoint=\"http://127.0.0.1:9\"",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists(), "partial run output left behind");
}

#[test]
fn failed_check_exits_with_4_and_keeps_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    let mode = "bundling_mode=\"same_vendor\"";
    let o = bundling(&[
        "sweep", "--out", &s(&sweep), SHORT[0], SHORT[1], "--set", mode, "--T_B_min", "1,2,4,6,8,10",
        "--pud-equals-batch", "--k", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = dir.path().join("cmp.json");
    let o = bundling(&["compare", "--sweep", &s(&sweep), "--out", &s(&report), SHORT[0], SHORT[1], "--set", mode, "--min-r2", "1.5"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&report).unwrap().contains("\"r2\""));
}

#[test]
fn compare_refuses_other_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.csv");
    assert_eq!(code(&bundling(&["sweep", "--out", &s(&sweep), SHORT[0], SHORT[1], "--k", "3"])), 0);
    let report = dir.path().join("cmp.json");
    let o = bundling(&["compare", "--sweep", &s(&sweep), "--out", &s(&report), SHORT[0], SHORT[1]]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("k = 2"));
    assert!(!report.exists());
}

#[test]
fn gen_honours_density_and_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let count = |args: &[&str]| {
        let p = dir.path().join(format!("{}.csv", args.join("_").replace(['=', '.'], "")));
        let mut all = vec!["gen", "--out"];
        let ps = s(&p);
        all.push(&ps);
        all.extend_from_slice(&SHORT);
        all.extend_from_slice(args);
        assert_eq!(code(&bundling(&all)), 0);
        std::fs::read_to_string(&p).unwrap()
    };
    let full = count(&[]);
    let half = count(&["--set", "density=0.5"]);
    assert!(half.lines().count() < full.lines().count());
    assert_ne!(count(&["--rep", "1"]), full);
}

#[test]
fn theory_curve_has_one_row_per_patience_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    assert_eq!(code(&bundling(&["theory", "--out", &s(&out), "--theta", "1,3,5"])), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 4);
}
