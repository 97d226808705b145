use std::fs;
use std::process::{Command, Output};

fn rc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rc-sentinel")).args(args).output().unwrap()
}

fn rc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rc-sentinel")).args(args).env(key, value).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bench_output_checks_not_robust_and_counterexample_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let wl = dir.path().join("smallbank.rct");
    fs::write(&wl, stdout(&rc(&["bench", "smallbank"]))).unwrap();
    let cx = dir.path().join("cx.rcs");
    let out = rc(&["check", wl.to_str().unwrap(), "--counterexample", cx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("not robust under attribute/atomic\n"));
    let out = rc(&["check-schedule", cx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("rc_allowed: true\nserializable: false\n"));
}

#[test]
fn robust_subset_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let wl = dir.path().join("w.rct");
    fs::write(&wl, "relation S(k key, a)\ntemplate T {\n  U X:S[a][a]\n}\n").unwrap();
    let out = rc(&["check", wl.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\"verdict\": \"robust\""));
}

#[test]
fn syntax_and_validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rct");
    fs::write(&bad, "relation S(k key)\ntemplate T {\n  Q X:S[k]\n}\n").unwrap();
    let out = rc(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.rct:2:2: unknown operation kind 'Q'"));

    fs::write(&bad, "relation S(k key)\ntemplate T {\n  R X:Missing[k]\n}\n").unwrap();
    let out = rc(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown relation"));

    assert_eq!(rc(&["check", "--granularity", "row", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let wl = dir.path().join("tpcc.rct");
    fs::write(&wl, stdout(&rc(&["bench", "tpcc-kv"]))).unwrap();
    let args = ["subsets", wl.to_str().unwrap(), "--json"];
    let one = rc_env(&args, "RC_SENTINEL_THREADS", "1");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&rc(&args)));
    assert_eq!(rc_env(&args, "RC_SENTINEL_THREADS", "many").status.code(), Some(2));
}

#[test]
fn promote_prints_parseable_workload() {
    let dir = tempfile::tempdir().unwrap();
    let wl = dir.path().join("tpcc.rct");
    fs::write(&wl, stdout(&rc(&["bench", "tpcc-kv"]))).unwrap();
    let out = rc(&["promote", wl.to_str().unwrap(), "--minimal"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("# promotion 1 of 1 under attribute/atomic: {OrderStatus[0], OrderStatus[1], OrderStatus[2], OrderStatus[3]}\n"));
    let promoted = dir.path().join("promoted.rct");
    fs::write(&promoted, &text).unwrap();
    assert_eq!(rc(&["check", promoted.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn oracle_agrees_on_transcribed_schedule() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/writecheck-pair.rcs");
    let out = rc(&["oracle", path]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.starts_with("oracle: not robust"));
    assert!(text.ends_with("agree: true\n"));
    assert_eq!(rc(&["oracle", path, "--max-ops", "4"]).status.code(), Some(2));
}
