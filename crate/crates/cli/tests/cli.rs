//! End-to-end checks of the appcast binary: exit codes, determinism,
//! snapshot/resume fidelity, report merging, and bound output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn appcast() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_appcast"));
    cmd.env_remove("APPCAST_SEED");
    cmd
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawning appcast");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_err(cmd: &mut Command) -> (i32, String) {
    let Output { status, stderr, .. } = cmd.output().expect("spawning appcast");
    assert!(!status.success());
    (status.code().expect("exit code"), String::from_utf8_lossy(&stderr).into_owned())
}

fn gen_events(dir: &Path, devices: u32, days: u32, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("events_{devices}x{days}_{seed}.jsonl"));
    run_ok(appcast().args([
        "gen",
        "--devices",
        &devices.to_string(),
        "--days",
        &days.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]));
    out
}

fn summary_count(stdout: &str, key: &str) -> u64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("missing {key:?} in summary:\n{stdout}"))
        .parse()
        .expect("numeric summary field")
}

#[test]
fn help_exits_zero() {
    for args in [vec!["--help"], vec!["run", "--help"], vec!["bound", "--help"]] {
        let out = appcast().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap().to_string();
    let cases: Vec<Vec<String>> = vec![
        // Non-numeric device count.
        ["gen", "--devices", "many", "--days", "1", "--out", "x.jsonl"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        // Unknown algorithm; the oracle is not a deployable policy.
        ["run", "--algo", "oracle", "--events", "x.jsonl", "--out-dir", &dir]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        // --c and --lambda are mutually exclusive.
        [
            "run", "--algo", "aucpa", "--events", "x.jsonl", "--out-dir", &dir, "--c", "1",
            "--lambda", "1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        // Missing required flag.
        ["report", "--out-dir", &dir].iter().map(|s| s.to_string()).collect(),
    ];
    for args in cases {
        let (code, _) = run_err(appcast().args(&args));
        assert_eq!(code, 2, "{args:?}");
    }
}

#[test]
fn gen_is_deterministic_and_reports_counts() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.jsonl");
    let b = tmp.path().join("b.jsonl");
    let args = |out: &Path| {
        vec![
            "gen".to_string(),
            "--devices".into(),
            "3".into(),
            "--days".into(),
            "7".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let stdout = run_ok(appcast().args(args(&a)));
    run_ok(appcast().args(args(&b)));

    let bytes_a = fs::read(&a).unwrap();
    assert_eq!(bytes_a, fs::read(&b).unwrap(), "same flags + seed must give identical logs");
    assert!(!bytes_a.is_empty());

    let lines = bytes_a.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count() as u64;
    assert_eq!(summary_count(&stdout, "events"), lines);
    assert_eq!(summary_count(&stdout, "devices"), 3);
    assert!(summary_count(&stdout, "distinct apps") > 0);

    let personas = fs::read_to_string(tmp.path().join("personas.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&personas).unwrap();
    assert_eq!(parsed.as_array().map(Vec::len), Some(3));
}

#[test]
fn gen_zero_days_writes_empty_log() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("empty.jsonl");
    let stdout = run_ok(appcast().args([
        "gen",
        "--devices",
        "1",
        "--days",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&out).unwrap(), b"");
    assert_eq!(summary_count(&stdout, "events"), 0);
}

#[test]
fn run_writes_trace_metrics_and_config_echo() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 2, 10, 11);
    let out_dir = tmp.path().join("kmfu");
    let stdout = run_ok(appcast().args([
        "run",
        "--algo",
        "kmfu",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));
    assert!(stdout.contains("algo: kmfu"));

    let trace = fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
    let rounds = trace.lines().count();
    assert!(rounds > 50, "expected a real trace, got {rounds} rounds");

    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("device,algorithm,metric,value"));
    assert!(metrics.contains("fleet,kmfu,precision,"));

    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("effective_config.json")).unwrap())
            .unwrap();
    assert_eq!(echo["algo"], "kmfu");
    assert_eq!(echo["k"], 4);
    assert_eq!(echo["warmup_days"], 3);
    assert_eq!(echo["events_sha256"].as_str().map(str::len), Some(64));
}

#[test]
fn run_reports_schema_errors_with_line_numbers() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 1, 2, 3);
    let mut text = fs::read_to_string(&events).unwrap();
    let bad_line = text.lines().count() + 1;
    text.push_str("{\"device_id\":\"dev0000\"}\n");
    let broken = tmp.path().join("broken.jsonl");
    fs::write(&broken, text).unwrap();

    let (code, stderr) = run_err(appcast().args([
        "run",
        "--algo",
        "kmfu",
        "--events",
        broken.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
    assert!(
        stderr.contains(&format!("line {bad_line}")),
        "stderr should name line {bad_line}: {stderr}"
    );
}

#[test]
fn parallel_replay_matches_serial() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 3, 10, 21);
    for (dir, jobs) in [("serial", "1"), ("parallel", "3")] {
        run_ok(appcast().args([
            "run",
            "--algo",
            "aucpa",
            "--events",
            events.to_str().unwrap(),
            "--out-dir",
            tmp.path().join(dir).to_str().unwrap(),
            "--jobs",
            jobs,
            "--seed",
            "5",
        ]));
    }
    for file in ["trace.jsonl", "metrics.csv"] {
        assert_eq!(
            fs::read(tmp.path().join("serial").join(file)).unwrap(),
            fs::read(tmp.path().join("parallel").join(file)).unwrap(),
            "{file} must not depend on --jobs"
        );
    }
}

#[test]
fn snapshot_resume_reproduces_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 2, 14, 5);
    let straight = tmp.path().join("straight");
    let resumed = tmp.path().join("resumed");

    run_ok(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        straight.to_str().unwrap(),
        "--record-pairs",
        "--snapshot-every",
        "120",
        "--seed",
        "9",
    ]));
    assert!(straight.join("checkpoints").read_dir().unwrap().count() == 2);

    // Settings carry over from the source run's effective config.
    run_ok(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        resumed.to_str().unwrap(),
        "--resume",
        straight.to_str().unwrap(),
    ]));

    for file in ["trace.jsonl", "metrics.csv", "models/dev0000.json", "models/dev0001.json"] {
        assert_eq!(
            fs::read(straight.join(file)).unwrap(),
            fs::read(resumed.join(file)).unwrap(),
            "{file} must match the uninterrupted run"
        );
    }

    // A checkpoint from one log cannot resume onto another.
    let other = gen_events(tmp.path(), 2, 14, 6);
    let (code, stderr) = run_err(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        other.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("wrong").to_str().unwrap(),
        "--resume",
        straight.to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
    assert!(stderr.contains("different event log"), "{stderr}");
}

#[test]
fn report_merges_runs_and_rejects_mismatched_logs() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 2, 10, 31);
    for algo in ["kmfu", "frecency", "aucpa"] {
        run_ok(appcast().args([
            "run",
            "--algo",
            algo,
            "--events",
            events.to_str().unwrap(),
            "--out-dir",
            tmp.path().join(algo).to_str().unwrap(),
        ]));
    }

    let report_dir = tmp.path().join("report");
    let stdout = run_ok(appcast().args([
        "report",
        "--run",
        tmp.path().join("kmfu").to_str().unwrap(),
        "--run",
        tmp.path().join("frecency").to_str().unwrap(),
        "--run",
        tmp.path().join("aucpa").to_str().unwrap(),
        "--out-dir",
        report_dir.to_str().unwrap(),
    ]));
    for algo in ["kmfu", "frecency", "aucpa"] {
        assert!(stdout.contains(algo), "comparison table misses {algo}:\n{stdout}");
    }

    let comparison = fs::read_to_string(report_dir.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 4, "header plus one row per run");
    let windows = fs::read_to_string(report_dir.join("windows.csv")).unwrap();
    assert!(windows.lines().count() > 1);
    let ranks = fs::read_to_string(report_dir.join("ranks.csv")).unwrap();
    assert!(ranks.lines().count() > 1);

    // Same flags, different log: refuse to compare.
    let other = gen_events(tmp.path(), 2, 10, 32);
    run_ok(appcast().args([
        "run",
        "--algo",
        "kmfu",
        "--events",
        other.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("kmfu_other").to_str().unwrap(),
    ]));
    let (code, stderr) = run_err(appcast().args([
        "report",
        "--run",
        tmp.path().join("kmfu").to_str().unwrap(),
        "--run",
        tmp.path().join("kmfu_other").to_str().unwrap(),
        "--out-dir",
        tmp.path().join("report_bad").to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
    assert!(stderr.contains("different event logs"), "{stderr}");

    // A directory without run artifacts is an error, not an empty report.
    let empty = tmp.path().join("not_a_run");
    fs::create_dir(&empty).unwrap();
    let (code, _) = run_err(appcast().args([
        "report",
        "--run",
        empty.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("report_empty").to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
}

#[test]
fn bound_zero_comparator_rhs_is_exactly_two() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 2, 10, 41);
    let run_dir = tmp.path().join("aucpa");
    run_ok(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        run_dir.to_str().unwrap(),
        "--record-pairs",
    ]));

    run_ok(appcast().args(["bound", "--run", run_dir.to_str().unwrap()]));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("bound.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2, "one zero-comparator row per device");
    for row in rows {
        assert_eq!(row["comparator"], "zero");
        assert_eq!(row["rhs"].as_f64(), Some(2.0), "zero comparator RHS is exactly 2");
        assert_eq!(row["holds"], true);
        assert_eq!(row["within_hypothesis"], false, "default C=0.02 puts λ=50 outside λ≤1");
    }
}

#[test]
fn bound_final_and_random_hold_on_lambda_one_run() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 2, 10, 43);
    let run_dir = tmp.path().join("aucpa_l1");
    run_ok(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        run_dir.to_str().unwrap(),
        "--record-pairs",
        "--c",
        "1.0",
    ]));

    let out = tmp.path().join("bound_l1.json");
    run_ok(appcast().args([
        "bound",
        "--run",
        run_dir.to_str().unwrap(),
        "--comparator",
        "final",
        "--comparator",
        "random:3",
        "--seed",
        "17",
        "--out",
        out.to_str().unwrap(),
    ]));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2 * 4, "per device: final plus three random draws");
    for row in rows {
        assert_eq!(row["within_hypothesis"], true);
        assert_eq!(row["holds"], true, "λ=1 run must satisfy the bound: {row}");
    }
}

#[test]
fn bound_without_pairs_explains_the_fix() {
    let tmp = TempDir::new().unwrap();
    let events = gen_events(tmp.path(), 1, 6, 47);
    let run_dir = tmp.path().join("aucpa_nopairs");
    run_ok(appcast().args([
        "run",
        "--algo",
        "aucpa",
        "--events",
        events.to_str().unwrap(),
        "--out-dir",
        run_dir.to_str().unwrap(),
    ]));

    let (code, stderr) = run_err(appcast().args(["bound", "--run", run_dir.to_str().unwrap()]));
    assert_eq!(code, 1);
    assert!(stderr.contains("--record-pairs"), "{stderr}");
}

#[test]
fn seed_env_var_fills_in_when_flag_is_absent() {
    let tmp = TempDir::new().unwrap();
    let flag = tmp.path().join("flag.jsonl");
    let env = tmp.path().join("env.jsonl");
    run_ok(appcast().args([
        "gen",
        "--devices",
        "1",
        "--days",
        "3",
        "--seed",
        "99",
        "--out",
        flag.to_str().unwrap(),
    ]));
    let mut cmd = appcast();
    cmd.env("APPCAST_SEED", "99");
    run_ok(cmd.args(["gen", "--devices", "1", "--days", "3", "--out", env.to_str().unwrap()]));
    assert_eq!(fs::read(&flag).unwrap(), fs::read(&env).unwrap());

    // The flag wins over the environment.
    let win = tmp.path().join("win.jsonl");
    let mut cmd = appcast();
    cmd.env("APPCAST_SEED", "1234567");
    run_ok(cmd.args([
        "gen",
        "--devices",
        "1",
        "--days",
        "3",
        "--seed",
        "99",
        "--out",
        win.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&flag).unwrap(), fs::read(&win).unwrap());
}
