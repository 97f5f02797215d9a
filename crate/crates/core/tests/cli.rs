use std::fs;
use std::process::Command;

use mdplab::cli::run_cli_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mdplab").chain(args.iter().copied());
    let code = run_cli_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn solve_prints_the_example_policy() {
    let (code, out, _) = run(&["solve"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    let policy: Vec<&str> = json["policy"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_str().unwrap())
        .collect();
    assert_eq!(policy, ["a1", "a2", "a1"]);
    assert_eq!(json["bias"][0].as_f64(), Some(0.0));
}

#[test]
fn solve_reads_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(
        &path,
        r#"{"n_states": 2, "actions": [1, 1], "rewards": [[0.0], [1.0]],
            "transitions": [[[0.5, 0.5]], [[0.5, 0.5]]]}"#,
    )
    .unwrap();
    let (code, out, err) = run(&["solve", "--mdp", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((json["gain"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn malformed_models_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"n_states": 2, "actions": [1, 1], "rewards": [[0.0], [1.0]],
            "transitions": [[[0.5, 0.6]], [[0.5, 0.5]]]}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["solve", "--mdp", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    let (code, _, _) = run(&["solve", "--mdp", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_writes_both_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, _, err) = run(&[
        "simulate",
        "--algorithm",
        "olp",
        "--horizon",
        "50",
        "--replications",
        "3",
        "--seed",
        "4",
        "--out",
        out_dir,
    ]);
    assert_eq!(code, 0, "{err}");
    let raw = fs::read_to_string(dir.path().join("regret_raw.csv")).unwrap();
    let mut lines = raw.lines();
    assert_eq!(lines.next(), Some("replication,t,regret"));
    assert_eq!(lines.count(), 150);
    let summary = fs::read_to_string(dir.path().join("regret_summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("t,mean_regret,ci_lower,ci_upper,variance"));
    assert_eq!(lines.count(), 50);
}

#[test]
fn simulate_output_ignores_thread_count() {
    let read = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run(&[
            "simulate",
            "--algorithm",
            "mdp-ucb",
            "--horizon",
            "80",
            "--replications",
            "6",
            "--seed",
            "11",
            "--threads",
            threads,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        fs::read(dir.path().join("regret_raw.csv")).unwrap()
    };
    assert_eq!(read("1"), read("3"));
}

#[test]
fn rigged_start_needs_the_three_state_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(
        &path,
        r#"{"n_states": 2, "actions": [2, 2], "rewards": [[0.0, 0.1], [1.0, 0.2]],
            "transitions": [[[0.5, 0.5], [0.4, 0.6]], [[0.5, 0.5], [0.3, 0.7]]]}"#,
    )
    .unwrap();
    let (code, _, _) = run(&[
        "simulate",
        "--mdp",
        path.to_str().unwrap(),
        "--algorithm",
        "mdp-ps",
        "--rigged",
        "--horizon",
        "5",
        "--replications",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let (code, _, err) = run(&[
        "simulate",
        "--algorithm",
        "mdp-ps",
        "--rigged",
        "--horizon",
        "5",
        "--replications",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(run(&["simulate", "--algorithm", "nope"]).0, 1);
    assert_eq!(run(&["solve", "--frobnicate"]).0, 1);
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["bench", "--dims", "1"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
}

#[test]
fn bench_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "bench",
        "--dims",
        "5",
        "--trials",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("PS-sample"));
    let records = fs::read_to_string(dir.path().join("bench_records.csv")).unwrap();
    assert!(records.starts_with("formulation,n_states,trial,wall_time_s,value,status"));
    assert_eq!(records.lines().count(), 1 + 6 * 2);
}

#[test]
fn binary_reads_the_seed_from_the_environment() {
    let exe = env!("CARGO_BIN_EXE_mdplab");
    let sim = |env_seed: Option<&str>, flag: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut cmd = Command::new(exe);
        cmd.args([
            "simulate",
            "--algorithm",
            "mdp-ps",
            "--horizon",
            "40",
            "--replications",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .env_remove("MDPLAB_SEED");
        if let Some(s) = env_seed {
            cmd.env("MDPLAB_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        let status = cmd.stdout(std::process::Stdio::null()).status().unwrap();
        assert!(status.success());
        fs::read(dir.path().join("regret_raw.csv")).unwrap()
    };
    assert_eq!(sim(Some("12345"), None), sim(None, Some("12345")));
    assert_eq!(sim(Some("7"), Some("12345")), sim(None, Some("12345")));
}
