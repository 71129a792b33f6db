//! The binary's contract: exit codes, line-anchored config errors and
//! reports that read back exactly.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skewlimit_cli::Table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewlimit"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn validate_passing_config_exits_zero() {
    let cfg = configs().join("example1.toml");
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = Table::from_csv(&stdout(&out)).unwrap();
    assert_eq!(table.meta("kind"), Some("validate"));
    assert!(table.rows.iter().all(|r| r[1] == "true"));
}

#[test]
fn validate_names_the_failing_condition() {
    let cfg = configs().join("beta_one.toml");
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let table = Table::from_csv(&stdout(&out)).unwrap();
    let i4 = table.rows.iter().find(|r| r[0] == "I4").unwrap();
    assert_eq!(i4[1], "false");
    assert!(stderr(&out).contains("failed: I4"));
}

#[test]
fn analysis_commands_refuse_violating_problems() {
    let cfg = configs().join("beta_one.toml");
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("I4"));
}

#[test]
fn missing_field_is_a_line_anchored_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("example1.toml")).unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, text.replace("beta = 0.5\n", "")).unwrap();
    let out = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("broken.toml:4:"), "{err}");
    assert!(err.contains("beta"), "{err}");

    std::fs::write(&path, text.replace("alpha = \"1/2\"", "alpha = \"1/0\"")).unwrap();
    let out = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("broken.toml:11:"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["validate", "--preset", "no-such-preset"])), 1);
    assert_eq!(code(&run(&["validate"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(
        code(&run(&[
            "simulate",
            "--preset",
            "example1",
            "--dump-paths",
            "2"
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "validate", "--preset", "example1", "--format", "xml"
        ])),
        1
    );
}

#[test]
fn too_few_paths_is_rejected_in_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("example1.toml")).unwrap();
    let path = dir.path().join("few.toml");
    std::fs::write(&path, text.replace("n_paths = 4000", "n_paths = 10")).unwrap();
    let out = run(&["converge", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("n_paths"));
}

#[test]
fn analyze_reports_case_and_weight() {
    let out = run(&["analyze", "--preset", "example1"]);
    assert_eq!(code(&out), 0);
    let t = Table::from_csv(&stdout(&out)).unwrap();
    assert_eq!(t.meta("case"), Some("A1"));
    assert_eq!(t.meta("gamma"), Some("0.75"));
    assert_eq!(t.meta("gamma_branch"), Some("case1"));
    assert_eq!(t.columns, ["t", "y_upper", "y_lower"]);

    let t = Table::from_csv(&stdout(&run(&["analyze", "--preset", "example2"]))).unwrap();
    assert_eq!(
        (t.meta("gamma"), t.meta("gamma_branch")),
        (Some("1"), Some("case2_one"))
    );

    let t = Table::from_csv(&stdout(&run(&["analyze", "--preset", "a2"]))).unwrap();
    assert_eq!(t.meta("case"), Some("A2"));
    assert_eq!(t.meta("gamma"), Some("Theorem 3: upper extremal"));
    assert!(t.rows.iter().all(|r| r[2] == "0"));
}

#[test]
fn gamma_table_has_fixed_columns_and_limit() {
    let out = run(&[
        "gamma", "--preset", "example1", "--K", "0.5,1,2", "--eps", "0.1,0.01",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = Table::from_csv(&stdout(&out)).unwrap();
    assert_eq!(t.columns, ["K", "eps", "gamma_K_eps"]);
    assert_eq!(t.rows.len(), 6);
    let limit: f64 = t.meta("limit").unwrap().parse().unwrap();
    assert!((limit - 0.75).abs() < 1e-2);
    assert_eq!(t.meta("closed_form"), Some("0.75"));
}

#[test]
fn reports_embed_seed_and_config_and_read_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let small = std::fs::read_to_string(configs().join("example1.toml"))
        .unwrap()
        .replace("n_paths = 4000", "n_paths = 150")
        .replace("h = 1e-4", "h = 1e-3")
        .replace("[0.2, 0.1, 0.05, 0.02]", "[0.2, 0.05]");
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, small).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "31337",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let text = std::fs::read_to_string(out_dir.join("converge.csv")).unwrap();
    assert!(text.starts_with("#skewlimit-csv v1\n"));
    let t = Table::from_csv(&text).unwrap();
    assert_eq!(t.to_csv(), text);
    assert_eq!(t.meta("seed"), Some("31337"));
    assert_eq!(
        t.columns,
        [
            "eps",
            "n",
            "upper",
            "lower",
            "ambiguous",
            "gamma_hat",
            "ci_low",
            "ci_high",
            "gamma_closed_form",
            "gamma_numeric"
        ]
    );
    let echoed: serde_json::Value = serde_json::from_str(t.meta("config").unwrap()).unwrap();
    assert_eq!(echoed["run"]["master_seed"], 31337);
    assert_eq!(echoed["run"]["n_paths"], 150);
    assert_eq!(echoed["problem"]["drift_plus"]["alpha"], "1/2");

    // The config formats ask for JSON too.
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("converge.json")).unwrap())
            .unwrap();
    assert_eq!(json["schema"], "skewlimit-json v1");
    assert_eq!(json["meta"]["config"]["run"]["master_seed"], 31337);
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    assert_eq!(json["rows"][0]["n"], 150);
}

#[test]
fn simulate_dumps_paths_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--preset",
        "symmetric",
        "--eps",
        "0.1",
        "--dump-paths",
        "2",
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stats = Table::from_csv(&std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap())
        .unwrap();
    assert_eq!(stats.rows.len(), 1);
    assert_eq!(stats.get_f64(0, "gamma_closed_form"), Some(0.5));
    let path =
        Table::from_csv(&std::fs::read_to_string(dir.path().join("paths/path_00001.csv")).unwrap())
            .unwrap();
    assert_eq!(path.columns, ["t", "eta", "xi"]);
    assert_eq!(path.meta("stream"), Some("1"));
    // β = 0: the two coordinates coincide.
    assert!(path.rows.iter().all(|r| r[1] == r[2]));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = skewlimit_cli::config::load(&path).unwrap_or_else(|e| panic!("{e}"));
        cfg.build_problem().unwrap();
    }
}
