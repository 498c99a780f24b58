use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cluster-game");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL: &str = r#"
name = "small"
price_constant = 15.0
alpha = 0.1
max_iter = 400
x0_seed = 4

[[clusters]]
size = 2
coefficient_seed = 1
graph = { kind = "ring" }

[[clusters]]
size = 2
coefficient_seed = 2
graph = { kind = "ring" }

[global_graph]
inter = { kind = "random", seed = 3, extra_edges = 2 }
"#;

fn cluster_game(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_outputs_and_report_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = cluster_game(tmp.path(), &["run", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let res = tmp.path().join("res");
    for f in ["trace.csv", "estimates.csv", "report.txt"] {
        assert!(res.join(f).is_file(), "{f}");
    }
    let trace = std::fs::read_to_string(res.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,e_opt,e_cons,e_track,raw_consensus,mapping_norm,x_mean_0"));
    assert_eq!(trace.lines().count(), 402);
    let report = std::fs::read_to_string(res.join("report.txt")).unwrap();
    let json = cluster_game::experiment::parse_report_json(&report).unwrap();
    let embedded = json["config_toml"].as_str().unwrap();
    let original = cluster_game::experiment::ExperimentConfig::from_toml_str(SMALL).unwrap();
    assert_eq!(
        cluster_game::experiment::ExperimentConfig::from_toml_str(embedded).unwrap(),
        original
    );
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        let o = cluster_game(tmp.path(), &["run", "--quiet", "--config", cfg, "--out", out]);
        assert!(o.status.success());
        assert!(stdout(&o).is_empty());
    }
    for f in ["trace.csv", "estimates.csv", "report.txt"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn seed_override_changes_initial_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    cluster_game(tmp.path(), &["run", "--quiet", "--config", cfg, "--out", "a"]);
    let o = cluster_game(tmp.path(), &["run", "--quiet", "--config", cfg, "--out", "b", "--seed-override", "99"]);
    assert!(o.status.success());
    let a = std::fs::read_to_string(tmp.path().join("a/estimates.csv")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("b/estimates.csv")).unwrap();
    assert_ne!(a.lines().nth(1), b.lines().nth(1));
    let report = std::fs::read_to_string(tmp.path().join("b/report.txt")).unwrap();
    assert!(report.contains("x0_seed = 99"));
}

#[test]
fn missing_price_constant_exits_two_naming_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("price_constant = 15.0\n", ""));
    let o = cluster_game(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("price_constant"), "{}", stderr(&o));
}

#[test]
fn disconnected_cluster_exits_two_naming_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replacen(
        "coefficient_seed = 2\ngraph = { kind = \"ring\" }",
        "coefficient_seed = 2\ngraph = { kind = \"edges\", edges = [[0, 1]] }",
        1,
    );
    let cfg = write_config(tmp.path(), &text);
    let o = cluster_game(tmp.path(), &["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cluster 1"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_one_with_partial_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("alpha = 0.1", "alpha = 40.0").replace("max_iter = 400", "max_iter = 5000");
    let cfg = write_config(tmp.path(), &text);
    let o = cluster_game(tmp.path(), &["run", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("diverged"), "{}", stderr(&o));
    let trace = std::fs::read_to_string(tmp.path().join("res/trace.csv")).unwrap();
    assert!(trace.lines().count() > 1);
}

#[test]
fn certify_single_agent_prints_zero_contractions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_agent.toml");
    let o = cluster_game(tmp.path(), &["certify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("sigma_R               0.000000e0"));
    assert!(out.contains("sigma_C               0.000000e0"));
    assert!(!out.contains("none certified"));
}

#[test]
fn run_with_certify_uses_printed_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("single_agent.toml");
    let cfg = cfg.to_str().unwrap();
    let cert = stdout(&cluster_game(tmp.path(), &["certify", "--config", cfg]));
    let certified = cluster_game::experiment::parse_report_json(&cert).unwrap()["certify"]["certification"]["alpha"]
        .as_f64()
        .unwrap();
    let o = cluster_game(tmp.path(), &["run", "--quiet", "--config", cfg, "--out", "res"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("res/report.txt")).unwrap();
    let json = cluster_game::experiment::parse_report_json(&report).unwrap();
    assert_eq!(json["summary"]["alpha"].as_f64().unwrap(), certified);
    assert_eq!(json["summary"]["alpha_source"], "certified");
}

#[test]
fn compare_reports_ordering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let o = cluster_game(tmp.path(), &["compare", "--config", cfg.to_str().unwrap()]);
    let json = cluster_game::experiment::parse_report_json(&stdout(&o)).unwrap();
    let dense = json["compare"]["dense"].as_u64().unwrap();
    let lf = json["compare"]["leader_follower"].as_u64().unwrap();
    assert_eq!(o.status.success(), lf >= dense);
}

#[test]
fn report_refits_and_writes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("max_iter = 400", "max_iter = 1500"));
    let o = cluster_game(tmp.path(), &["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", "res"]);
    assert!(o.status.success());
    let o = cluster_game(tmp.path(), &["report", "res/trace.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = cluster_game::experiment::parse_report_json(&stdout(&o)).unwrap();
    let rate = &json["report"]["rate"];
    assert_eq!(rate["status"], "fit");
    assert!(rate["slope"].as_f64().unwrap() < 0.0);
    assert!(rate["r_squared"].as_f64().unwrap() >= 0.99);
    let traj = std::fs::read_to_string(tmp.path().join("res/trajectory.csv")).unwrap();
    assert!(traj.starts_with("k,dimension,value\n"));
    assert_eq!(traj.lines().count(), 1 + 1501 * 4);
}

#[test]
fn report_on_two_rows_is_insufficient() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("t.csv"),
        "k,e_opt,e_cons,e_track,raw_consensus,mapping_norm,x_mean_0\n0,1,1,1,1,1,0\n1,0.5,0.5,0.5,0.5,0.5,0\n",
    )
    .unwrap();
    let o = cluster_game(tmp.path(), &["report", "t.csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("insufficient data"));
}

#[test]
fn report_on_garbage_fails() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("t.csv"), "not,a,trace\n1,2\n").unwrap();
    let o = cluster_game(tmp.path(), &["report", "t.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cluster_game(tmp.path(), &["report", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cluster_game(tmp.path(), &["run"]).status.code(), Some(2));
    assert_eq!(cluster_game(tmp.path(), &["bogus"]).status.code(), Some(2));
}
