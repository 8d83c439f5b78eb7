use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rapf_core::config::ScenarioConfig;
use rapf_core::sim::compute_metrics;
use rapf_core::trace::{metrics_from_toml, read_trace};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn rapf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rapf"))
        .args(args)
        .env_remove("RAPF_OUT_DIR")
        .output()
        .expect("rapf runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The empty scene with one line replaced.
fn edited_empty(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(scenario("empty.toml")).unwrap();
    assert!(text.contains(from), "fixture lacks `{from}`");
    let path = dir.join("edited.toml");
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in [
        "empty.toml",
        "scenario1_wall.toml",
        "scenario2_offset_wall.toml",
        "scenario3_cylinders.toml",
        "scenario4_maze.toml",
    ] {
        let out = rapf(&["validate", "--config", scenario(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
}

#[test]
fn validate_exit_codes_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("d_0 = 15.0", "d_0 = -1.0", 4, "apf.d_0"),
        ("waypoints = [[0.0, 0.0, 2.0], [10.0, 0.0, 2.0]]", "", 4, "waypoints"),
        ("k_rt = 153.0", "k_rt = [153.0", 3, ""),
        ("[10.0, 0.0, 2.0]]", "[90.0, 0.0, 2.0]]", 5, "waypoints[1]"),
    ];
    for (from, to, expected, field) in cases {
        let path = edited_empty(dir.path(), from, to);
        let out = rapf(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(code(&out), expected, "{to}: {}", stderr(&out));
        assert!(stderr(&out).contains(&format!("`{field}`")) || field.is_empty(), "{}", stderr(&out));
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = rapf(&["validate", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 2);
    let out = rapf(&["run"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn empty_scene_run_is_quick_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = scenario("empty.toml");
    let start = Instant::now();
    let out = rapf(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--emit",
        "trace,metrics,plot",
    ]);
    assert!(start.elapsed() < Duration::from_secs(5));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("goal_reached=true"));

    let config = ScenarioConfig::load(&config_path).unwrap();
    let trace = read_trace(fs::File::open(dir.path().join("empty_modified.trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.config_sha256, config.sha256());
    let written = metrics_from_toml(&fs::read_to_string(dir.path().join("empty_modified.metrics.toml")).unwrap()).unwrap();
    assert_eq!(compute_metrics(&trace, &config).unwrap(), written);
    let svg = fs::read_to_string(dir.path().join("empty_modified.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rapf"))
        .args(["run", "--config", scenario("empty.toml").to_str().unwrap(), "--emit", "metrics", "--seed", "9"])
        .env("RAPF_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let names: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, ["empty_modified.metrics.toml"]);
}

#[test]
fn unwritable_output_is_a_write_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = rapf(&[
        "run",
        "--config",
        scenario("empty.toml").to_str().unwrap(),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 6, "{}", stderr(&out));
}

#[test]
fn conventional_wall_run_fails_and_reports_stuck() {
    let dir = tempfile::tempdir().unwrap();
    let out = rapf(&[
        "run",
        "--config",
        scenario("scenario1_wall.toml").to_str().unwrap(),
        "--mode",
        "conventional",
        "--out",
        dir.path().to_str().unwrap(),
        "--emit",
        "metrics",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let m = metrics_from_toml(&fs::read_to_string(dir.path().join("scenario1_wall_conventional.metrics.toml")).unwrap()).unwrap();
    assert!(m.stuck);
    assert!(!m.goal_reached);
}

fn table_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

#[test]
fn compare_on_empty_scene_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = rapf(&[
        "compare",
        "--config",
        scenario("empty.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = table_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "modified");
    assert_eq!(rows[1][0], "conventional");
    assert_eq!(rows[0][1..], rows[1][1..]);
    for mode in ["modified", "conventional"] {
        assert!(dir.path().join(format!("empty_{mode}.trace.csv")).exists());
    }
}

#[test]
fn compare_on_offset_wall_shows_the_return_to_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = rapf(&[
        "compare",
        "--config",
        scenario("scenario2_offset_wall.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = table_rows(&stdout(&out));
    assert_eq!(rows[0][0], "modified");
    assert_eq!(rows[0][1], "true");
    assert_eq!(rows[0][6], "true");
}
