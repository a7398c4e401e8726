use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "N,q,L,build_s,solve_s,err_gauss,err_random";

fn hps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hps"))
        .args(args)
        .output()
        .expect("run hps")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_field_dump_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = hps(&[
        "solve",
        "--case",
        "laplace_harmonic",
        "--leaves",
        "4",
        "4",
        "--q",
        "16",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let err = report["row"]["max_error_gauss"].as_f64().unwrap();
    assert!(err <= 1e-8, "max_error_gauss = {err:.3e}");
    assert_eq!(report["row"]["N"].as_u64(), Some(640));

    let field = fs::read_to_string(dir.path().join("field.txt")).unwrap();
    let mut lines = field.lines();
    assert_eq!(lines.next(), Some("x,y,u"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first.len(), 3);
    assert_eq!(field.lines().count(), 1 + 640 + 33 * 33);
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let o = hps(&["solve", "--q", "6", "--out", "/nonexistent/hps-out"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("config-invalid:"), "{err}");
    assert!(err.contains("out"), "{err}");
}

#[test]
fn body_load_without_body_mode_is_a_solver_error() {
    let o = hps(&["solve", "--case", "poisson_trig", "--q", "6"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).starts_with("cache-missing-body-operators"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn invalid_leaf_count_names_the_field() {
    let o = hps(&["solve", "--leaves", "3", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("leaves_x"), "{}", stderr(&o));
}

#[test]
fn unknown_case_parameter_is_rejected() {
    let o = hps(&["solve", "--case", "poisson_trig", "--param", "zeta=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zeta"), "{}", stderr(&o));
}

#[test]
fn convergence_table_has_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = hps(&[
        "convergence",
        "--leaves",
        "2",
        "2",
        "--q-list",
        "6,10",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv, stdout(&o));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 3);
    let err = |line: &str| line.split(',').nth(5).unwrap().parse::<f64>().unwrap();
    assert!(err(lines[2]) < err(lines[1]));
}

#[test]
fn convergence_rejects_descending_q() {
    let o = hps(&["convergence", "--q-list", "10,6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q_list"), "{}", stderr(&o));
}

#[test]
fn single_level_bench_reports_absent_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hps(&[
        "bench",
        "--q",
        "6",
        "--levels",
        "1",
        "--threads",
        "1",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(HEADER));
    assert_eq!(csv.lines().count(), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bench_summary.json")).unwrap())
            .unwrap();
    assert!(summary["build_slope"].is_null());
    assert!(summary["solve_slope"].is_null());
}

#[test]
fn bench_memory_cap_skips_rows() {
    let o = hps(&[
        "bench",
        "--q",
        "6",
        "--levels",
        "1,4",
        "--memory-cap-mb",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipping L = 4"), "{}", stderr(&o));
    assert_eq!(
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        1
    );
}

#[test]
fn config_file_is_accepted_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"case": "poisson_trig", "leaves_x": 2, "leaves_y": 2, "q": 8, "body": true}"#,
    )
    .unwrap();
    let o = hps(&["solve", "--config", path(&cfg), "--q", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("120,10,1,"), "{row}");

    fs::write(&cfg, r#"{"case": "poisson_trig", "levels": 3}"#).unwrap();
    let o = hps(&["solve", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("levels"), "{}", stderr(&o));
}
