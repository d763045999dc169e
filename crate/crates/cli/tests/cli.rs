use std::process::{Command, Output};

fn dispatchq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispatchq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and first data row of a CSV result, zipped.
fn first_row(out: &Output) -> Vec<(String, String)> {
    let text = stdout(out);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from);
    let row = lines.next().unwrap().split(',').map(String::from);
    header.zip(row).collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    row.iter()
        .find(|(k, _)| k == name)
        .unwrap()
        .1
        .parse()
        .unwrap()
}

#[test]
fn analyze_reports_the_closed_form() {
    let out = dispatchq(&["analyze", "--rates", "1.25", "--buffer", "2"]);
    assert!(out.status.success());
    let row = first_row(&out);
    assert!((field(&row, "order_wait") - 4.56).abs() < 1e-12);
    assert!((field(&row, "rider_wait") - 0.56).abs() < 1e-12);
    assert_eq!(field(&row, "order_wait_floor"), 2.0);
    assert!(stdout(&out).contains("closed-form"));
}

#[test]
fn analyze_without_buffer_has_no_rider_wait() {
    let row = first_row(&dispatchq(&["analyze", "--rates", "1.3"]));
    assert_eq!(field(&row, "rider_wait"), 0.0);
}

#[test]
fn invalid_rate_exits_with_two_and_names_the_violation() {
    let out = dispatchq(&["analyze", "--rates", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("λ_0 ≤ 1"));
    assert!(out.stdout.is_empty());
}

#[test]
fn missing_policy_is_a_validation_error() {
    assert_eq!(dispatchq(&["simulate"]).status.code(), Some(2));
}

#[test]
fn optimize_examples() {
    let row = first_row(&dispatchq(&["optimize"]));
    assert_eq!(field(&row, "buffer"), 8.0);
    assert!((field(&row, "lambda0") - 1.466_770_277_287_078_7).abs() < 1e-12);
    assert!(field(&row, "constraint_slack").abs() < 1e-9);
    assert!((field(&row, "extra_delay") - 0.1).abs() < 1e-9);

    let out = dispatchq(&["optimize", "--tstar", "3"]);
    let row = first_row(&out);
    assert_eq!(field(&row, "buffer"), 0.0);
    assert_eq!(field(&row, "lambda0"), 1.5);
    assert!(stdout(&out).trim_end().ends_with("n/a"));
}

#[test]
fn zero_patience_is_infeasible() {
    assert_eq!(
        dispatchq(&["optimize", "--tstar", "0"]).status.code(),
        Some(3)
    );
}

#[test]
fn improve_halves_the_extra_delay() {
    let row = first_row(&dispatchq(&["improve", "--rates", "1.2", "--m", "0"]));
    assert!((field(&row, "tau1") - 0.6).abs() < 1e-15);
    assert!((field(&row, "c") - 5.0).abs() < 1e-12);
    assert!((field(&row, "extra_delay_before") - 5.0).abs() < 1e-9);
    assert!((field(&row, "extra_delay_after") - 2.5).abs() < 1e-9);
    assert_eq!(field(&row, "rider_wait_after"), 0.0);
}

#[test]
fn improve_rejects_a_threshold_that_is_not_lower() {
    let out = dispatchq(&["improve", "--rates", "1.2", "--threshold", "2", "--m", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_reports_z_scores() {
    let out = dispatchq(&[
        "simulate", "--rates", "1.25", "--buffer", "2", "--events", "400000", "--seed", "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let metrics: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        metrics,
        ["order_wait", "order_wait_extra", "rider_wait", "rider_rate"]
    );
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5], "3");
        assert_eq!(cols[6], "400000");
        let z: f64 = cols[4].parse().unwrap();
        assert!(z.abs() < 5.0, "{line}");
    }
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"params": {"mu": 2.0, "cap_lambda": 1.5},
            "policy": {"rates": [1.25], "buffer": 2, "threshold": "inf"}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let row = first_row(&dispatchq(&["analyze", "--config", cfg]));
    assert_eq!(field(&row, "order_wait_floor"), 1.0);
    let row = first_row(&dispatchq(&[
        "analyze", "--config", cfg, "--mu", "1.5", "--buffer", "0",
    ]));
    assert_eq!(field(&row, "order_wait_floor"), 2.0);
    assert_eq!(field(&row, "rider_wait"), 0.0);
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"policy": {"threshold": "never"}}"#).unwrap();
    let out = dispatchq(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fig4_rows_for_the_worked_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig4.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": {"lambda0_grid": [1.2], "thresholds": ["inf", 10, 0]}}"#,
    )
    .unwrap();
    let text = stdout(&dispatchq(&["fig4", "--config", cfg.to_str().unwrap()]));
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        ["0", "10", "inf"]
    );
    let total = |r: &Vec<&str>| r[2].parse::<f64>().unwrap();
    let extra = |r: &Vec<&str>| r[3].parse::<f64>().unwrap();
    assert!((extra(&rows[0]) - 2.5).abs() < 1e-9);
    assert!((total(&rows[2]) - 7.0).abs() < 1e-9);
    assert!((extra(&rows[2]) - 5.0).abs() < 1e-9);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn jsonl_rows_parse() {
    let text = stdout(&dispatchq(&["sweep", "--format", "jsonl"]));
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 64 * 11);
    assert!(rows
        .iter()
        .all(|r| r["feasible"].is_string() && r["order_wait"].is_f64()));
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.csv");
    let out = dispatchq(&["fig3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 64);
    assert!(text.starts_with("tstar,lambda0,d,rider_wait,order_wait\n"));
}
