use std::process::{Command, Output};

use serde_json::Value;

fn qst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qst"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn design_theorem_json() {
    let o = qst(&["design", "--n", "1255", "--epsilon", "0.4", "--mode", "theorem"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["m"], 157);
    assert_eq!(v["mode"], "theorem");
    assert_eq!(v["corollary_satisfied"], true);
    let q = v["Q"].as_f64().unwrap();
    assert!((q - 79.699).abs() < 1e-3);
    assert!(v["diagnostics"]["m_window"].is_array());
}

#[test]
fn design_relaxed_json() {
    let o = qst(&["design", "--n", "501", "--q", "80", "--mode", "relaxed"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mode"], "relaxed");
    assert!(v["epsilon"].is_null());
    assert!(v["t0"].as_f64().unwrap() > 3000.0);
    assert!(v["fidelity_lower_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn design_infeasible_exits_2() {
    let o = qst(&["design", "--n", "501", "--epsilon", "0.4", "--mode", "theorem"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).is_empty());
    let err = stderr(&o);
    assert!(err.contains("8m+1") && err.contains("499.9"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&qst(&["design", "--n", "1255", "--mode", "theorem"])), 1);
    assert_eq!(code(&qst(&["design", "--n", "501", "--mode", "relaxed"])), 1);
    assert_eq!(code(&qst(&["design", "--n", "1255", "--epsilon", "2"])), 1);
    assert_eq!(code(&qst(&["simulate", "--n", "6", "--q", "0"])), 1);
    assert_eq!(code(&qst(&["simulate", "--n", "6", "--q", "1", "--t-max", "-3"])), 1);
    assert_eq!(code(&qst(&["simulate", "--n", "3", "--q", "1", "--t-max", "1"])), 1);
    assert_eq!(code(&qst(&["frobnicate"])), 1);
    assert_eq!(code(&qst(&["--help"])), 0);
    assert_eq!(code(&qst(&["--version"])), 0);
}

#[test]
fn simulate_trivial_grid() {
    let o = qst(&["simulate", "--n", "6", "--q", "0", "--samples", "2", "--t-max", "1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "t,fidelity");
    assert_eq!(lines[1], "0.0000000000000000e0,0.0000000000000000e0");
    assert!(lines[2].starts_with("1.0000000000000000e0,"));
}

#[test]
fn simulate_figure_curve_is_deterministic() {
    let args = ["simulate", "--n", "501", "--q", "80", "--t-max", "auto"];
    let a = qst(&args);
    let b = qst(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&stdout(&a));
    assert_eq!(rows.len(), 4096);
    let max = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(max >= 0.95);
}

#[test]
fn simulate_from_epsilon_and_json() {
    let o = qst(&[
        "simulate",
        "--n",
        "1255",
        "--epsilon",
        "0.4",
        "--samples",
        "64",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["curve"]["t"].as_array().unwrap().len(), 64);
    let t_max = v["t_max"].as_f64().unwrap();
    assert!((t_max - 2.5 * 10920.64).abs() < 1.0);
}

#[test]
fn verify_reports() {
    let o = qst(&["verify", "--n", "10", "--q", "5"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");

    let o = qst(&["verify", "--n", "12", "--q", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("0 outliers"));

    let o = qst(&["verify", "--n", "501", "--q", "80"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("PASS duality") && text.contains("PASS gershgorin"));
    assert!(text.contains("SKIP oracle"));
}

#[test]
fn verify_other_placement_skips_closed_forms() {
    let o = qst(&["verify", "--n", "9", "--q", "6", "--d", "3"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("SKIP duality") && text.contains("PASS oracle"));
}

#[test]
fn sweep_empty_grid_is_header_only() {
    let o = qst(&["sweep", "--mode", "theorem", "--epsilon", "0.4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("mode,n,epsilon,q,feasible,"));
}

#[test]
fn theorem_sweep_scaling_columns() {
    let args = [
        "sweep",
        "--mode",
        "theorem",
        "--n",
        "1255,2511,5023",
        "--epsilon",
        "0.4",
    ];
    let o = qst(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    for (row, n) in rows.iter().zip([1255.0, 2511.0, 5023.0]) {
        let k: f64 = n - 3.0;
        assert_eq!(row[4], "true");
        let q: f64 = row[3].parse().unwrap();
        let t0: f64 = row[8].parse().unwrap();
        let bound: f64 = row[9].parse().unwrap();
        let peak: f64 = row[12].parse().unwrap();
        assert!(q <= 4.0 * (k / 0.4).sqrt());
        assert!(t0 <= 461.0 * k / 0.4);
        assert!(peak >= bound);
    }
}

#[test]
fn sweep_marks_infeasible_points_and_repeats_exactly() {
    let args = ["sweep", "--mode", "theorem", "--n", "501,1255", "--epsilon", "0.4"];
    let a = qst(&args);
    let b = qst(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&stdout(&a));
    assert_eq!(rows[0][1], "501");
    assert_eq!(rows[0][4], "false");
    assert_eq!(rows[1][4], "true");
}

#[test]
fn relaxed_sweep() {
    let o = qst(&[
        "sweep", "--mode", "relaxed", "--n", "101,201", "--q", "10,40", "--format", "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["n"], 101);
    assert_eq!(rows[1]["Q"], 40.0);
}

#[test]
fn compare_windows() {
    let o = qst(&[
        "compare",
        "--n",
        "501",
        "--q",
        "80",
        "--threshold",
        "0.9",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = v["protocols"].as_array().unwrap();
    assert_eq!(p[0]["d"], 2);
    assert_eq!(p[1]["d"], 3);
    let w2 = p[0]["peak_window_width"].as_f64().unwrap();
    let w3 = p[1]["peak_window_width"].as_f64().unwrap();
    assert!(w2 > w3, "{w2} vs {w3}");
}

#[test]
fn compare_csv_schema_and_override() {
    let o = qst(&["compare", "--n", "40", "--q", "9", "--d", "4", "--samples", "10"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("protocol,t,fidelity\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 20);
    assert!(rows[..10].iter().all(|r| r[0] == "d2"));
    assert!(rows[10..].iter().all(|r| r[0] == "d4"));
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("qst-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("design.json");
    let o = qst(&[
        "design",
        "--n",
        "501",
        "--q",
        "80",
        "--mode",
        "relaxed",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["n"], 501);
    std::fs::remove_dir_all(&dir).unwrap();
}
