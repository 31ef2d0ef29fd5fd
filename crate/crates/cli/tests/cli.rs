use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sigma-shape")
}

fn run(dir: &Path, command: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{command}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{command}-{}", extra.join("_")));
    let output = Command::new(bin())
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn polyline_lengths(svg: &Path) -> Vec<usize> {
    let text = fs::read_to_string(svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| n.attribute("points").unwrap().split_whitespace().count())
        .collect()
}

const DISK_P2: &str = r#"{"domain": {"type": "disk"}, "p": 2, "f": "1", "h": 0.05}"#;

#[test]
fn solve_matches_radial_solution_at_center() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "solve", DISK_P2, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("state.csv"));
    let nearest = rows
        .iter()
        .min_by(|a, b| {
            let r = |v: &Vec<String>| v[1].parse::<f64>().unwrap().hypot(v[2].parse().unwrap());
            r(a).total_cmp(&r(b))
        })
        .unwrap();
    let value: f64 = nearest[3].parse().unwrap();
    assert!((value - 0.25).abs() <= 2e-2, "{value}");
    let field = json(&out.join("state.json"));
    assert_eq!(field["nodes"].as_u64().unwrap() as usize, rows.len());
    let mesh = json(&out.join("mesh.json"));
    assert_eq!(mesh["nodes"].as_array().unwrap().len(), rows.len());
    assert!(fs::read_to_string(out.join("state.vtk"))
        .unwrap()
        .starts_with("# vtk DataFile"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, out_a) = run(dir.path(), "solve", DISK_P2, &[]);
    let (b, out_b) = run(dir.path(), "solve", DISK_P2, &["--h", "0.05"]);
    assert!(a.status.success() && b.status.success());
    for f in [
        "report.json",
        "state.json",
        "state.csv",
        "mesh.json",
        "geometry.json",
    ] {
        assert_eq!(
            fs::read(out_a.join(f)).unwrap(),
            fs::read(out_b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn check_point_at_disk_center_is_nearly_constant() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 3, "h": 0.05, "lambda": 0.01,
        "region": {"kind": "points", "vertices": [[0, 0]]},
        "probe": {"radii": [0.12, 0.09, 0.06], "directions": 16}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "check-point", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    let dev = report["point"]["constancy_deviation"].as_f64().unwrap();
    assert!(dev <= 5e-2, "{dev}");
    let rows = csv_rows(&out.join("probe.csv"));
    assert_eq!(rows.len(), 16);
    assert_eq!(polyline_lengths(&out.join("probe.svg")), vec![16]);
}

#[test]
fn derivative_with_default_bump_matches_finite_difference() {
    let cfg = r#"{"domain": {"type": "unit_square"}, "p": 2, "h": 0.05, "lambda": 0.1,
        "region": {"kind": "polyline", "vertices": [[0.25, 0.5], [0.5, 0.5], [0.75, 0.5]]}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "derivative", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    let check = &report["derivatives"][0];
    assert_eq!(check["field"]["type"], "bump");
    let rel = check["relative_error"].as_f64().unwrap();
    assert!(rel <= 5e-2, "{rel}");
}

#[test]
fn check_curve_plots_only_tabulated_samples() {
    let cfg = r#"{"domain": {"type": "unit_square"}, "p": 2, "h": 0.05, "lambda": 0.05,
        "region": {"kind": "polyline", "vertices": [[0.2, 0.45], [0.5, 0.55], [0.8, 0.5]]}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "check-curve", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("residual.csv"));
    assert!(!rows.is_empty());
    assert_eq!(
        polyline_lengths(&out.join("residual.svg")),
        vec![rows.len(); 3]
    );
    let report = json(&out.join("report.json"));
    assert_eq!(
        report["curve"]["samples"].as_array().unwrap().len(),
        rows.len()
    );
}

#[test]
fn optimize_writes_a_monotone_trajectory() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 3, "h": 0.1, "lambda": 0.01,
        "region": {"kind": "points", "vertices": [[0.3, 0.1]]},
        "descent": {"max_iters": 4}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "optimize", cfg, &["--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<Value> = fs::read_to_string(out.join("trajectory.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.len() >= 2);
    let costs: Vec<f64> = lines
        .iter()
        .map(|l| l["cost"]["total"].as_f64().unwrap())
        .collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    assert_eq!(lines[0]["iter"], 0);
    assert!(lines[0]["region"]["vertices"].is_array());
    let rows = csv_rows(&out.join("cost.csv"));
    assert_eq!(rows.len(), lines.len());
    assert_eq!(polyline_lengths(&out.join("cost.svg")), vec![rows.len()]);

    // same seed, same start
    let (o2, out2) = run(dir.path(), "optimize", cfg, &["--seed", "7"]);
    assert!(o2.status.success());
    assert_eq!(
        fs::read(out.join("trajectory.jsonl")).unwrap(),
        fs::read(out2.join("trajectory.jsonl")).unwrap()
    );
}

#[test]
fn misspelled_key_fails_validation_before_solving() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 2, "f": "1", "hh": 0.05}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hh"));
    assert!(!out.exists());
}

#[test]
fn syntax_error_reports_position() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 2, "f": "2*x + -", "h": 0.05}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position 8"));
}

#[test]
fn failing_evaluation_is_a_solver_error() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 2, "f": "1/(x - x)", "h": 0.1}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn capacity_violation_is_a_validation_error() {
    let cfg = r#"{"domain": {"type": "disk"}, "p": 2, "h": 0.1,
        "region": {"kind": "points", "vertices": [[0, 0]]}}"#;
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(dir.path(), "solve", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
}
