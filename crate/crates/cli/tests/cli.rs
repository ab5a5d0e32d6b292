use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mnac-gt"));
    c.env_remove("MNAC_GT_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// JSON header and CSV body of a command's output.
fn split(text: &str) -> (serde_json::Value, Vec<String>) {
    let mut lines = text.lines();
    let header = lines.next().expect("header line");
    let json = header.strip_prefix("# ").expect("header starts with '# '");
    (serde_json::from_str(json).unwrap(), lines.map(str::to_string).collect())
}

fn column(body: &[String], name: &str) -> Vec<String> {
    let text = body.join("\n");
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).expect("column exists");
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["gap-sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn malformed_arguments_exit_one() {
    for args in [
        vec!["frobnicate"],
        vec!["bounds", "--ell", "ten"],
        vec!["bounds", "--alpha", "0.1", "--gamma", "0.5"],
        vec!["bounds", "--tau2", "1", "--optimize-tau"],
        vec!["gap-sweep", "--sweep", "sideways"],
        vec!["id-cost", "--gamma", "1.5"],
        vec!["simulate", "--trials", "-3"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["simulate", "--bogus"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"ell": 400, "alpha": 0.05, "snr": 0.001}"#).unwrap();
    let o = run(&["id-cost", "--config", cfg.to_str().unwrap(), "--ell", "900"]);
    assert_eq!(o.status.code(), Some(0));
    let (meta, body) = split(&stdout(&o));
    assert_eq!(meta["ell"], 900);
    assert_eq!(meta["alpha"], 0.05);
    assert_eq!(meta["snr"], 0.001);
    assert_eq!(meta["command"], "id-cost");
    assert_eq!(column(&body, "ell"), vec!["900"]);

    // a --gamma flag replaces the file's alpha
    let o = run(&["id-cost", "--config", cfg.to_str().unwrap(), "--gamma", "0.5"]);
    let (meta, _) = split(&stdout(&o));
    assert_eq!(meta["activity"]["gamma"], 0.5);
    assert_eq!(meta["alpha"], 20.0 / 400.0);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"ell": 400, "colour": "blue"}"#).unwrap();
    assert_eq!(run(&["id-cost", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(run(&["id-cost", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["id-cost", "--config", "/nonexistent/cfg.json"]).status.code(), Some(1));
}

#[test]
fn capacity_curve_matches_golden() {
    let o = run(&["capacity-curve"]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/capacity_curve_default.csv")).unwrap();
    assert_eq!(stdout(&o), golden);
    let (_, body) = split(&golden);
    assert!(column(&body, "M_bits_clamped").iter().all(|v| v.parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn capacity_curve_row_at_intercept() {
    let id = run(&["id-cost", "--ell", "100", "--alpha", "0.1", "--snr", "0.01"]);
    let (_, body) = split(&stdout(&id));
    let n0: f64 = column(&body, "n0")[0].parse().unwrap();
    let n = format!("{n0}");
    let o = run(&["capacity-curve", "--ell", "100", "--alpha", "0.1", "--snr", "0.01", "--from", &n, "--to", &n, "--points", "1"]);
    let (_, body) = split(&stdout(&o));
    let ln_m: f64 = column(&body, "lnM_nats")[0].parse().unwrap();
    assert!(ln_m.abs() < 1e-9, "{ln_m}");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let o = run(&["bounds", "--ell", "1000", "--alpha", "0.03", "--n", "5000", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let (meta, body) = split(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(meta["n"], 5000);
    assert_eq!(meta["optimize_tau"], true);
    assert_eq!(column(&body, "n"), vec!["5000"]);
}

#[test]
fn optimize_tau_marks_one_point() {
    let o = run(&["optimize-tau", "--ell", "1000", "--grid-points", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let (meta, body) = split(&stdout(&o));
    let sel = column(&body, "selected");
    assert_eq!(sel.len(), 50);
    assert_eq!(sel.iter().filter(|s| *s == "true").count(), 1);
    let i = sel.iter().position(|s| s == "true").unwrap();
    assert_eq!(column(&body, "tau2")[i].parse::<f64>().unwrap(), meta["tau2_opt"].as_f64().unwrap());
}

#[test]
fn gap_sweep_identical_across_workers() {
    let args = ["gap-sweep", "--from", "100", "--to", "2000", "--points", "4", "--n", "600", "--trials", "50", "--seed", "3"];
    let one = bin().args(args).env("MNAC_GT_WORKERS", "1").output().unwrap();
    let four = bin().args(args).env("MNAC_GT_WORKERS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let (_, body) = split(&stdout(&one));
    assert_eq!(column(&body, "status"), vec!["ok"; 4]);
    assert_eq!(column(&body, "trials"), vec!["50"; 4]);
}

#[test]
fn gap_sweep_infeasible_everywhere_exits_two() {
    let o = run(&["gap-sweep", "--sweep", "snr", "--ell", "100", "--p", "0", "--points", "3", "--grid-points", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let (_, body) = split(&stdout(&o));
    assert!(column(&body, "status").iter().all(|s| s.starts_with("error")));
}

#[test]
fn simulate_without_activity() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("round.csv");
    let o = run(&[
        "simulate", "--ell", "50", "--alpha", "0", "--snr", "0.01", "--n", "40", "--tau2", "1", "--trials", "30",
        "--progress", "--dump", dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, body) = split(&stdout(&o));
    assert_eq!(column(&body, "pmd_hat"), vec!["0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("30/30"));
    let (meta, rows) = split(&std::fs::read_to_string(&dump).unwrap());
    assert_eq!(meta["dump"], "trial 0");
    assert_eq!(rows[0], "channel_use,re_y,im_y,energy,outcome");
    assert_eq!(rows.len(), 41);
}

#[test]
fn simulate_reports_dominance() {
    let o = run(&["simulate", "--ell", "60", "--alpha", "0.1", "--snr", "0.01", "--n", "3000", "--trials", "100", "--seed", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let (_, body) = split(&stdout(&o));
    assert_eq!(column(&body, "pmd_dominated"), vec!["true"]);
    assert_eq!(column(&body, "pfp_dominated"), vec!["true"]);
    let again = run(&["simulate", "--ell", "60", "--alpha", "0.1", "--snr", "0.01", "--n", "3000", "--trials", "100", "--seed", "8"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn simulate_refuses_huge_runs() {
    assert_eq!(run(&["simulate", "--ell", "1000000"]).status.code(), Some(1));
}

#[test]
fn validate_passes_and_detects_perturbation() {
    let o = run(&["validate", "--draws", "200000"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() > 25);
    assert!(!text.contains("FAIL"));

    let builtin = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/golden/golden_values.json")).unwrap();
    let mut g: serde_json::Value = serde_json::from_str(&builtin).unwrap();
    g["gap_1e4"]["value"] = serde_json::json!(742.9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("golden.json");
    std::fs::write(&path, g.to_string()).unwrap();
    let o = run(&["validate", "--draws", "200000", "--golden", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL gap_1e4")));

    assert_eq!(run(&["validate", "--golden", "/nonexistent.json"]).status.code(), Some(1));
}
