mod common;

use common::*;
use hetpanel::io::{read_long_csv, ColumnMap};
use hetpanel_core::compute_unit_stats;

fn wave(n: usize, t: usize, shift: f64) -> Vec<(String, Vec<f64>)> {
    (0..n)
        .map(|i| {
            let xs = (0..t).map(|s| shift + ((i * 7 + s * 3) % 11) as f64 * 0.1 + (s as f64 * 0.37).sin()).collect();
            (format!("u{i}"), xs)
        })
        .collect()
}

fn write(path: &std::path::Path, units: &[(String, Vec<f64>)]) {
    let borrowed: Vec<(&str, Vec<f64>)> = units.iter().map(|(id, xs)| (id.as_str(), xs.clone())).collect();
    write_panel(path, &borrowed);
}

#[test]
fn help_and_usage_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["analyze", "--bootstrap-b", "many"])), 2);
}

#[test]
fn missing_input_file_is_an_input_error() {
    let out = run(&["analyze", "--input", "/nonexistent/panel.csv"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("panel.csv"));
}

#[test]
fn unbalanced_panel_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    std::fs::write(&p, "unit,time,value\na,1,0.1\na,2,0.3\na,3,0.2\nb,1,0.5\nb,2,0.4\n").unwrap();
    let out = run(&["analyze", "--input", p.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains('b'));
}

#[test]
fn non_numeric_value_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    std::fs::write(&p, "unit,time,value\na,1,0.1\na,2,oops\n").unwrap();
    assert_eq!(code(&run(&["analyze", "--input", p.to_str().unwrap()])), 3);
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "input = \"x.csv\"\nbogus_key = 3\n").unwrap();
    assert_eq!(code(&run(&["analyze", "--config", cfg.to_str().unwrap()])), 4);
    std::fs::write(&cfg, "this is not toml = = =").unwrap();
    assert_eq!(code(&run(&["analyze", "--config", cfg.to_str().unwrap()])), 4);

    let p = dir.path().join("p.csv");
    write(&p, &wave(6, 12, 0.0));
    let p = p.to_str().unwrap();
    assert_eq!(code(&run(&["analyze", "--input", p, "--level", "1.5"])), 4);
    assert_eq!(code(&run(&["analyze", "--input", p, "--stats", "sigma_mean"])), 4);
    assert_eq!(code(&bin().env("HETPANEL_THREADS", "zero").args(["analyze", "--input", p]).output().unwrap()), 4);
}

#[test]
fn too_short_panel_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write(&p, &wave(5, 4, 0.0));
    assert_eq!(code(&run(&["analyze", "--input", p.to_str().unwrap()])), 3);
}

#[test]
fn single_unit_correlation_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write(&p, &wave(1, 12, 0.0));
    let out = run(&["analyze", "--input", p.to_str().unwrap(), "--stats", "corr_mu_rho1", "--bootstrap-b", "10"]);
    assert_eq!(code(&out), 5);
}

#[test]
fn analyze_writes_schema_valid_json_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let mut units = wave(30, 12, 0.0);
    units.push(("flat".into(), vec![2.0; 12]));
    write(&p, &units);
    let json = dir.path().join("nested/report.json");
    let out = run(&["analyze", "--input", p.to_str().unwrap(), "--bootstrap-b", "50", "--out", json.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Correlation structure"));

    let v = read_json(&json);
    assert_eq!(schema_errors("analysis_report", &v), Vec::<String>::new());
    assert_eq!(v["statistics"].as_array().unwrap().len(), 18);
    assert_eq!(v["metadata"]["dropped_unit_ids"], serde_json::json!(["flat"]));
    let rho = v["statistics"].as_array().unwrap().iter().find(|b| b["target"] == "rho1_mean").unwrap();
    assert_eq!(rho["n_units_used"], 30);
    assert!(rho["flags"].as_array().unwrap().iter().any(|f| f == "degenerate_units_dropped"));
}

#[test]
fn analyze_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write(&p, &wave(20, 12, 0.0));
    let outputs: Vec<String> = ["a.json", "b.json"]
        .iter()
        .map(|name| {
            let j = dir.path().join(name);
            let o = run(&["analyze", "--input", p.to_str().unwrap(), "--bootstrap-b", "40", "--seed", "9", "--out", j.to_str().unwrap()]);
            assert_eq!(code(&o), 0);
            std::fs::read_to_string(j).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn kstest_identical_groups() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write(&p, &wave(25, 12, 0.0));
    let json = dir.path().join("ks.json");
    let p = p.to_str().unwrap();
    let out = run(&["kstest", "--group-a", p, "--group-b", p, "--out", json.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = read_json(&json);
    assert_eq!(schema_errors("ks_result", &v), Vec::<String>::new());
    assert_eq!(v["statistic"].as_f64().unwrap(), 0.0);
    assert_eq!(v["p_value"].as_f64().unwrap(), 1.0);
}

#[test]
fn kstest_disjoint_groups() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write(&a, &wave(40, 12, 0.0));
    write(&b, &wave(40, 12, 100.0));
    let json = dir.path().join("ks.json");
    let out = run(&[
        "kstest", "--group-a", a.to_str().unwrap(), "--group-b", b.to_str().unwrap(),
        "--quantity", "mu", "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = read_json(&json);
    assert_eq!(v["sup_distance"].as_f64().unwrap(), 1.0);
    assert!(v["p_value"].as_f64().unwrap() < 1e-10);
    assert!(String::from_utf8_lossy(&out.stdout).contains("sup distance = 1.000"));
}

#[test]
fn simulate_smoke_with_one_replication() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("study");
    let out = run(&[
        "simulate", "--n", "40", "--t", "12", "--replications", "1", "--bootstrap-b", "20",
        "--oracle-draws", "20000", "--out", prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("study.json"));
    assert_eq!(schema_errors("study", &v), Vec::<String>::new());
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 18 * 3);
    for r in rows {
        let cp = r["cp"].as_f64().unwrap();
        assert!(cp == 0.0 || cp == 1.0);
    }
    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 18 * 3);
    assert!(csv.starts_with("statistic,estimator,n,t,true_value,bias,rmse,cp,replications,failed"));
}

#[test]
fn simulate_rejects_indefinite_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!(
            "out = \"{}\"\nreplications = 1\ncov = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 0.04]]\n",
            dir.path().join("s").display()
        ),
    )
    .unwrap();
    assert_eq!(code(&run(&["simulate", "--config", cfg.to_str().unwrap()])), 4);
    assert_eq!(code(&run(&["simulate", "--replications", "1"])), 4, "missing output prefix");
}

#[test]
fn simulated_panel_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("panel.csv");
    let out = run(&["simulate-panel", "--n", "30", "--t", "15", "--seed", "4", "--out", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let cfg = hetpanel_core::montecarlo::DgpConfig { n: 30, t: 15, seed: 4, ..Default::default() };
    let law = hetpanel_core::montecarlo::ParamLaw::new(&cfg).unwrap();
    let (_, direct) = hetpanel_core::montecarlo::simulate_replication(&cfg, &law, 0).unwrap();
    let read = read_long_csv(&p, &ColumnMap::default()).unwrap();
    assert_eq!(compute_unit_stats(&read, 2).unwrap(), compute_unit_stats(&direct, 2).unwrap());

    let stdout = run(&["simulate-panel", "--n", "30", "--t", "15", "--seed", "4"]);
    assert_eq!(stdout.stdout, std::fs::read(&p).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write(&p, &wave(20, 12, 0.0));
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!("input = \"{}\"\nbootstrap_b = 30\nseed = 3\nstats = \"mu_mean\"\n", p.display()),
    )
    .unwrap();
    let j = dir.path().join("r.json");
    let out = run(&["analyze", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", j.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&j);
    assert_eq!(v["metadata"]["seed"], 8);
    assert_eq!(v["metadata"]["B"], 30);
    assert_eq!(v["statistics"].as_array().unwrap().len(), 1);
}
