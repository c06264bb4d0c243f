//! `hetpanel simulate` and `hetpanel simulate-panel`.

use std::fmt::Write as _;
use std::path::PathBuf;

use hetpanel_core::montecarlo::{
    covariance, run_grid, simulate_replication, true_parameter_oracle, DgpConfig, ParamLaw, StudyOptions, StudyRow,
    StudyTable, TrueValues, DEFAULT_CORR, DEFAULT_SD,
};
use hetpanel_core::{EstimatorKind, Panel, StatisticSpec};
use serde::{Deserialize, Serialize};

use crate::analyze::{check_level, parse_estimator, parse_stats};
use crate::args::{SimulateArgs, SimulatePanelArgs};
use crate::error::CliError;
use crate::json::SCHEMA_VERSION;

pub const DEFAULT_ORACLE_DRAWS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
    pub n: Vec<usize>,
    pub t: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(rename = "B")]
    pub bootstrap_b: usize,
    pub level: f64,
    pub oracle_draws: usize,
    pub estimators: Vec<EstimatorKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueValue {
    pub statistic: StatisticSpec,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub command: String,
    pub design: StudyDesign,
    pub true_values: Vec<TrueValue>,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn table(&self) -> StudyTable {
        StudyTable { rows: self.rows.clone() }
    }
}

fn design_config(
    mean: Option<[f64; 3]>,
    sd: Option<[f64; 3]>,
    corr: Option<[f64; 3]>,
    cov: Option<[[f64; 3]; 3]>,
    seed: Option<u64>,
) -> DgpConfig {
    let base = DgpConfig::default();
    DgpConfig {
        mean: mean.unwrap_or(base.mean),
        cov: cov.unwrap_or_else(|| covariance(sd.unwrap_or(DEFAULT_SD), corr.unwrap_or(DEFAULT_CORR))),
        seed: seed.unwrap_or(base.seed),
        ..base
    }
}

fn parse_estimators(s: &str) -> Result<Vec<EstimatorKind>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let k = parse_estimator(part)?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<StudyReport, CliError> {
    let mut base = design_config(args.mean, args.sd, args.corr, args.cov, args.seed);
    let ns = args.n.as_ref().map(|v| v.values()).unwrap_or_else(|| vec![base.n]);
    let ts = args.t.as_ref().map(|v| v.values()).unwrap_or_else(|| vec![base.t]);
    if ns.is_empty() || ts.is_empty() {
        return Err(CliError::Config("empty N or T grid".into()));
    }
    base.replications = args.replications.unwrap_or(base.replications);
    let level = args.level.unwrap_or(0.95);
    check_level(level)?;
    let options = StudyOptions {
        specs: parse_stats(args.stats.as_deref().unwrap_or("all"))?,
        estimators: parse_estimators(args.estimator.as_deref().unwrap_or("ed,hpj,toj"))?,
        bootstrap_draws: args.bootstrap_b.unwrap_or(crate::analyze::DEFAULT_B),
        level,
    };
    let oracle_draws = args.oracle_draws.unwrap_or(DEFAULT_ORACLE_DRAWS);
    for &(n, t) in &cells(&ns, &ts) {
        DgpConfig { n, t, ..base.clone() }.validate()?;
    }

    let truth = true_parameter_oracle(&base, oracle_draws, &options.specs)?;
    let table = run_grid(&base, &cells(&ns, &ts), &options, &truth)?;
    Ok(StudyReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        design: StudyDesign {
            mean: base.mean,
            cov: base.cov,
            n: ns,
            t: ts,
            replications: base.replications,
            seed: base.seed,
            bootstrap_b: options.bootstrap_draws,
            level,
            oracle_draws,
            estimators: options.estimators.clone(),
        },
        true_values: truth_list(&truth),
        rows: table.rows,
    })
}

fn cells(ns: &[usize], ts: &[usize]) -> Vec<(usize, usize)> {
    ns.iter().flat_map(|&n| ts.iter().map(move |&t| (n, t))).collect()
}

fn truth_list(truth: &TrueValues) -> Vec<TrueValue> {
    truth.0.iter().map(|(s, v)| TrueValue { statistic: *s, value: *v }).collect()
}

fn float_field(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub fn write_study_csv<W: std::io::Write>(rows: &[StudyRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic", "estimator", "n", "t", "true_value", "bias", "rmse", "cp", "replications", "failed"])?;
    for r in rows {
        w.write_record([
            r.statistic.to_string(),
            r.estimator.label().to_string(),
            r.n.to_string(),
            r.t.to_string(),
            float_field(r.true_value),
            float_field(r.bias),
            float_field(r.rmse),
            r.cp.map(float_field).unwrap_or_default(),
            r.replications.to_string(),
            r.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_study(report: &StudyReport) -> String {
    let mut out = String::new();
    let d = &report.design;
    let _ = writeln!(out, "R = {}, B = {}, seed = {}, level = {}", d.replications, d.bootstrap_b, d.seed, d.level);
    let _ = writeln!(
        out,
        "{:<18} {:>4} {:>5} {:>4} {:>8} {:>8} {:>8} {:>6}",
        "statistic", "est", "N", "T", "true", "bias", "rmse", "cp"
    );
    for r in &report.rows {
        let cp = r.cp.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<18} {:>4} {:>5} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>6}",
            r.statistic.to_string(),
            r.estimator.label(),
            r.n,
            r.t,
            r.true_value,
            r.bias,
            r.rmse,
            cp
        );
    }
    out
}

pub fn output_paths(prefix: &std::path::Path) -> (PathBuf, PathBuf) {
    let mut csv = prefix.as_os_str().to_owned();
    csv.push(".csv");
    let mut json = prefix.as_os_str().to_owned();
    json.push(".json");
    (PathBuf::from(csv), PathBuf::from(json))
}

pub fn cmd_simulate_panel(args: &SimulatePanelArgs) -> Result<Panel, CliError> {
    let base = design_config(args.mean, args.sd, args.corr, args.cov, args.seed);
    let config = DgpConfig { n: args.n.unwrap_or(base.n), t: args.t.unwrap_or(base.t), replications: 1, ..base };
    config.validate()?;
    let law = ParamLaw::new(&config)?;
    let (_, panel) = simulate_replication(&config, &law, args.replication.unwrap_or(0))?;
    Ok(panel)
}
