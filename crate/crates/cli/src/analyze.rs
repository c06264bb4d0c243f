//! `hetpanel analyze`: ingest, per-unit estimates, ED/HPJ/TOJ per
//! statistic and cross-sectional bootstrap intervals.

use std::fmt::Write as _;
use std::str::FromStr;

use hetpanel_core::jackknife::TOJ_WEIGHTS;
use hetpanel_core::{bootstrap_all, build_bundle, EstimatorKind, JackknifeBundle, JackknifeOrder, Panel, StatisticSpec};
use serde::{Deserialize, Serialize};

use crate::args::AnalyzeArgs;
use crate::error::CliError;
use crate::io::{read_long_csv, time_label};
use crate::json::SCHEMA_VERSION;

pub const DEFAULT_B: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_MAX_LAG: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub command: String,
    pub metadata: AnalysisMetadata,
    pub statistics: Vec<StatisticBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMetadata {
    pub input: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub first_period: String,
    pub last_period: String,
    pub max_lag: usize,
    pub seed: u64,
    #[serde(rename = "B")]
    pub bootstrap_b: usize,
    pub level: f64,
    pub estimator: EstimatorKind,
    pub jackknife: JackknifeOrder,
    /// Units with a constant series in the full panel or any subpanel; they
    /// are left out of every autocorrelation statistic.
    pub dropped_units: usize,
    pub dropped_unit_ids: Vec<String>,
    pub toj_weights_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBlock {
    pub estimate: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub missing_draws: Option<usize>,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticBlock {
    pub target: StatisticSpec,
    /// Estimator the top-level point and interval belong to.
    pub estimator_kind: EstimatorKind,
    pub point: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub n_units_used: usize,
    pub degenerate_units_dropped: usize,
    #[serde(rename = "ED")]
    pub ed: EstimateBlock,
    #[serde(rename = "HPJ")]
    pub hpj: EstimateBlock,
    #[serde(rename = "TOJ")]
    pub toj: Option<EstimateBlock>,
    pub flags: Vec<String>,
}

impl StatisticBlock {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimateBlock> {
        match kind {
            EstimatorKind::Ed => Some(&self.ed),
            EstimatorKind::Hpj => Some(&self.hpj),
            EstimatorKind::Toj => self.toj.as_ref(),
        }
    }
}

pub(crate) fn toj_note() -> String {
    format!(
        "TOJ = {}*ED {} {}*mean(half panels) + {}*mean(third panels); third panels are rotation-averaged when T is not a multiple of 3",
        TOJ_WEIGHTS[0],
        if TOJ_WEIGHTS[1] < 0.0 { '-' } else { '+' },
        TOJ_WEIGHTS[1].abs(),
        TOJ_WEIGHTS[2]
    )
}

pub(crate) fn parse_estimator(s: &str) -> Result<EstimatorKind, CliError> {
    EstimatorKind::from_str(s.trim()).map_err(|e| CliError::Config(e.to_string()))
}

pub(crate) fn parse_stats(s: &str) -> Result<Vec<StatisticSpec>, CliError> {
    StatisticSpec::parse_list(s).map_err(|e| CliError::Config(e.to_string()))
}

pub(crate) fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("level {level} outside (0, 1)")))
    }
}

/// Thirds when the panel is long enough, halves otherwise; TOJ requires
/// the thirds.
fn jackknife_order(t: usize, max_lag: usize, estimator: EstimatorKind) -> Result<JackknifeOrder, CliError> {
    let thirds = JackknifeOrder::ThirdsAndHalf.min_periods(max_lag);
    let halves = JackknifeOrder::Half.min_periods(max_lag);
    if t >= thirds {
        Ok(JackknifeOrder::ThirdsAndHalf)
    } else if estimator == EstimatorKind::Toj {
        Err(hetpanel_core::Error::PanelTooShort { t, required: thirds }.into())
    } else if t >= halves {
        Ok(JackknifeOrder::Half)
    } else {
        Err(hetpanel_core::Error::PanelTooShort { t, required: halves }.into())
    }
}

fn dropped_ids(panel: &Panel, bundle: &JackknifeBundle) -> Vec<String> {
    panel
        .unit_ids()
        .iter()
        .zip(bundle.rho_usable())
        .filter(|(_, ok)| !**ok)
        .map(|(id, _)| id.clone())
        .collect()
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport, CliError> {
    let input = args
        .input
        .clone()
        .ok_or_else(|| CliError::Config("no input panel: set --input or `input`".into()))?;
    let specs = parse_stats(args.stats.as_deref().unwrap_or("all"))?;
    let estimator = parse_estimator(args.estimator.as_deref().unwrap_or("hpj"))?;
    let bootstrap_b = args.bootstrap_b.unwrap_or(DEFAULT_B);
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let level = args.level.unwrap_or(DEFAULT_LEVEL);
    check_level(level)?;
    let max_lag = args.max_lag.unwrap_or(DEFAULT_MAX_LAG);
    if max_lag == 0 {
        return Err(CliError::Config("max_lag must be at least 1".into()));
    }
    if let Some(s) = specs.iter().find(|s| s.max_lag() > max_lag) {
        return Err(CliError::Config(format!("statistic {s} needs max_lag >= {}", s.max_lag())));
    }

    let panel = read_long_csv(&input, &args.columns())?;
    let order = jackknife_order(panel.n_periods(), max_lag, estimator)?;
    let bundle = build_bundle(&panel, max_lag, order)?;

    let mut blocks = Vec::with_capacity(specs.len());
    if bootstrap_b > 0 {
        for (spec, result) in specs.iter().zip(bootstrap_all(&bundle, &specs, bootstrap_b, seed, level)?) {
            let r = result.map_err(|e| with_spec(spec, e))?;
            let block = |b: &hetpanel_core::BootstrapResult| EstimateBlock {
                estimate: b.point,
                ci_lower: Some(b.ci_lower),
                ci_upper: Some(b.ci_upper),
                missing_draws: Some(b.missing_draws),
                unreliable: b.unreliable,
            };
            blocks.push(assemble(
                *spec,
                estimator,
                &r.estimate,
                block(&r.ed),
                block(&r.hpj),
                r.toj.as_ref().map(block),
            ));
        }
    } else {
        for (spec, result) in specs.iter().zip(bundle.corrected_all(&specs)) {
            let r = result.map_err(|e| with_spec(spec, e))?;
            let block = |v: f64| EstimateBlock { estimate: v, ci_lower: None, ci_upper: None, missing_draws: None, unreliable: false };
            blocks.push(assemble(*spec, estimator, &r, block(r.ed), block(r.hpj), r.toj.map(block)));
        }
    }

    let times = panel.time_ids();
    let dropped_unit_ids = dropped_ids(&panel, &bundle);
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        command: "analyze".into(),
        metadata: AnalysisMetadata {
            input: input.display().to_string(),
            n: panel.n_units(),
            t: panel.n_periods(),
            first_period: time_label(&times[0]),
            last_period: time_label(&times[times.len() - 1]),
            max_lag,
            seed,
            bootstrap_b,
            level,
            estimator,
            jackknife: order,
            dropped_units: dropped_unit_ids.len(),
            dropped_unit_ids,
            toj_weights_note: toj_note(),
        },
        statistics: blocks,
    })
}

fn with_spec(spec: &StatisticSpec, e: hetpanel_core::Error) -> CliError {
    match CliError::from(e) {
        CliError::Numerical(m) => CliError::Numerical(format!("{spec}: {m}")),
        CliError::Input(m) => CliError::Input(format!("{spec}: {m}")),
        CliError::Config(m) => CliError::Config(format!("{spec}: {m}")),
        other => other,
    }
}

fn assemble(
    spec: StatisticSpec,
    estimator: EstimatorKind,
    est: &hetpanel_core::CorrectedEstimate,
    ed: EstimateBlock,
    hpj: EstimateBlock,
    toj: Option<EstimateBlock>,
) -> StatisticBlock {
    let mut flags = Vec::new();
    if !est.smooth {
        flags.push("non_smooth_functional".to_string());
    }
    if est.degenerate_units_dropped > 0 {
        flags.push("degenerate_units_dropped".to_string());
    }
    if toj.is_none() {
        flags.push("toj_unavailable".to_string());
    }
    if [Some(&ed), Some(&hpj), toj.as_ref()].into_iter().flatten().any(|b| b.unreliable) {
        flags.push("bootstrap_unreliable".to_string());
    }
    let headline = match estimator {
        EstimatorKind::Ed => &ed,
        EstimatorKind::Hpj => &hpj,
        EstimatorKind::Toj => toj.as_ref().expect("TOJ requested only with thirds"),
    };
    StatisticBlock {
        target: spec,
        estimator_kind: estimator,
        point: headline.estimate,
        ci_lower: headline.ci_lower,
        ci_upper: headline.ci_upper,
        n_units_used: est.n_units_used,
        degenerate_units_dropped: est.degenerate_units_dropped,
        ed,
        hpj,
        toj,
        flags,
    }
}

fn column_label(spec: &StatisticSpec) -> String {
    use hetpanel_core::QuantileLevel as Q;
    match spec {
        StatisticSpec::Mean(_) => "mean".into(),
        StatisticSpec::Std(_) => "std".into(),
        StatisticSpec::Quantile(_, Q::Q25) => "Q25".into(),
        StatisticSpec::Quantile(_, Q::Q50) => "Q50".into(),
        StatisticSpec::Quantile(_, Q::Q75) => "Q75".into(),
        StatisticSpec::Corr(a, b) => format!("{a} vs {b}"),
    }
}

fn group_title(spec: &StatisticSpec) -> String {
    match spec {
        StatisticSpec::Mean(q) | StatisticSpec::Std(q) | StatisticSpec::Quantile(q, _) => format!("Distribution of {q}"),
        StatisticSpec::Corr(..) => "Correlation structure".into(),
    }
}

fn fmt3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "NA".into()
    }
}

fn render_table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let ncol = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let _ = writeln!(out, "{title}");
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "  {c:<w$}", w = widths[0]);
            } else {
                let _ = write!(s, "  {c:>w$}", w = widths[i]);
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    for r in rows {
        debug_assert_eq!(r.len(), ncol);
        let _ = writeln!(out, "{}", line(r));
    }
}

/// Aligned text rendering: per quantity an estimate row and an interval row
/// for each estimator.
pub fn render_analysis(report: &AnalysisReport) -> String {
    let m = &report.metadata;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "N = {}, T = {} ({} to {}), max lag = {}, B = {}, seed = {}, level = {}",
        m.n, m.t, m.first_period, m.last_period, m.max_lag, m.bootstrap_b, m.seed, m.level
    );
    if m.dropped_units > 0 {
        let _ = writeln!(out, "{} unit(s) with a constant series left out of autocorrelation statistics", m.dropped_units);
    }

    let mut groups: Vec<(String, Vec<&StatisticBlock>)> = Vec::new();
    for b in &report.statistics {
        let title = group_title(&b.target);
        match groups.iter_mut().find(|(t, _)| *t == title) {
            Some((_, v)) => v.push(b),
            None => groups.push((title, vec![b])),
        }
    }
    let ci_label = format!("{}% CI", (m.level * 100.0 * 1e6).round() / 1e6);
    for (title, blocks) in groups {
        let _ = writeln!(out);
        let mut header = vec![String::new()];
        header.extend(blocks.iter().map(|b| column_label(&b.target)));
        let mut rows = Vec::new();
        for kind in EstimatorKind::ALL {
            if blocks.iter().all(|b| b.get(kind).is_none()) {
                continue;
            }
            let mut est = vec![kind.label().to_string()];
            let mut ci = vec![ci_label.clone()];
            for b in &blocks {
                match b.get(kind) {
                    Some(e) => {
                        est.push(fmt3(e.estimate));
                        ci.push(match (e.ci_lower, e.ci_upper) {
                            (Some(l), Some(u)) => format!("[{}, {}]", fmt3(l), fmt3(u)),
                            _ => String::new(),
                        });
                    }
                    None => {
                        est.push("NA".into());
                        ci.push(String::new());
                    }
                }
            }
            rows.push(est);
            if m.bootstrap_b > 0 {
                rows.push(ci);
            }
        }
        render_table(&mut out, &title, &header, &rows);
    }
    out
}
