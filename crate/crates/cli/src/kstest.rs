//! `hetpanel kstest`: two-sample KS test on the per-unit estimates of two
//! independent panels.

use std::path::Path;
use std::str::FromStr;

use hetpanel_core::{compute_unit_stats, ks_two_sample, Quantity};
use serde::{Deserialize, Serialize};

use crate::args::KsArgs;
use crate::error::CliError;
use crate::io::{read_long_csv, ColumnMap};
use crate::json::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub input: String,
    pub n_units: usize,
    #[serde(rename = "T")]
    pub t: usize,
    /// Units entering the test (constant series are left out for `rho`).
    pub units_used: usize,
    pub degenerate_units_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub schema_version: u32,
    pub command: String,
    pub quantity: String,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    /// `sqrt(n1 n2 / (n1 + n2)) * sup_a |F1(a) - F2(a)|`.
    pub statistic: f64,
    pub sup_distance: f64,
    pub p_value: f64,
}

/// `mu`, `gamma`/`rho` combined with `lag`, or a full name such as `rho2`.
pub fn parse_quantity(name: &str, lag: usize) -> Result<Quantity, CliError> {
    let q = match name.trim() {
        "mu" => Quantity::Mu,
        "gamma" => Quantity::Gamma(lag),
        "rho" => Quantity::Rho(lag),
        other => Quantity::from_str(other).map_err(|e| CliError::Config(e.to_string()))?,
    };
    if q == Quantity::Rho(0) {
        return Err(CliError::Config("rho needs a lag of at least 1".into()));
    }
    Ok(q)
}

fn group_values(path: &Path, columns: &ColumnMap, q: Quantity) -> Result<(Vec<f64>, GroupSummary), CliError> {
    let panel = read_long_csv(path, columns)?;
    let stats = compute_unit_stats(&panel, q.lag())?;
    let mut dropped = 0;
    let mut values = Vec::with_capacity(stats.len());
    for s in &stats {
        match q {
            Quantity::Mu => values.push(s.mu),
            Quantity::Gamma(k) => values.push(s.gamma[k]),
            Quantity::Rho(_) if s.degenerate => dropped += 1,
            Quantity::Rho(k) => values.push(s.rho[k - 1]),
        }
    }
    if values.is_empty() {
        return Err(hetpanel_core::Error::InsufficientUnits { needed: 1, available: 0 }.into());
    }
    let summary = GroupSummary {
        input: path.display().to_string(),
        n_units: panel.n_units(),
        t: panel.n_periods(),
        units_used: values.len(),
        degenerate_units_dropped: dropped,
    };
    Ok((values, summary))
}

pub fn cmd_kstest(args: &KsArgs) -> Result<KsReport, CliError> {
    let a = args.group_a.clone().ok_or_else(|| CliError::Config("set --group-a or `group_a`".into()))?;
    let b = args.group_b.clone().ok_or_else(|| CliError::Config("set --group-b or `group_b`".into()))?;
    let q = parse_quantity(args.quantity.as_deref().unwrap_or("rho"), args.lag.unwrap_or(1))?;
    let columns = args.columns();
    let (va, group_a) = group_values(&a, &columns, q)?;
    let (vb, group_b) = group_values(&b, &columns, q)?;
    let ks = ks_two_sample(&va, &vb)?;
    Ok(KsReport {
        schema_version: SCHEMA_VERSION,
        command: "kstest".into(),
        quantity: q.to_string(),
        group_a,
        group_b,
        statistic: ks.statistic,
        sup_distance: ks.raw_sup,
        p_value: ks.p_value,
    })
}

pub fn render_ks(r: &KsReport) -> String {
    format!(
        "two-sample KS test on {}: sup distance = {:.3}, KS2 = {:.3}, p-value = {:.3} (N1 = {}, N2 = {})\n",
        r.quantity, r.sup_distance, r.statistic, r.p_value, r.group_a.units_used, r.group_b.units_used
    )
}
