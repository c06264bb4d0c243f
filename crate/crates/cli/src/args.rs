//! Command-line flags and their configuration-file twins.
//!
//! Every flag is optional at parse time. A `--config` file is a flat TOML
//! table whose keys are the flag names with `_` for `-`; a flag given on the
//! command line overrides the file, and the command applies its defaults
//! last.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;
use crate::io::ColumnMap;

#[derive(Debug, Parser)]
#[command(name = "hetpanel", version, about = "Distributions of heterogeneous dynamics in balanced panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the cross-sectional distribution of unit means,
    /// autocovariances and autocorrelations with ED/HPJ/TOJ and bootstrap CIs.
    Analyze(AnalyzeArgs),
    /// Two-sample KS test between the unit estimates of two panels.
    Kstest(KsArgs),
    /// Monte Carlo study of bias, RMSE and coverage.
    Simulate(SimulateArgs),
    /// Write one simulated panel in long CSV format.
    SimulatePanel(SimulatePanelArgs),
}

fn column_map(unit: &Option<String>, time: &Option<String>, value: &Option<String>) -> ColumnMap {
    let d = ColumnMap::default();
    ColumnMap {
        unit: unit.clone().unwrap_or(d.unit),
        time: time.clone().unwrap_or(d.time),
        value: value.clone().unwrap_or(d.value),
    }
}

/// Fills every `None` field of `self` from `file`.
macro_rules! merge_fields {
    ($self:ident, $file:ident; $($field:ident),+ $(,)?) => {
        $( if $self.$field.is_none() { $self.$field = $file.$field; } )+
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Flat TOML file with defaults for any of these flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Long-format CSV panel (unit, time, value)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Column holding the unit identifier [default: unit]
    #[arg(long)]
    pub unit_col: Option<String>,
    /// Column holding the period identifier [default: time]
    #[arg(long)]
    pub time_col: Option<String>,
    /// Column holding the observation [default: value]
    #[arg(long)]
    pub value_col: Option<String>,
    /// Comma-separated statistics (e.g. mu_mean,rho1_q50,corr_mu_rho1) or `all` [default: all]
    #[arg(long)]
    pub stats: Option<String>,
    /// Estimator the headline CI is centered on: ed, hpj or toj [default: hpj]
    #[arg(long)]
    pub estimator: Option<String>,
    /// Bootstrap draws; 0 skips the intervals [default: 1000]
    #[arg(long)]
    pub bootstrap_b: Option<usize>,
    /// Bootstrap seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confidence level [default: 0.95]
    #[arg(long)]
    pub level: Option<f64>,
    /// Largest autocovariance lag estimated per unit [default: 1]
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Write the JSON report here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl AnalyzeArgs {
    pub fn columns(&self) -> ColumnMap {
        column_map(&self.unit_col, &self.time_col, &self.value_col)
    }

    fn merge(&mut self, file: Self) {
        merge_fields!(self, file; input, unit_col, time_col, value_col, stats, estimator, bootstrap_b, seed, level, max_lag, out);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// First group's long-format CSV panel
    #[arg(long)]
    pub group_a: Option<PathBuf>,
    /// Second group's long-format CSV panel
    #[arg(long)]
    pub group_b: Option<PathBuf>,
    /// Column holding the unit identifier [default: unit]
    #[arg(long)]
    pub unit_col: Option<String>,
    /// Column holding the period identifier [default: time]
    #[arg(long)]
    pub time_col: Option<String>,
    /// Column holding the observation [default: value]
    #[arg(long)]
    pub value_col: Option<String>,
    /// Unit quantity compared across groups: mu, gamma or rho [default: rho]
    #[arg(long)]
    pub quantity: Option<String>,
    /// Lag of gamma or rho [default: 1]
    #[arg(long)]
    pub lag: Option<usize>,
    /// Write the JSON result here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl KsArgs {
    pub fn columns(&self) -> ColumnMap {
        column_map(&self.unit_col, &self.time_col, &self.value_col)
    }

    fn merge(&mut self, file: Self) {
        merge_fields!(self, file; group_a, group_b, unit_col, time_col, value_col, quantity, lag, out);
    }
}

/// One value or a list, for the grid axes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn parse_list(s: &str) -> Result<OneOrMany, String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OneOrMany::Many(v))
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Study configuration (flat TOML)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Cross-section sizes, comma-separated [default: 250]
    #[arg(long, value_parser = parse_list)]
    pub n: Option<OneOrMany>,
    /// Panel lengths, comma-separated [default: 12]
    #[arg(long, value_parser = parse_list)]
    pub t: Option<OneOrMany>,
    /// Replications per (N, T) cell [default: 1000]
    #[arg(long)]
    pub replications: Option<usize>,
    /// Master seed [default: 20240601]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap draws per replication; 0 skips coverage [default: 1000]
    #[arg(long)]
    pub bootstrap_b: Option<usize>,
    /// Confidence level of the coverage intervals [default: 0.95]
    #[arg(long)]
    pub level: Option<f64>,
    /// Statistics, as for `analyze` [default: all]
    #[arg(long)]
    pub stats: Option<String>,
    /// Comma-separated estimators among ed, hpj, toj [default: ed,hpj,toj]
    #[arg(long)]
    pub estimator: Option<String>,
    /// Parameter draws used to approximate the true values [default: 10000000]
    #[arg(long)]
    pub oracle_draws: Option<usize>,
    /// Output prefix; writes PREFIX.csv and PREFIX.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Means of (location, variance, persistence)
    #[arg(skip)]
    pub mean: Option<[f64; 3]>,
    /// Standard deviations of (location, variance, persistence)
    #[arg(skip)]
    pub sd: Option<[f64; 3]>,
    /// Correlations (location-variance, location-persistence, variance-persistence)
    #[arg(skip)]
    pub corr: Option<[f64; 3]>,
    /// Full covariance matrix; overrides `sd` and `corr`
    #[arg(skip)]
    pub cov: Option<[[f64; 3]; 3]>,
}

impl SimulateArgs {
    fn merge(&mut self, file: Self) {
        merge_fields!(self, file; n, t, replications, seed, bootstrap_b, level, stats, estimator, oracle_draws, out, mean, sd, corr, cov);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatePanelArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Units [default: 250]
    #[arg(long)]
    pub n: Option<usize>,
    /// Periods [default: 12]
    #[arg(long)]
    pub t: Option<usize>,
    /// Seed [default: 20240601]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replication index within the seed's design [default: 0]
    #[arg(long)]
    pub replication: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub mean: Option<[f64; 3]>,
    #[arg(skip)]
    pub sd: Option<[f64; 3]>,
    #[arg(skip)]
    pub corr: Option<[f64; 3]>,
    #[arg(skip)]
    pub cov: Option<[[f64; 3]; 3]>,
}

impl SimulatePanelArgs {
    fn merge(&mut self, file: Self) {
        merge_fields!(self, file; n, t, seed, replication, out, mean, sd, corr, cov);
    }
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Resolves the `--config` file, if any, beneath the command-line flags.
pub trait WithConfig: Sized {
    fn resolve(self) -> Result<Self, CliError>;
}

macro_rules! impl_with_config {
    ($($ty:ty),+) => {$(
        impl WithConfig for $ty {
            fn resolve(mut self) -> Result<Self, CliError> {
                if let Some(path) = self.config.clone() {
                    let file: Self = load(&path)?;
                    self.merge(file);
                }
                Ok(self)
            }
        }
    )+};
}

impl_with_config!(AnalyzeArgs, KsArgs, SimulateArgs, SimulatePanelArgs);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.toml");
        std::fs::write(&path, "input = \"from_file.csv\"\nseed = 9\nlevel = 0.9\nunit_col = \"city\"\n").unwrap();
        let cli = Cli::try_parse_from(["hetpanel", "analyze", "--config", path.to_str().unwrap(), "--seed", "3"]).unwrap();
        let Command::Analyze(args) = cli.command else { panic!() };
        let args = args.resolve().unwrap();
        assert_eq!(args.seed, Some(3));
        assert_eq!(args.level, Some(0.9));
        assert_eq!(args.input, Some(PathBuf::from("from_file.csv")));
        assert_eq!(args.unit_col.as_deref(), Some("city"));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.toml");
        std::fs::write(&path, "sed = 9\n").unwrap();
        let args = AnalyzeArgs { config: Some(path), ..Default::default() };
        assert!(matches!(args.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_axes_accept_scalars_and_lists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "n = 250\nt = [12, 24]\ncorr = [0.2, -0.3, 0.4]\n").unwrap();
        let args = SimulateArgs { config: Some(path), ..Default::default() }.resolve().unwrap();
        assert_eq!(args.n.unwrap().values(), vec![250]);
        assert_eq!(args.t.unwrap().values(), vec![12, 24]);
        assert_eq!(args.corr, Some([0.2, -0.3, 0.4]));
        let cli = Cli::try_parse_from(["hetpanel", "simulate", "--n", "250,1000"]).unwrap();
        let Command::Simulate(args) = cli.command else { panic!() };
        assert_eq!(args.n.unwrap().values(), vec![250, 1000]);
    }
}
