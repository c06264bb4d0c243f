//! Monte Carlo study of the ED, HPJ and TOJ estimators under a heterogeneous
//! Gaussian AR(1) design.
//!
//! Unit parameters `(location, variance, persistence)` are trivariate normal
//! truncated to `variance > 0` and `|persistence| < 1`. Each unit starts from
//! its stationary law, so `mu_i = location`, `gamma_0i = variance` and
//! `rho_1i = persistence`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::bootstrap_all;
use crate::error::{Error, Result};
use crate::jackknife::{build_bundle, JackknifeOrder};
use crate::panel::{Panel, TimeId};
use crate::rng::{child_seed, stream, Domain};
use crate::stats::{EstimatorKind, Evaluator, StatisticSpec, UnitTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    /// Means of `(location, variance, persistence)`.
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
    pub n: usize,
    pub t: usize,
    pub replications: usize,
    pub seed: u64,
}

/// Standard deviations of `(location, variance, persistence)`.
pub const DEFAULT_SD: [f64; 3] = [1.0, 0.7, 0.2];

/// Pairwise correlations `(location-variance, location-persistence,
/// variance-persistence)`. This pairing reproduces the reference Monte Carlo
/// tables, including their population correlations of the unit parameters.
pub const DEFAULT_CORR: [f64; 3] = [0.2, 0.4, -0.3];

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            mean: [-1.0, 1.5, 0.4],
            cov: covariance(DEFAULT_SD, DEFAULT_CORR),
            n: 250,
            t: 12,
            replications: 1000,
            seed: 20_240_601,
        }
    }
}

/// Covariance matrix from standard deviations and the pairwise correlations
/// `(0-1, 0-2, 1-2)`.
pub fn covariance(sd: [f64; 3], corr: [f64; 3]) -> [[f64; 3]; 3] {
    let r = [[1.0, corr[0], corr[1]], [corr[0], 1.0, corr[2]], [corr[1], corr[2], 1.0]];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = r[i][j] * sd[i] * sd[j];
        }
    }
    cov
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("at least one replication required".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if self.t < 2 {
            return Err(Error::Config("T must be at least 2".into()));
        }
        if self.mean.iter().chain(self.cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite DGP parameter".into()));
        }
        cholesky3(&self.cov).map(|_| ())
    }
}

/// Lower Cholesky factor of a symmetric positive definite 3x3 matrix.
fn cholesky3(a: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    for i in 0..3 {
        for j in 0..i {
            let scale = a[i][j].abs().max(a[j][i].abs()).max(1.0);
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                return Err(Error::Config("covariance matrix is not symmetric".into()));
            }
        }
    }
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return Err(Error::Config("covariance matrix is not positive definite".into()));
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Parameters of one simulated unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    pub location: f64,
    pub variance: f64,
    pub persistence: f64,
}

/// Truncated trivariate normal law of the unit parameters.
#[derive(Debug, Clone)]
pub struct ParamLaw {
    mean: [f64; 3],
    chol: [[f64; 3]; 3],
    truncate: bool,
}

impl ParamLaw {
    pub fn new(config: &DgpConfig) -> Result<Self> {
        Ok(Self { mean: config.mean, chol: cholesky3(&config.cov)?, truncate: true })
    }

    /// The same normal law without the truncation.
    pub fn untruncated(config: &DgpConfig) -> Result<Self> {
        Ok(Self { truncate: false, ..Self::new(config)? })
    }

    fn draw_normal<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let z: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let mut x = self.mean;
        for i in 0..3 {
            for k in 0..=i {
                x[i] += self.chol[i][k] * z[k];
            }
        }
        x
    }

    /// Rejection sampling: whole vectors are redrawn until both constraints
    /// hold.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitParams {
        loop {
            let [location, variance, persistence] = self.draw_normal(rng);
            if !self.truncate || (variance > 0.0 && persistence.abs() < 1.0) {
                return UnitParams { location, variance, persistence };
            }
        }
    }
}

pub fn sample_unit_params<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<UnitParams> {
    Ok(ParamLaw::new(config)?.sample(rng))
}

/// One stationary AR(1) path of length `t`.
pub fn simulate_unit<R: Rng + ?Sized>(params: &UnitParams, t: usize, rng: &mut R) -> Vec<f64> {
    let UnitParams { location, variance, persistence: phi } = *params;
    let mut y = location + variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
    // u_0 is part of the design but never enters the path; drawn so the
    // stream layout matches the design.
    let _u0: f64 = rng.sample(StandardNormal);
    let scale = ((1.0 - phi * phi) * variance).sqrt();
    let drift = (1.0 - phi) * location;
    (0..t)
        .map(|_| {
            y = drift + phi * y + scale * rng.sample::<f64, _>(StandardNormal);
            y
        })
        .collect()
}

pub fn simulate_panel<R: Rng + ?Sized>(params: &[UnitParams], t: usize, rng: &mut R) -> Result<Panel> {
    if let Some(p) = params.iter().find(|p| !(p.variance > 0.0 && p.persistence.abs() < 1.0)) {
        return Err(Error::InvalidInput(format!("non-stationary unit parameters {p:?}")));
    }
    let rows = params.iter().map(|p| simulate_unit(p, t, rng)).collect();
    Panel::from_rows(rows)
}

/// Replication `rep` of the design: unit `i` takes its parameters and its
/// path from stream `(rep, i)`, so changing `N`, `T` or `R` leaves the other
/// streams alone.
pub fn simulate_replication(config: &DgpConfig, law: &ParamLaw, rep: usize) -> Result<(Vec<UnitParams>, Panel)> {
    let mut params = Vec::with_capacity(config.n);
    let mut rows = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let mut rng = stream(config.seed, Domain::UnitSimulation, rep as u64, i as u64);
        let p = law.sample(&mut rng);
        rows.push(simulate_unit(&p, config.t, &mut rng));
        params.push(p);
    }
    let unit_ids = (1..=config.n).map(|i| format!("unit{i:05}")).collect();
    let time_ids = (1..=config.t as i64).map(TimeId::Int).collect();
    Ok((params, Panel::new(unit_ids, time_ids, rows)?))
}

/// Population values of each statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueValues(pub Vec<(StatisticSpec, f64)>);

impl TrueValues {
    pub fn get(&self, spec: &StatisticSpec) -> Option<f64> {
        self.0.iter().find(|(s, _)| s == spec).map(|(_, v)| *v)
    }
}

const ORACLE_CHUNK: usize = 1 << 16;

/// Approximates the population value of every spec by evaluating it on
/// `draws` accepted parameter vectors, using `mu = location`,
/// `gamma_k = variance * persistence^k` and `rho_k = persistence^k`.
pub fn true_parameter_oracle(config: &DgpConfig, draws: usize, specs: &[StatisticSpec]) -> Result<TrueValues> {
    if draws < 2 {
        return Err(Error::Config("oracle needs at least two draws".into()));
    }
    let law = ParamLaw::new(config)?;
    let max_lag = specs.iter().map(StatisticSpec::max_lag).max().unwrap_or(0).max(1);
    let chunks = draws.div_ceil(ORACLE_CHUNK);
    let params: Vec<UnitParams> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let len = ORACLE_CHUNK.min(draws - c * ORACLE_CHUNK);
            let mut rng = stream(config.seed, Domain::TruthOracle, c as u64, 0);
            let law = &law;
            (0..len).map(move |_| law.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect();

    let mu = params.iter().map(|p| p.location).collect();
    let gamma = (0..=max_lag)
        .map(|k| params.iter().map(|p| p.variance * p.persistence.powi(k as i32)).collect())
        .collect();
    let rho = (1..=max_lag)
        .map(|k| params.iter().map(|p| p.persistence.powi(k as i32)).collect())
        .collect();
    drop(params);
    let table = UnitTable::from_columns(mu, gamma, rho, vec![false; draws])?;
    let ok = vec![true; draws];
    let mut eval = Evaluator::new(&table, &ok, None, &[]);
    let values = specs
        .iter()
        .map(|s| Ok((*s, eval.value(s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrueValues(values))
}

/// What to estimate in each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub specs: Vec<StatisticSpec>,
    pub estimators: Vec<EstimatorKind>,
    /// Bootstrap draws per replication; zero skips the coverage column.
    pub bootstrap_draws: usize,
    pub level: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            specs: StatisticSpec::standard_menu(),
            estimators: EstimatorKind::ALL.to_vec(),
            bootstrap_draws: 1000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub statistic: StatisticSpec,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub t: usize,
    pub true_value: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of replications whose interval contains the true value.
    pub cp: Option<f64>,
    pub replications: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn get(&self, spec: &StatisticSpec, estimator: EstimatorKind, n: usize, t: usize) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.statistic == *spec && r.estimator == estimator && r.n == n && r.t == t)
    }
}

/// Outcome of one statistic and estimator in one replication.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    error: f64,
    covered: Option<bool>,
}

type ReplicationOutcome = Vec<Option<Vec<Outcome>>>;

fn run_replication(
    config: &DgpConfig,
    law: &ParamLaw,
    options: &StudyOptions,
    truth: &[f64],
    order: JackknifeOrder,
    max_lag: usize,
    rep: usize,
) -> Result<ReplicationOutcome> {
    let (_, panel) = simulate_replication(config, law, rep)?;
    let bundle = build_bundle(&panel, max_lag, order)?;
    let specs = &options.specs;
    let per_spec: Vec<Option<Vec<Outcome>>> = if options.bootstrap_draws > 0 {
        let seed = child_seed(config.seed, Domain::ReplicationSeed, rep as u64);
        bootstrap_all(&bundle, specs, options.bootstrap_draws, seed, options.level)?
            .into_iter()
            .zip(truth)
            .map(|(r, &tv)| {
                let r = r.ok()?;
                options
                    .estimators
                    .iter()
                    .map(|&k| {
                        let ci = r.get(k)?;
                        Some(Outcome { error: ci.point - tv, covered: Some(ci.covers(tv)) })
                    })
                    .collect()
            })
            .collect()
    } else {
        bundle
            .corrected_all(specs)
            .into_iter()
            .zip(truth)
            .map(|(r, &tv)| {
                let r = r.ok()?;
                options
                    .estimators
                    .iter()
                    .map(|&k| Some(Outcome { error: r.get(k)? - tv, covered: None }))
                    .collect()
            })
            .collect()
    };
    Ok(per_spec)
}

/// Simulates `config.replications` panels and tabulates bias, RMSE and
/// bootstrap coverage for every spec and estimator.
///
/// Replications run in parallel; the reduction runs in replication order, so
/// the table does not depend on the number of threads.
pub fn run_study(config: &DgpConfig, options: &StudyOptions, truth: &TrueValues) -> Result<StudyTable> {
    config.validate()?;
    if options.specs.is_empty() || options.estimators.is_empty() {
        return Err(Error::Config("study needs at least one statistic and one estimator".into()));
    }
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::Config(format!("confidence level {} outside (0, 1)", options.level)));
    }
    let truth_vals = options
        .specs
        .iter()
        .map(|s| truth.get(s).ok_or_else(|| Error::Config(format!("no true value for {s}"))))
        .collect::<Result<Vec<f64>>>()?;
    let max_lag = options.specs.iter().map(StatisticSpec::max_lag).max().unwrap_or(0).max(1);
    let order = if options.estimators.contains(&EstimatorKind::Toj) {
        JackknifeOrder::ThirdsAndHalf
    } else {
        JackknifeOrder::Half
    };
    if config.t < order.min_periods(max_lag) {
        return Err(Error::PanelTooShort { t: config.t, required: order.min_periods(max_lag) });
    }
    let law = ParamLaw::new(config)?;

    let outcomes: Vec<Result<ReplicationOutcome>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, &law, options, &truth_vals, order, max_lag, rep))
        .collect();

    let n_est = options.estimators.len();
    let mut errors: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_est]; options.specs.len()];
    let mut covered = vec![vec![(0usize, 0usize); n_est]; options.specs.len()];
    for outcome in outcomes {
        // A failed replication (e.g. degenerate panel) counts against every cell.
        let Ok(outcome) = outcome else { continue };
        for (s, per_est) in outcome.into_iter().enumerate() {
            let Some(per_est) = per_est else { continue };
            for (e, o) in per_est.into_iter().enumerate() {
                errors[s][e].push(o.error);
                if let Some(c) = o.covered {
                    covered[s][e].0 += c as usize;
                    covered[s][e].1 += 1;
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(options.specs.len() * n_est);
    for (s, spec) in options.specs.iter().enumerate() {
        for (e, &estimator) in options.estimators.iter().enumerate() {
            let errs = &errors[s][e];
            let r = errs.len();
            let (bias, rmse) = if r == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let bias = errs.iter().sum::<f64>() / r as f64;
                let var = errs.iter().map(|x| (x - bias).powi(2)).sum::<f64>() / r as f64;
                (bias, (bias * bias + var).sqrt())
            };
            let (hits, total) = covered[s][e];
            rows.push(StudyRow {
                statistic: *spec,
                estimator,
                n: config.n,
                t: config.t,
                true_value: truth_vals[s],
                bias,
                rmse,
                cp: (total > 0).then(|| hits as f64 / total as f64),
                replications: r,
                failed: config.replications - r,
            });
        }
    }
    Ok(StudyTable { rows })
}

/// Runs [`run_study`] over several `(N, T)` cells sharing one law and seed.
pub fn run_grid(base: &DgpConfig, cells: &[(usize, usize)], options: &StudyOptions, truth: &TrueValues) -> Result<StudyTable> {
    let mut table = StudyTable::default();
    for &(n, t) in cells {
        let config = DgpConfig { n, t, ..base.clone() };
        table.rows.extend(run_study(&config, options, truth)?.rows);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::UnitStats;
    use crate::stats::Quantity;

    #[test]
    fn default_covariance_is_the_design() {
        let c = DgpConfig::default();
        assert!((c.cov[0][1] - 0.14).abs() < 1e-15);
        assert!((c.cov[0][2] - 0.08).abs() < 1e-15);
        assert!((c.cov[1][1] - 0.49).abs() < 1e-15);
        assert!((c.cov[1][2] + 0.042).abs() < 1e-15);
        assert!((c.cov[2][2] - 0.04).abs() < 1e-15);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn cholesky_reconstructs() {
        let c = DgpConfig::default();
        let l = cholesky3(&c.cov).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - c.cov[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_covariances() {
        let mut c = DgpConfig::default();
        c.cov[0][1] = 0.5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = DgpConfig::default();
        c.cov = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = DgpConfig { replications: 0, ..DgpConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn accepted_draws_satisfy_truncation() {
        let c = DgpConfig::default();
        let law = ParamLaw::new(&c).unwrap();
        let mut rng = stream(1, Domain::TruthOracle, 0, 0);
        for _ in 0..10_000 {
            let p = law.sample(&mut rng);
            assert!(p.variance > 0.0 && p.persistence.abs() < 1.0);
        }
    }

    #[test]
    fn untruncated_means_match_the_normal_law() {
        let c = DgpConfig::default();
        let law = ParamLaw::untruncated(&c).unwrap();
        let mut rng = stream(2, Domain::TruthOracle, 0, 0);
        let n = 400_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let p = law.sample(&mut rng);
            sums[0] += p.location;
            sums[1] += p.variance;
            sums[2] += p.persistence;
        }
        // 5 standard errors
        assert!((sums[0] / n as f64 + 1.0).abs() < 5.0 / (n as f64).sqrt());
        assert!((sums[1] / n as f64 - 1.5).abs() < 5.0 * 0.7 / (n as f64).sqrt());
        assert!((sums[2] / n as f64 - 0.4).abs() < 5.0 * 0.2 / (n as f64).sqrt());
    }

    #[test]
    fn white_noise_unit_has_no_autocorrelation() {
        let p = UnitParams { location: 0.0, variance: 2.0, persistence: 0.0 };
        let mut rng = stream(3, Domain::UnitSimulation, 0, 0);
        let y = simulate_unit(&p, 200_000, &mut rng);
        let s = UnitStats::from_series(&y, 1).unwrap();
        assert!(s.rho[0].abs() < 0.01);
        assert!((s.gamma[0] - 2.0).abs() < 0.03);
    }

    #[test]
    fn long_ar1_path_has_stationary_moments() {
        let p = UnitParams { location: 0.0, variance: 2.0, persistence: 0.5 };
        let mut rng = stream(4, Domain::UnitSimulation, 0, 0);
        let y = simulate_unit(&p, 1_000_000, &mut rng);
        let s = UnitStats::from_series(&y, 1).unwrap();
        assert!((s.gamma[0] - 2.0).abs() < 0.02);
        assert!((s.rho[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn replications_are_reproducible_and_nested_in_n() {
        let c = DgpConfig { n: 20, t: 12, ..DgpConfig::default() };
        let law = ParamLaw::new(&c).unwrap();
        let (p1, a) = simulate_replication(&c, &law, 3).unwrap();
        let (p2, b) = simulate_replication(&c, &law, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(p1, p2);
        let bigger = DgpConfig { n: 30, ..c.clone() };
        let (_, big) = simulate_replication(&bigger, &law, 3).unwrap();
        assert_eq!(big.unit(7), a.unit(7));
        let (_, other) = simulate_replication(&c, &law, 4).unwrap();
        assert_ne!(other.unit(0), a.unit(0));
    }

    #[test]
    fn simulate_panel_rejects_nonstationary_units() {
        let p = [UnitParams { location: 0.0, variance: 1.0, persistence: 1.0 }];
        let mut rng = stream(5, Domain::UnitSimulation, 0, 0);
        assert!(simulate_panel(&p, 10, &mut rng).is_err());
    }

    #[test]
    fn oracle_is_deterministic() {
        let c = DgpConfig::default();
        let specs = [StatisticSpec::Mean(Quantity::Mu), StatisticSpec::Quantile(Quantity::Rho(1), crate::stats::QuantileLevel::Q50)];
        let a = true_parameter_oracle(&c, 100_000, &specs).unwrap();
        let b = true_parameter_oracle(&c, 100_000, &specs).unwrap();
        assert_eq!(a, b);
        assert!((a.get(&specs[0]).unwrap() + 0.993).abs() < 0.02);
    }

    #[test]
    fn smoke_study_table_shape() {
        let c = DgpConfig { n: 30, t: 12, replications: 1, ..DgpConfig::default() };
        let options = StudyOptions { bootstrap_draws: 20, ..StudyOptions::default() };
        let truth = true_parameter_oracle(&c, 10_000, &options.specs).unwrap();
        let table = run_study(&c, &options, &truth).unwrap();
        assert_eq!(table.rows.len(), 18 * 3);
        for r in &table.rows {
            assert!(r.rmse >= r.bias.abs());
            let cp = r.cp.unwrap();
            assert!(cp == 0.0 || cp == 1.0);
            assert_eq!(r.replications + r.failed, 1);
        }
    }
}
