//! Cross-sectional bootstrap.
//!
//! Units are resampled with replacement as whole tuples (full-panel and every
//! subpanel estimate together), so the time dimension is never touched and
//! the HPJ/TOJ corrections are recomputed inside each draw. Intervals are
//! `[S - q_high, S - q_low]` where `q` are quantiles of `S*(b) - S`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::sample_quantile;
use crate::error::{Error, Result};
use crate::jackknife::{CorrectedEstimate, JackknifeBundle, JackknifeOrder};
use crate::rng::{stream, Domain};
use crate::stats::{EstimatorKind, StatisticSpec};

/// Share of failed draws above which a result is flagged unreliable.
pub const MAX_MISSING_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap draws `B`.
    pub draws: usize,
    pub seed: u64,
    pub level: f64,
    pub target: EstimatorKind,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { draws: 1000, seed: 0, level: 0.95, target: EstimatorKind::Hpj }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::Config("bootstrap needs at least one draw".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub estimator_kind: EstimatorKind,
    pub point: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    /// Quantiles of `S*(b) - S` at `(1 - level) / 2` and `(1 + level) / 2`.
    pub q_low: f64,
    pub q_high: f64,
    /// `S*(b)` per draw; NaN where the statistic could not be computed.
    #[serde(skip)]
    pub draws: Vec<f64>,
    pub missing_draws: usize,
    pub unreliable: bool,
}

impl BootstrapResult {
    /// `S*(b) - S` for the successful draws.
    pub fn centered(&self) -> impl Iterator<Item = f64> + '_ {
        self.draws.iter().filter(|d| !d.is_nan()).map(move |d| d - self.point)
    }

    /// Mean of `S*(b) - S`.
    pub fn bias_estimate(&self) -> f64 {
        let (sum, n) = self.centered().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        sum / n as f64
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }

    /// Percentile interval from the same draws at a different level.
    pub fn at_level(&self, level: f64) -> Result<BootstrapResult> {
        interval(self.estimator_kind, self.point, self.draws.clone(), level)
    }
}

/// Draws `n` unit indices uniformly with replacement.
pub fn draw_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resamples whole unit tuples with replacement.
pub fn resample_units<R: Rng + ?Sized>(bundle: &JackknifeBundle, rng: &mut R) -> JackknifeBundle {
    let indices = draw_indices(bundle.n_units(), rng);
    bundle.select_units(&indices)
}

/// Index stream of draw `b`; a pure function of `(seed, b)`.
pub fn draw_rng(seed: u64, b: usize) -> rand_chacha::ChaCha8Rng {
    stream(seed, Domain::Bootstrap, b as u64, 0)
}

fn draw_counts(n: usize, seed: u64, b: usize) -> Vec<u32> {
    let mut rng = draw_rng(seed, b);
    let mut counts = vec![0u32; n];
    for i in draw_indices(n, &mut rng) {
        counts[i] += 1;
    }
    counts
}

fn interval(kind: EstimatorKind, point: f64, draws: Vec<f64>, level: f64) -> Result<BootstrapResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let centered: Vec<f64> = draws.iter().filter(|d| !d.is_nan()).map(|d| d - point).collect();
    let missing = draws.len() - centered.len();
    if centered.is_empty() {
        return Err(Error::DegenerateVariance(format!(
            "all {} bootstrap draws failed",
            draws.len()
        )));
    }
    let q_low = sample_quantile(&centered, (1.0 - level) / 2.0)?;
    let q_high = sample_quantile(&centered, (1.0 + level) / 2.0)?;
    Ok(BootstrapResult {
        estimator_kind: kind,
        point,
        ci_lower: point - q_high,
        ci_upper: point - q_low,
        level,
        q_low,
        q_high,
        unreliable: missing as f64 > MAX_MISSING_SHARE * draws.len() as f64,
        missing_draws: missing,
        draws,
    })
}

/// Point estimates and bootstrap intervals for every estimator kind of one
/// statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecBootstrap {
    pub estimate: CorrectedEstimate,
    pub ed: BootstrapResult,
    pub hpj: BootstrapResult,
    pub toj: Option<BootstrapResult>,
}

impl SpecBootstrap {
    pub fn get(&self, kind: EstimatorKind) -> Option<&BootstrapResult> {
        match kind {
            EstimatorKind::Ed => Some(&self.ed),
            EstimatorKind::Hpj => Some(&self.hpj),
            EstimatorKind::Toj => self.toj.as_ref(),
        }
    }
}

/// Runs one bootstrap for all `specs` at once: every draw resamples the
/// units once and recomputes ED, HPJ and TOJ for each statistic.
///
/// Draw `b` depends only on `(seed, b)`, so the output is identical for any
/// number of worker threads.
pub fn bootstrap_all(
    bundle: &JackknifeBundle,
    specs: &[StatisticSpec],
    draws: usize,
    seed: u64,
    level: f64,
) -> Result<Vec<Result<SpecBootstrap>>> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no statistics requested".into()));
    }
    if draws == 0 {
        return Err(Error::Config("bootstrap needs at least one draw".into()));
    }
    let points = bundle.corrected_all(specs);
    let orders = bundle.orders(specs)?;
    let n = bundle.n_units();
    let has_toj = bundle.order() == JackknifeOrder::ThirdsAndHalf;

    // per draw, per spec: [ed, hpj, toj]
    let per_draw: Vec<Vec<[f64; 3]>> = (0..draws)
        .into_par_iter()
        .map(|b| {
            let counts = draw_counts(n, seed, b);
            bundle
                .evaluate(specs, Some(&counts), Some(&orders))
                .into_iter()
                .map(|r| match r {
                    Ok(c) => [c.ed, c.hpj, c.toj.unwrap_or(f64::NAN)],
                    Err(_) => [f64::NAN; 3],
                })
                .collect()
        })
        .collect();

    let out = points
        .into_iter()
        .enumerate()
        .map(|(s, point)| {
            let estimate = point?;
            let column = |k: usize| per_draw.iter().map(|d| d[s][k]).collect::<Vec<f64>>();
            let ed = interval(EstimatorKind::Ed, estimate.ed, column(0), level)?;
            let hpj = interval(EstimatorKind::Hpj, estimate.hpj, column(1), level)?;
            let toj = match (has_toj, estimate.toj) {
                (true, Some(p)) => Some(interval(EstimatorKind::Toj, p, column(2), level)?),
                _ => None,
            };
            Ok(SpecBootstrap { estimate, ed, hpj, toj })
        })
        .collect();
    Ok(out)
}

/// Bootstrap interval for one statistic, centered on `config.target`.
pub fn bootstrap_statistic(
    bundle: &JackknifeBundle,
    spec: &StatisticSpec,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    config.validate()?;
    if config.target == EstimatorKind::Toj && bundle.order() != JackknifeOrder::ThirdsAndHalf {
        return Err(Error::InvalidInput("TOJ bootstrap needs third-panel estimates".into()));
    }
    let mut all = bootstrap_all(bundle, std::slice::from_ref(spec), config.draws, config.seed, config.level)?;
    let result = all.pop().expect("one spec")?;
    Ok(match config.target {
        EstimatorKind::Ed => result.ed,
        EstimatorKind::Hpj => result.hpj,
        EstimatorKind::Toj => result.toj.expect("thirds present"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jackknife::build_bundle;
    use crate::panel::Panel;
    use crate::stats::Quantity;

    fn noisy_panel(n: usize, t: usize) -> Panel {
        let mut rng = stream(99, Domain::UnitSimulation, 0, 0);
        let rows = (0..n)
            .map(|i| (0..t).map(|_| i as f64 * 0.1 + rng.random::<f64>()).collect())
            .collect();
        Panel::from_rows(rows).unwrap()
    }

    #[test]
    fn resampling_keeps_tuples_together() {
        let b = build_bundle(&noisy_panel(3, 12), 1, JackknifeOrder::ThirdsAndHalf).unwrap();
        let r = b.select_units(&[2, 2, 0]);
        let mu = |t: &crate::stats::UnitTable| t.column(Quantity::Mu).unwrap().to_vec();
        for (orig, res) in std::iter::once((b.full(), r.full()))
            .chain(b.halves().iter().zip(r.halves()))
            .chain(b.thirds().iter().zip(r.thirds()))
        {
            let (o, s) = (mu(orig), mu(res));
            assert_eq!(s, vec![o[2], o[2], o[0]]);
        }
    }

    #[test]
    fn index_stream_is_deterministic() {
        let a = draw_indices(50, &mut draw_rng(5, 17));
        let b = draw_indices(50, &mut draw_rng(5, 17));
        assert_eq!(a, b);
        assert_ne!(a, draw_indices(50, &mut draw_rng(5, 18)));
        assert!(a.iter().all(|&i| i < 50));
    }

    #[test]
    fn identical_units_give_zero_width_interval() {
        let row: Vec<f64> = vec![0.3, 1.2, -0.5, 0.8, 2.0, -1.1, 0.4, 0.9, 1.5, -0.2, 0.0, 0.6];
        let p = Panel::from_rows(vec![row; 6]).unwrap();
        let b = build_bundle(&p, 1, JackknifeOrder::ThirdsAndHalf).unwrap();
        let r = resample_units(&b, &mut draw_rng(1, 0));
        assert_eq!(r.full(), b.full());
        for spec in [StatisticSpec::Mean(Quantity::Rho(1)), StatisticSpec::Quantile(Quantity::Mu, crate::stats::QuantileLevel::Q50)] {
            for target in EstimatorKind::ALL {
                let cfg = BootstrapConfig { draws: 50, seed: 3, level: 0.9, target };
                let res = bootstrap_statistic(&b, &spec, &cfg).unwrap();
                assert!(res.draws.iter().all(|d| (d - res.point).abs() < 1e-12));
                assert!((res.ci_lower - res.point).abs() < 1e-12);
                assert!((res.ci_upper - res.point).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interval_identities_and_monotone_levels() {
        let b = build_bundle(&noisy_panel(40, 12), 1, JackknifeOrder::ThirdsAndHalf).unwrap();
        let spec = StatisticSpec::Std(Quantity::Gamma(0));
        let cfg = BootstrapConfig { draws: 400, seed: 11, level: 0.8, target: EstimatorKind::Toj };
        let r = bootstrap_statistic(&b, &spec, &cfg).unwrap();
        assert_eq!(r.draws.len(), 400);
        assert_eq!(r.ci_lower, r.point - r.q_high);
        assert_eq!(r.ci_upper, r.point - r.q_low);
        assert!(r.ci_lower <= r.ci_upper);
        let mut prev = (r.ci_lower, r.ci_upper);
        for level in [0.85, 0.9, 0.95, 0.99] {
            let w = r.at_level(level).unwrap();
            assert!(w.ci_lower <= prev.0 && w.ci_upper >= prev.1);
            prev = (w.ci_lower, w.ci_upper);
        }
    }

    #[test]
    fn weighted_draws_match_materialized_resamples() {
        let b = build_bundle(&noisy_panel(25, 13), 1, JackknifeOrder::ThirdsAndHalf).unwrap();
        let specs = StatisticSpec::standard_menu();
        let all = bootstrap_all(&b, &specs, 20, 8, 0.95).unwrap();
        for draw in 0..20 {
            let resampled = resample_units(&b, &mut draw_rng(8, draw));
            let direct = resampled.corrected_all(&specs);
            for (s, d) in all.iter().zip(direct) {
                let (s, d) = (s.as_ref().unwrap(), d.unwrap());
                assert!((s.ed.draws[draw] - d.ed).abs() < 1e-12);
                assert!((s.hpj.draws[draw] - d.hpj).abs() < 1e-12);
                assert!((s.toj.as_ref().unwrap().draws[draw] - d.toj.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn failed_draws_are_counted() {
        // Two distinct units: some draws pick one unit twice and the
        // correlation has zero variance.
        let rows = vec![
            vec![0.1, 0.5, -0.3, 0.8, 0.2, 1.0, -0.4, 0.3],
            vec![2.1, 1.5, 2.3, 1.8, 2.9, 1.7, 2.4, 2.0],
        ];
        let b = build_bundle(&Panel::from_rows(rows).unwrap(), 1, JackknifeOrder::Half).unwrap();
        let spec = StatisticSpec::Corr(Quantity::Mu, Quantity::Gamma(0));
        let cfg = BootstrapConfig { draws: 64, seed: 2, level: 0.95, target: EstimatorKind::Hpj };
        let r = bootstrap_statistic(&b, &spec, &cfg).unwrap();
        assert!(r.missing_draws > 0);
        assert!(r.unreliable);
        assert_eq!(r.draws.iter().filter(|d| d.is_nan()).count(), r.missing_draws);
    }

    #[test]
    fn config_validation() {
        let b = build_bundle(&noisy_panel(5, 8), 1, JackknifeOrder::Half).unwrap();
        let spec = StatisticSpec::Mean(Quantity::Mu);
        let bad = |cfg: BootstrapConfig| bootstrap_statistic(&b, &spec, &cfg).is_err();
        let base = BootstrapConfig::default();
        assert!(bad(BootstrapConfig { draws: 0, ..base }));
        assert!(bad(BootstrapConfig { level: 1.0, ..base }));
        assert!(bad(BootstrapConfig { target: EstimatorKind::Toj, ..base }));
        assert!(!bad(BootstrapConfig { draws: 10, ..base }));
    }
}
