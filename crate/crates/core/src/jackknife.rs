//! Split-panel jackknife bias correction.
//!
//! The half-panel jackknife (HPJ) removes the `O(1/T)` incidental parameter
//! bias: `2 S - mean(S_half)`. The third-order jackknife (TOJ) also removes
//! the `O(1/T^2)` term with weights `(3, -3, 1)` on the full panel, the half
//! panels and the third panels, which solve
//! `a + b + c = 1, a + 2b + 3c = 0, a + 4b + 9c = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, SplitKind, SplitScheme, UnitStats};
use crate::stats::{column_orders, ColumnOrder, EstimatorKind, Evaluator, StatisticSpec, UnitTable};

/// TOJ weights on (full, half-panel average, third-panel average).
pub const TOJ_WEIGHTS: [f64; 3] = [3.0, -3.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JackknifeOrder {
    Half,
    ThirdsAndHalf,
}

impl JackknifeOrder {
    /// Shortest panel for which every subpanel keeps `max_lag + 2` periods.
    pub fn min_periods(self, max_lag: usize) -> usize {
        let per_segment = max_lag + 2;
        match self {
            JackknifeOrder::Half => (2 * per_segment).max(SplitKind::Half.min_periods()),
            JackknifeOrder::ThirdsAndHalf => (3 * per_segment).max(SplitKind::Thirds.min_periods()),
        }
    }
}

/// Per-unit estimates on the full panel and on every subpanel, with the
/// units in the same order in every group.
#[derive(Debug, Clone)]
pub struct JackknifeBundle {
    full: UnitTable,
    halves: Vec<UnitTable>,
    thirds: Vec<UnitTable>,
    half_scheme: SplitScheme,
    third_scheme: Option<SplitScheme>,
    rho_ok: Vec<bool>,
}

fn table_for(panel: &Panel, range: std::ops::Range<usize>, max_lag: usize) -> Result<UnitTable> {
    let stats: Vec<UnitStats> = panel
        .units()
        .map(|u| UnitStats::from_series(&u[range.clone()], max_lag))
        .collect::<Result<_>>()?;
    UnitTable::from_stats(&stats)
}

/// Estimates every unit on the full panel and on the subpanels of `order`.
pub fn build_bundle(panel: &Panel, max_lag: usize, order: JackknifeOrder) -> Result<JackknifeBundle> {
    let t = panel.n_periods();
    let required = order.min_periods(max_lag);
    if t < required {
        return Err(Error::PanelTooShort { t, required });
    }
    let half_scheme = SplitScheme::new(t, SplitKind::Half)?;
    let third_scheme = match order {
        JackknifeOrder::Half => None,
        JackknifeOrder::ThirdsAndHalf => Some(SplitScheme::new(t, SplitKind::Thirds)?),
    };
    let full = table_for(panel, 0..t, max_lag)?;
    let halves = half_scheme
        .segments()
        .map(|s| table_for(panel, s.range(), max_lag))
        .collect::<Result<Vec<_>>>()?;
    let thirds = match &third_scheme {
        Some(scheme) => scheme
            .segments()
            .map(|s| table_for(panel, s.range(), max_lag))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let rho_ok = (0..panel.n_units())
        .map(|i| {
            std::iter::once(&full)
                .chain(&halves)
                .chain(&thirds)
                .all(|g| !g.degenerate()[i])
        })
        .collect();
    Ok(JackknifeBundle { full, halves, thirds, half_scheme, third_scheme, rho_ok })
}

/// `2 ed - mean(halves)`; two half-panel estimates for even `T`, four for odd.
pub fn hpj(ed: f64, half_estimates: &[f64]) -> Result<f64> {
    if !matches!(half_estimates.len(), 2 | 4) {
        return Err(Error::InvalidInput(format!(
            "HPJ needs 2 or 4 half-panel estimates, got {}",
            half_estimates.len()
        )));
    }
    Ok(2.0 * ed - mean(half_estimates))
}

/// `3 ed - 3 mean(halves) + mean(thirds)`; three third-panel estimates, or
/// nine when `T` is not a multiple of 3.
pub fn toj(ed: f64, half_estimates: &[f64], third_estimates: &[f64]) -> Result<f64> {
    if !matches!(half_estimates.len(), 2 | 4) {
        return Err(Error::InvalidInput(format!(
            "TOJ needs 2 or 4 half-panel estimates, got {}",
            half_estimates.len()
        )));
    }
    if !matches!(third_estimates.len(), 3 | 9) {
        return Err(Error::InvalidInput(format!(
            "TOJ needs 3 or 9 third-panel estimates, got {}",
            third_estimates.len()
        )));
    }
    Ok(combine_toj(ed, mean(half_estimates), mean(third_estimates)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn combine_hpj(ed: f64, sbar_half: f64) -> f64 {
    2.0 * ed - sbar_half
}

fn combine_toj(ed: f64, sbar_half: f64, sbar_third: f64) -> f64 {
    TOJ_WEIGHTS[0] * ed + TOJ_WEIGHTS[1] * sbar_half + TOJ_WEIGHTS[2] * sbar_third
}

/// ED, HPJ and (when thirds were computed) TOJ estimates of one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEstimate {
    pub spec: StatisticSpec,
    pub ed: f64,
    pub sbar_half: f64,
    pub sbar_third: Option<f64>,
    pub hpj: f64,
    pub toj: Option<f64>,
    pub n_units_used: usize,
    pub degenerate_units_dropped: usize,
    /// False for quantiles, whose jackknife correction has no smooth-case
    /// justification.
    pub smooth: bool,
}

impl CorrectedEstimate {
    pub fn get(&self, kind: EstimatorKind) -> Option<f64> {
        match kind {
            EstimatorKind::Ed => Some(self.ed),
            EstimatorKind::Hpj => Some(self.hpj),
            EstimatorKind::Toj => self.toj,
        }
    }
}

/// Sorted column orders per group, for weighted quantiles.
pub(crate) type BundleOrders = Vec<Vec<ColumnOrder>>;

impl JackknifeBundle {
    pub fn n_units(&self) -> usize {
        self.full.len()
    }

    pub fn max_lag(&self) -> usize {
        self.full.max_lag()
    }

    pub fn order(&self) -> JackknifeOrder {
        if self.third_scheme.is_some() {
            JackknifeOrder::ThirdsAndHalf
        } else {
            JackknifeOrder::Half
        }
    }

    pub fn full(&self) -> &UnitTable {
        &self.full
    }

    pub fn halves(&self) -> &[UnitTable] {
        &self.halves
    }

    pub fn thirds(&self) -> &[UnitTable] {
        &self.thirds
    }

    pub fn half_scheme(&self) -> &SplitScheme {
        &self.half_scheme
    }

    pub fn third_scheme(&self) -> Option<&SplitScheme> {
        self.third_scheme.as_ref()
    }

    /// Units usable in autocorrelation statistics: not degenerate in any
    /// group, so that every group averages over the same units.
    pub fn rho_usable(&self) -> &[bool] {
        &self.rho_ok
    }

    pub fn degenerate_units(&self) -> usize {
        self.rho_ok.iter().filter(|ok| !**ok).count()
    }

    fn groups(&self) -> impl Iterator<Item = &UnitTable> {
        std::iter::once(&self.full).chain(&self.halves).chain(&self.thirds)
    }

    /// Rows `indices` of every group, jointly.
    pub fn select_units(&self, indices: &[usize]) -> JackknifeBundle {
        JackknifeBundle {
            full: self.full.select(indices),
            halves: self.halves.iter().map(|g| g.select(indices)).collect(),
            thirds: self.thirds.iter().map(|g| g.select(indices)).collect(),
            half_scheme: self.half_scheme.clone(),
            third_scheme: self.third_scheme.clone(),
            rho_ok: indices.iter().map(|&i| self.rho_ok[i]).collect(),
        }
    }

    pub(crate) fn orders(&self, specs: &[StatisticSpec]) -> Result<BundleOrders> {
        self.groups().map(|g| column_orders(g, &self.rho_ok, specs)).collect()
    }

    /// Evaluates all specs on every group, optionally under resampling
    /// weights, and combines them into ED/HPJ/TOJ estimates.
    pub(crate) fn evaluate(
        &self,
        specs: &[StatisticSpec],
        weights: Option<&[u32]>,
        orders: Option<&BundleOrders>,
    ) -> Vec<Result<CorrectedEstimate>> {
        let empty: Vec<ColumnOrder> = Vec::new();
        let mut evaluators: Vec<Evaluator<'_>> = self
            .groups()
            .enumerate()
            .map(|(g, table)| {
                let ord = orders.map_or(&empty, |o| &o[g]);
                Evaluator::new(table, &self.rho_ok, weights, ord)
            })
            .collect();
        let n_half = self.halves.len();
        specs
            .iter()
            .map(|spec| {
                let (first, rest) = evaluators.split_first_mut().expect("full group");
                let full = first.estimate(spec, EstimatorKind::Ed)?;
                let (halves, thirds) = rest.split_at_mut(n_half);
                let half_vals = halves.iter_mut().map(|e| e.value(spec)).collect::<Result<Vec<_>>>()?;
                let third_vals = thirds.iter_mut().map(|e| e.value(spec)).collect::<Result<Vec<_>>>()?;
                let ed = full.point;
                let sbar_half = mean(&half_vals);
                let sbar_third = (!third_vals.is_empty()).then(|| mean(&third_vals));
                Ok(CorrectedEstimate {
                    spec: *spec,
                    ed,
                    sbar_half,
                    sbar_third,
                    hpj: combine_hpj(ed, sbar_half),
                    toj: sbar_third.map(|st| combine_toj(ed, sbar_half, st)),
                    n_units_used: full.n_units_used,
                    degenerate_units_dropped: full.degenerate_units_dropped,
                    smooth: spec.is_smooth(),
                })
            })
            .collect()
    }

    pub fn corrected(&self, spec: &StatisticSpec) -> Result<CorrectedEstimate> {
        self.corrected_all(std::slice::from_ref(spec)).pop().expect("one result")
    }

    pub fn corrected_all(&self, specs: &[StatisticSpec]) -> Vec<Result<CorrectedEstimate>> {
        if let Some(spec) = specs.iter().find(|s| s.max_lag() > self.max_lag()) {
            let err = Error::InvalidLag { lag: spec.max_lag(), len: self.max_lag() + 1 };
            return specs.iter().map(|_| Err(err.clone())).collect();
        }
        self.evaluate(specs, None, None)
    }
}

/// Builds the bundle needed by `spec` and returns its corrected estimates.
pub fn corrected_estimate(panel: &Panel, spec: &StatisticSpec, order: JackknifeOrder) -> Result<CorrectedEstimate> {
    let bundle = build_bundle(panel, spec.max_lag(), order)?;
    bundle.corrected(spec)
}
