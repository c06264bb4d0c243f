//! Plug-in estimation of distributional features of the per-unit estimates:
//! means, standard deviations, quantiles and correlations.
//!
//! Every smooth target has the form `h(N^-1 sum_i g(theta_i))` with `g`
//! collecting raw first and second moments, so the standard deviation uses
//! the divisor `N` and the correlation is the moment-form sample correlation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::empirical::quantile_rank;
use crate::error::{Error, Result};
use crate::panel::UnitStats;

/// Which per-unit estimate a statistic is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Mu,
    Gamma(usize),
    /// Lag must be at least 1.
    Rho(usize),
}

impl Quantity {
    pub fn lag(self) -> usize {
        match self {
            Quantity::Mu => 0,
            Quantity::Gamma(k) | Quantity::Rho(k) => k,
        }
    }

    pub fn is_rho(self) -> bool {
        matches!(self, Quantity::Rho(_))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Mu => f.write_str("mu"),
            Quantity::Gamma(k) => write!(f, "gamma{k}"),
            Quantity::Rho(k) => write!(f, "rho{k}"),
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown quantity `{s}` (expected mu, gammaK or rhoK)"));
        let s = s.trim();
        if s == "mu" {
            return Ok(Quantity::Mu);
        }
        if let Some(k) = s.strip_prefix("gamma") {
            return k.parse().map(Quantity::Gamma).map_err(|_| bad());
        }
        if let Some(k) = s.strip_prefix("rho") {
            let k: usize = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(Error::InvalidLag { lag: 0, len: 0 });
            }
            return Ok(Quantity::Rho(k));
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantileLevel {
    Q25,
    Q50,
    Q75,
}

impl QuantileLevel {
    pub fn tau(self) -> f64 {
        match self {
            QuantileLevel::Q25 => 0.25,
            QuantileLevel::Q50 => 0.5,
            QuantileLevel::Q75 => 0.75,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            QuantileLevel::Q25 => "q25",
            QuantileLevel::Q50 => "q50",
            QuantileLevel::Q75 => "q75",
        }
    }
}

/// A target statistic of the cross-sectional distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticSpec {
    Mean(Quantity),
    Std(Quantity),
    Quantile(Quantity, QuantileLevel),
    Corr(Quantity, Quantity),
}

impl StatisticSpec {
    pub fn corr(a: Quantity, b: Quantity) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidInput(format!("correlation of {a} with itself")));
        }
        Ok(StatisticSpec::Corr(a, b))
    }

    pub fn quantities(&self) -> impl Iterator<Item = Quantity> {
        let (pair, len) = match *self {
            StatisticSpec::Mean(q) | StatisticSpec::Std(q) | StatisticSpec::Quantile(q, _) => ([q, q], 1),
            StatisticSpec::Corr(a, b) => ([a, b], 2),
        };
        pair.into_iter().take(len)
    }

    /// Quantiles are not smooth functionals of moments; they are still
    /// jackknifed but reported with this flag cleared.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, StatisticSpec::Quantile(..))
    }

    /// Statistics touching an autocorrelation ignore degenerate units.
    pub fn uses_rho(&self) -> bool {
        self.quantities().any(|q| q.is_rho())
    }

    pub fn max_lag(&self) -> usize {
        self.quantities().map(|q| q.lag()).max().unwrap_or(0)
    }

    pub fn min_units(&self) -> usize {
        match self {
            StatisticSpec::Mean(_) | StatisticSpec::Quantile(..) => 1,
            StatisticSpec::Std(_) | StatisticSpec::Corr(..) => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if let StatisticSpec::Corr(a, b) = self {
            if a == b {
                return Err(Error::InvalidInput(format!("correlation of {a} with itself")));
            }
        }
        for q in self.quantities() {
            if q == Quantity::Rho(0) {
                return Err(Error::InvalidLag { lag: 0, len: 0 });
            }
        }
        Ok(())
    }

    /// Means, standard deviations and quartiles of `mu`, `gamma0` and `rho1`
    /// followed by their three pairwise correlations.
    pub fn standard_menu() -> Vec<StatisticSpec> {
        let quantities = [Quantity::Mu, Quantity::Gamma(0), Quantity::Rho(1)];
        let mut menu = Vec::with_capacity(18);
        for q in quantities {
            menu.push(StatisticSpec::Mean(q));
            menu.push(StatisticSpec::Std(q));
            for level in [QuantileLevel::Q25, QuantileLevel::Q50, QuantileLevel::Q75] {
                menu.push(StatisticSpec::Quantile(q, level));
            }
        }
        menu.push(StatisticSpec::Corr(Quantity::Mu, Quantity::Gamma(0)));
        menu.push(StatisticSpec::Corr(Quantity::Mu, Quantity::Rho(1)));
        menu.push(StatisticSpec::Corr(Quantity::Gamma(0), Quantity::Rho(1)));
        menu
    }

    /// Parses a comma separated list; `all` expands to [`Self::standard_menu`].
    pub fn parse_list(s: &str) -> Result<Vec<StatisticSpec>> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            if item == "all" {
                out.extend(Self::standard_menu());
            } else {
                out.push(item.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("empty statistic list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticSpec::Mean(q) => write!(f, "{q}_mean"),
            StatisticSpec::Std(q) => write!(f, "{q}_std"),
            StatisticSpec::Quantile(q, l) => write!(f, "{q}_{}", l.tag()),
            StatisticSpec::Corr(a, b) => write!(f, "corr_{a}_{b}"),
        }
    }
}

impl FromStr for StatisticSpec {
    type Err = Error;

    /// Accepts `<quantity>_<mean|std|q25|q50|q75>` or `corr_<a>_<b>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unknown statistic `{s}`"));
        if let Some(rest) = s.strip_prefix("corr_") {
            let (a, b) = rest.split_once('_').ok_or_else(bad)?;
            return StatisticSpec::corr(a.parse()?, b.parse()?);
        }
        let (q, target) = s.rsplit_once('_').ok_or_else(bad)?;
        let q: Quantity = q.parse()?;
        let spec = match target {
            "mean" => StatisticSpec::Mean(q),
            "std" => StatisticSpec::Std(q),
            "q25" => StatisticSpec::Quantile(q, QuantileLevel::Q25),
            "q50" => StatisticSpec::Quantile(q, QuantileLevel::Q50),
            "q75" => StatisticSpec::Quantile(q, QuantileLevel::Q75),
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

impl Serialize for StatisticSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StatisticSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "HPJ")]
    Hpj,
    #[serde(rename = "TOJ")]
    Toj,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Ed, EstimatorKind::Hpj, EstimatorKind::Toj];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ed => "ED",
            EstimatorKind::Hpj => "HPJ",
            EstimatorKind::Toj => "TOJ",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ed" => Ok(EstimatorKind::Ed),
            "hpj" => Ok(EstimatorKind::Hpj),
            "toj" => Ok(EstimatorKind::Toj),
            _ => Err(Error::InvalidInput(format!("unknown estimator `{s}` (expected ed, hpj or toj)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub point: f64,
    pub estimator_kind: EstimatorKind,
    pub n_units_used: usize,
    pub degenerate_units_dropped: usize,
}

/// Column-oriented per-unit estimates: one vector per quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTable {
    mu: Vec<f64>,
    gamma: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    degenerate: Vec<bool>,
}

impl UnitTable {
    pub fn from_stats(stats: &[UnitStats]) -> Result<Self> {
        let max_lag = stats.first().map_or(0, UnitStats::max_lag);
        if stats.iter().any(|s| s.max_lag() != max_lag) {
            return Err(Error::InvalidInput("unit stats with different maximum lags".into()));
        }
        Ok(Self {
            mu: stats.iter().map(|s| s.mu).collect(),
            gamma: (0..=max_lag).map(|k| stats.iter().map(|s| s.gamma[k]).collect()).collect(),
            rho: (0..max_lag).map(|k| stats.iter().map(|s| s.rho[k]).collect()).collect(),
            degenerate: stats.iter().map(|s| s.degenerate).collect(),
        })
    }

    /// Builds a table from columns; `gamma[k]` and `rho[k - 1]` hold lag `k`.
    pub fn from_columns(mu: Vec<f64>, gamma: Vec<Vec<f64>>, rho: Vec<Vec<f64>>, degenerate: Vec<bool>) -> Result<Self> {
        let n = mu.len();
        let consistent = gamma.iter().chain(&rho).all(|c| c.len() == n) && degenerate.len() == n;
        if !consistent || gamma.is_empty() || rho.len() + 1 != gamma.len() {
            return Err(Error::InvalidInput("inconsistent unit table columns".into()));
        }
        Ok(Self { mu, gamma, rho, degenerate })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn column(&self, q: Quantity) -> Result<&[f64]> {
        let missing = || Error::InvalidLag { lag: q.lag(), len: self.max_lag() + 1 };
        match q {
            Quantity::Mu => Ok(&self.mu),
            Quantity::Gamma(k) => self.gamma.get(k).map(Vec::as_slice).ok_or_else(missing),
            Quantity::Rho(0) => Err(missing()),
            Quantity::Rho(k) => self.rho.get(k - 1).map(Vec::as_slice).ok_or_else(missing),
        }
    }

    /// Row subset in the given order (indices may repeat).
    pub fn select(&self, rows: &[usize]) -> Self {
        let pick = |c: &Vec<f64>| rows.iter().map(|&i| c[i]).collect::<Vec<_>>();
        Self {
            mu: pick(&self.mu),
            gamma: self.gamma.iter().map(pick).collect(),
            rho: self.rho.iter().map(pick).collect(),
            degenerate: rows.iter().map(|&i| self.degenerate[i]).collect(),
        }
    }
}

/// Moment sums of one column, shifted by a reference value taken from the
/// data so that identical values give exactly zero spread.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    reference: f64,
    s1: f64,
    s2: f64,
}

impl Moments {
    fn mean(&self) -> f64 {
        self.reference + self.s1 / self.n
    }

    fn variance(&self) -> f64 {
        let m1 = self.s1 / self.n;
        (self.s2 / self.n - m1 * m1).max(0.0)
    }
}

/// Sorted row order of one column, restricted to the included rows, with
/// the quantile levels requested for it.
#[derive(Debug, Clone)]
pub(crate) struct ColumnOrder {
    quantity: Quantity,
    order: Vec<u32>,
    sorted: Vec<f64>,
    taus: Vec<f64>,
}

/// Evaluates statistics on one unit table, optionally with integer
/// resampling weights, caching moment sums and quantiles across statistics.
pub(crate) struct Evaluator<'a> {
    table: &'a UnitTable,
    rho_ok: &'a [bool],
    dropped: usize,
    weights: Option<&'a [u32]>,
    orders: &'a [ColumnOrder],
    totals: Option<(u64, u64)>,
    moments: Vec<((Quantity, bool), Moments)>,
    quantiles: Vec<(Quantity, Vec<f64>)>,
}

impl<'a> Evaluator<'a> {
    /// `rho_ok[i]` marks units usable in autocorrelation statistics.
    pub(crate) fn new(
        table: &'a UnitTable,
        rho_ok: &'a [bool],
        weights: Option<&'a [u32]>,
        orders: &'a [ColumnOrder],
    ) -> Self {
        let dropped = rho_ok.iter().filter(|ok| !**ok).count();
        Self {
            table,
            rho_ok,
            dropped,
            weights,
            orders,
            totals: None,
            moments: Vec::new(),
            quantiles: Vec::new(),
        }
    }

    #[inline]
    fn included(&self, i: usize, masked: bool) -> bool {
        !masked || self.rho_ok[i]
    }

    /// Without degenerate units the masked and unmasked samples coincide.
    fn effective_mask(&self, masked: bool) -> bool {
        masked && self.dropped > 0
    }

    fn used_units(&self, masked: bool) -> usize {
        if masked {
            self.table.len() - self.dropped
        } else {
            self.table.len()
        }
    }

    /// Total weight of all units and of the rho-usable units.
    fn totals(&mut self) -> (u64, u64) {
        if let Some(t) = self.totals {
            return t;
        }
        let t = match self.weights {
            None => (self.table.len() as u64, self.used_units(true) as u64),
            Some(w) => w.iter().zip(self.rho_ok).fold((0, 0), |(all, ok), (&c, &usable)| {
                (all + c as u64, ok + if usable { c as u64 } else { 0 })
            }),
        };
        self.totals = Some(t);
        t
    }

    fn moments(&mut self, q: Quantity, masked: bool) -> Result<Moments> {
        let masked = self.effective_mask(masked);
        if let Some((_, m)) = self.moments.iter().find(|(k, _)| *k == (q, masked)) {
            return Ok(*m);
        }
        let col = self.table.column(q)?;
        let reference = (0..col.len())
            .find(|&i| self.included(i, masked))
            .map_or(0.0, |i| col[i]);
        let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
        match (self.weights, masked) {
            (None, false) => {
                for &x in col {
                    let d = x - reference;
                    s1 += d;
                    s2 += d * d;
                }
                n = col.len() as f64;
            }
            (Some(w), false) => {
                for (&x, &c) in col.iter().zip(w) {
                    let (d, c) = (x - reference, c as f64);
                    n += c;
                    s1 += c * d;
                    s2 += c * d * d;
                }
            }
            (w, true) => {
                for (i, &x) in col.iter().enumerate() {
                    if self.rho_ok[i] {
                        let c = w.map_or(1.0, |w| w[i] as f64);
                        let d = x - reference;
                        n += c;
                        s1 += c * d;
                        s2 += c * d * d;
                    }
                }
            }
        }
        let m = Moments { n, reference, s1, s2 };
        self.moments.push(((q, masked), m));
        Ok(m)
    }

    fn cross(&mut self, a: Quantity, b: Quantity) -> Result<(Moments, Moments, f64)> {
        let ma = self.moments(a, true)?;
        let mb = self.moments(b, true)?;
        let masked = self.effective_mask(true);
        let (ca, cb) = (self.table.column(a)?, self.table.column(b)?);
        let (ra, rb) = (ma.reference, mb.reference);
        let mut sab = 0.0;
        match (self.weights, masked) {
            (None, false) => {
                for (x, y) in ca.iter().zip(cb) {
                    sab += (x - ra) * (y - rb);
                }
            }
            (Some(w), false) => {
                for ((x, y), &c) in ca.iter().zip(cb).zip(w) {
                    sab += c as f64 * (x - ra) * (y - rb);
                }
            }
            (w, true) => {
                for i in 0..ca.len() {
                    if self.rho_ok[i] {
                        let c = w.map_or(1.0, |w| w[i] as f64);
                        sab += c * (ca[i] - ra) * (cb[i] - rb);
                    }
                }
            }
        }
        Ok((ma, mb, sab))
    }

    fn quantile(&mut self, q: Quantity, masked: bool, tau: f64) -> Result<f64> {
        let col = self.table.column(q)?;
        let Some(order) = self.orders.iter().find(|o| o.quantity == q) else {
            let mut values: Vec<f64> = Vec::with_capacity(col.len());
            for (i, &x) in col.iter().enumerate() {
                if self.included(i, masked) {
                    let copies = self.weights.map_or(1, |w| w[i]);
                    values.extend(std::iter::repeat_n(x, copies as usize));
                }
            }
            return crate::empirical::sample_quantile(&values, tau);
        };
        let slot = order.taus.iter().position(|&x| x == tau);
        if let (Some(j), Some((_, vals))) = (slot, self.quantiles.iter().find(|(k, _)| *k == q)) {
            return Ok(vals[j]);
        }
        // One walk up the sorted order serves every requested level.
        let (all, ok) = self.totals();
        let total = if masked { ok } else { all };
        let mut taus = order.taus.clone();
        if slot.is_none() {
            taus.push(tau);
        }
        let mut ranks = taus
            .iter()
            .enumerate()
            .map(|(j, &x)| quantile_rank(x, total as usize).map(|k| (k as u64, j)))
            .collect::<Result<Vec<(u64, usize)>>>()?;
        ranks.sort_unstable();
        let mut vals = vec![f64::NAN; taus.len()];
        let mut next = 0;
        let mut cum = 0u64;
        for (&i, &x) in order.order.iter().zip(&order.sorted) {
            cum += self.weights.map_or(1, |w| w[i as usize] as u64);
            while next < ranks.len() && cum >= ranks[next].0 {
                vals[ranks[next].1] = x;
                next += 1;
            }
            if next == ranks.len() {
                break;
            }
        }
        let value = vals[slot.unwrap_or(taus.len() - 1)];
        if slot.is_some() {
            self.quantiles.push((q, vals));
        }
        Ok(value)
    }

    /// Value of `spec`, or the reason it cannot be computed.
    pub(crate) fn value(&mut self, spec: &StatisticSpec) -> Result<f64> {
        spec.validate()?;
        let masked = spec.uses_rho();
        let (all, ok) = self.totals();
        let units = if masked { ok } else { all } as usize;
        if units < spec.min_units() {
            return Err(Error::InsufficientUnits { needed: spec.min_units(), available: units });
        }
        match *spec {
            StatisticSpec::Mean(q) => Ok(self.moments(q, masked)?.mean()),
            StatisticSpec::Std(q) => Ok(self.moments(q, masked)?.variance().sqrt()),
            StatisticSpec::Quantile(q, level) => self.quantile(q, masked, level.tau()),
            StatisticSpec::Corr(a, b) => {
                let (ma, mb, sab) = self.cross(a, b)?;
                let (va, vb) = (ma.variance(), mb.variance());
                if va <= 0.0 || vb <= 0.0 {
                    return Err(Error::DegenerateVariance(format!(
                        "{spec}: zero cross-sectional variance"
                    )));
                }
                let cov = sab / ma.n - (ma.s1 / ma.n) * (mb.s1 / mb.n);
                Ok(cov / (va * vb).sqrt())
            }
        }
    }

    pub(crate) fn estimate(&mut self, spec: &StatisticSpec, kind: EstimatorKind) -> Result<EstimateResult> {
        let point = self.value(spec)?;
        let masked = spec.uses_rho();
        Ok(EstimateResult {
            point,
            estimator_kind: kind,
            n_units_used: self.used_units(masked),
            degenerate_units_dropped: if masked { self.dropped } else { 0 },
        })
    }
}

/// Sorted orders for the quantile statistics among `specs`.
pub(crate) fn column_orders(table: &UnitTable, rho_ok: &[bool], specs: &[StatisticSpec]) -> Result<Vec<ColumnOrder>> {
    let mut orders: Vec<ColumnOrder> = Vec::new();
    for spec in specs {
        if let StatisticSpec::Quantile(q, level) = *spec {
            if let Some(o) = orders.iter_mut().find(|o| o.quantity == q) {
                if !o.taus.contains(&level.tau()) {
                    o.taus.push(level.tau());
                }
                continue;
            }
            let col = table.column(q)?;
            let mut order: Vec<u32> = (0..col.len() as u32)
                .filter(|&i| !q.is_rho() || rho_ok[i as usize])
                .collect();
            order.sort_by(|&i, &j| col[i as usize].total_cmp(&col[j as usize]));
            let sorted = order.iter().map(|&i| col[i as usize]).collect();
            orders.push(ColumnOrder { quantity: q, order, sorted, taus: vec![level.tau()] });
        }
    }
    Ok(orders)
}

fn rho_usable(stats: &[UnitStats]) -> Vec<bool> {
    stats.iter().map(|s| !s.degenerate).collect()
}

/// `S = h(N^-1 sum g(theta_i))` evaluated on per-unit estimates.
pub fn plug_in(stats: &[UnitStats], spec: &StatisticSpec) -> Result<EstimateResult> {
    let table = UnitTable::from_stats(stats)?;
    let ok = rho_usable(stats);
    Evaluator::new(&table, &ok, None, &[]).estimate(spec, EstimatorKind::Ed)
}

/// Evaluates every spec on the same estimates. Errors of individual specs
/// are returned in place; only an empty spec list fails as a whole.
pub fn evaluate_all(stats: &[UnitStats], specs: &[StatisticSpec]) -> Result<Vec<Result<EstimateResult>>> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no statistics requested".into()));
    }
    let table = UnitTable::from_stats(stats)?;
    let ok = rho_usable(stats);
    let mut eval = Evaluator::new(&table, &ok, None, &[]);
    Ok(specs.iter().map(|s| eval.estimate(s, EstimatorKind::Ed)).collect())
}
