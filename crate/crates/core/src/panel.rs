//! Balanced panels, per-unit sample moments and the time-splitting rules
//! used by the split-panel jackknife.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of a time period. Integer labels order numerically, text labels
/// lexicographically; a panel never mixes the two.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeId {
    Int(i64),
    Label(String),
}

impl fmt::Display for TimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeId::Int(v) => write!(f, "{v}"),
            TimeId::Label(s) => f.write_str(s),
        }
    }
}

/// A balanced `N x T` panel stored row-major (one row per unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: Vec<f64>,
    n: usize,
    t: usize,
    unit_ids: Vec<String>,
    time_ids: Vec<TimeId>,
}

impl Panel {
    pub fn new(unit_ids: Vec<String>, time_ids: Vec<TimeId>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("panel has no units".into()));
        }
        let t = time_ids.len();
        if t < 2 {
            return Err(Error::InvalidInput(format!("panel needs at least 2 periods, got {t}")));
        }
        if unit_ids.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} unit ids for {n} rows",
                unit_ids.len()
            )));
        }
        let mixed = time_ids.iter().any(|x| matches!(x, TimeId::Int(_)))
            && time_ids.iter().any(|x| matches!(x, TimeId::Label(_)));
        if mixed {
            return Err(Error::InvalidInput("time ids mix integers and labels".into()));
        }
        if time_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("time ids must be strictly increasing".into()));
        }
        let mut values = Vec::with_capacity(n * t);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != t {
                return Err(Error::InvalidInput(format!(
                    "unit {} has {} observations, expected {t}",
                    unit_ids[i],
                    row.len()
                )));
            }
            if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "unit {} has a non-finite value at period {}",
                    unit_ids[i], time_ids[pos]
                )));
            }
            values.extend(row);
        }
        Ok(Self { values, n, t, unit_ids, time_ids })
    }

    /// Builds a panel with units labelled `1..=N` and periods `1..=T`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        let unit_ids = (1..=rows.len()).map(|i| i.to_string()).collect();
        let time_ids = (1..=t as i64).map(TimeId::Int).collect();
        Self::new(unit_ids, time_ids, rows)
    }

    pub fn n_units(&self) -> usize {
        self.n
    }

    pub fn n_periods(&self) -> usize {
        self.t
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn time_ids(&self) -> &[TimeId] {
        &self.time_ids
    }

    /// Observations of unit `i` in time order.
    pub fn unit(&self, i: usize) -> &[f64] {
        &self.values[i * self.t..(i + 1) * self.t]
    }

    pub fn units(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.t)
    }

    /// Restricts every unit to the periods in `range` (0-based, half-open).
    pub fn select_periods(&self, range: Range<usize>) -> Result<Panel> {
        if range.start >= range.end || range.end > self.t {
            return Err(Error::InvalidInput(format!(
                "period range {range:?} outside 0..{}",
                self.t
            )));
        }
        let rows = self.units().map(|u| u[range.clone()].to_vec()).collect();
        Panel::new(self.unit_ids.clone(), self.time_ids[range].to_vec(), rows)
    }
}

/// Sample mean of one unit's series.
pub fn unit_mean(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

fn autocov_about(series: &[f64], mean: f64, k: usize) -> f64 {
    let t = series.len();
    let s: f64 = series[k..]
        .iter()
        .zip(&series[..t - k])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    s / (t - k) as f64
}

/// Lag-`k` sample autocovariance with divisor `T - k`, demeaned by the
/// full-sample mean in both factors.
pub fn unit_autocov(series: &[f64], k: usize) -> Result<f64> {
    if k >= series.len() {
        return Err(Error::InvalidLag { lag: k, len: series.len() });
    }
    let mean = unit_mean(series)?;
    Ok(autocov_about(series, mean, k))
}

fn is_constant(series: &[f64]) -> bool {
    series.iter().all(|v| *v == series[0])
}

/// Lag-`k` sample autocorrelation `gamma_k / gamma_0`.
pub fn unit_autocorr(series: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k >= series.len() {
        return Err(Error::InvalidLag { lag: k, len: series.len() });
    }
    let mean = unit_mean(series)?;
    let g0 = autocov_about(series, mean, 0);
    if g0 == 0.0 || is_constant(series) {
        return Err(Error::DegenerateVariance("series has zero sample variance".into()));
    }
    Ok(autocov_about(series, mean, k) / g0)
}

/// Per-unit sample estimates up to lag `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStats {
    pub mu: f64,
    /// `gamma[k]` for `k = 0..=K`.
    pub gamma: Vec<f64>,
    /// `rho[k - 1]` for `k = 1..=K`; NaN when the unit is degenerate.
    pub rho: Vec<f64>,
    /// Zero sample variance: the autocorrelations are undefined.
    pub degenerate: bool,
}

impl UnitStats {
    pub fn from_series(series: &[f64], max_lag: usize) -> Result<Self> {
        if max_lag >= series.len() {
            return Err(Error::InvalidLag { lag: max_lag, len: series.len() });
        }
        let mu = unit_mean(series)?;
        let gamma: Vec<f64> = (0..=max_lag).map(|k| autocov_about(series, mu, k)).collect();
        let degenerate = gamma[0] == 0.0 || is_constant(series);
        let rho = if degenerate {
            vec![f64::NAN; max_lag]
        } else {
            gamma[1..].iter().map(|g| g / gamma[0]).collect()
        };
        Ok(Self { mu, gamma, rho, degenerate })
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }
}

/// Sample mean, autocovariances and autocorrelations of every unit.
///
/// Constant units are flagged `degenerate` instead of failing the batch.
pub fn compute_unit_stats(panel: &Panel, max_lag: usize) -> Result<Vec<UnitStats>> {
    let t = panel.n_periods();
    if max_lag >= t {
        return Err(Error::InvalidLag { lag: max_lag, len: t });
    }
    panel.units().map(|u| UnitStats::from_series(u, max_lag)).collect()
}

/// How the time dimension is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Half,
    Thirds,
}

impl SplitKind {
    pub fn min_periods(self) -> usize {
        match self {
            SplitKind::Half => 4,
            SplitKind::Thirds => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Two halves of length `T/2`.
    HalfEven,
    /// Odd `T`: `(1..ceil), (ceil+1..T), (1..floor), (floor+1..T)`.
    HalfOddFourway,
    /// Three blocks of length `T/3`.
    Thirds,
    /// `T mod 3 != 0`: three rotations of the `ceil/floor` block lengths.
    ThirdsRotated,
}

/// 0-based half-open period range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// A set of partitions of `0..T`. Each partition is a list of consecutive
/// segments covering the whole period range; the jackknife averages the
/// statistic over every segment of every partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitScheme {
    pub kind: SchemeKind,
    pub partitions: Vec<Vec<Segment>>,
}

fn partition_from_lengths(lengths: &[usize]) -> Vec<Segment> {
    let mut start = 0;
    lengths
        .iter()
        .map(|&len| {
            let seg = Segment { start, end: start + len };
            start += len;
            seg
        })
        .collect()
}

impl SplitScheme {
    pub fn new(t: usize, kind: SplitKind) -> Result<Self> {
        if t < kind.min_periods() {
            return Err(Error::PanelTooShort { t, required: kind.min_periods() });
        }
        let scheme = match kind {
            SplitKind::Half if t.is_multiple_of(2) => SplitScheme {
                kind: SchemeKind::HalfEven,
                partitions: vec![partition_from_lengths(&[t / 2, t / 2])],
            },
            SplitKind::Half => {
                let (hi, lo) = (t.div_ceil(2), t / 2);
                SplitScheme {
                    kind: SchemeKind::HalfOddFourway,
                    partitions: vec![
                        partition_from_lengths(&[hi, lo]),
                        partition_from_lengths(&[lo, hi]),
                    ],
                }
            }
            SplitKind::Thirds if t.is_multiple_of(3) => SplitScheme {
                kind: SchemeKind::Thirds,
                partitions: vec![partition_from_lengths(&[t / 3; 3])],
            },
            SplitKind::Thirds => {
                let q = t / 3;
                let base = if t % 3 == 1 { [q + 1, q, q] } else { [q + 1, q + 1, q] };
                let partitions = (0..3)
                    .map(|r| {
                        let mut lengths = base;
                        lengths.rotate_right(r);
                        partition_from_lengths(&lengths)
                    })
                    .collect();
                SplitScheme { kind: SchemeKind::ThirdsRotated, partitions }
            }
        };
        Ok(scheme)
    }

    /// All segments, partition by partition.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.partitions.iter().flatten().copied()
    }

    pub fn n_segments(&self) -> usize {
        self.partitions.iter().map(Vec::len).sum()
    }

    pub fn min_segment_len(&self) -> usize {
        self.segments().map(|s| s.len()).min().unwrap_or(0)
    }
}

/// Splits a panel into its subpanels, in the order of
/// [`SplitScheme::segments`].
///
/// For odd `T` with `Half`, the four subpanels come out as
/// `(1..ceil(T/2))`, `(ceil(T/2)+1..T)`, `(1..floor(T/2))`,
/// `(floor(T/2)+1..T)`.
pub fn split_panel(panel: &Panel, kind: SplitKind) -> Result<Vec<Panel>> {
    let scheme = SplitScheme::new(panel.n_periods(), kind)?;
    scheme.segments().map(|s| panel.select_periods(s.range())).collect()
}
