//! Model-free analysis of heterogeneous dynamics in balanced panels.
//!
//! Each unit's mean, autocovariances and autocorrelations are estimated from
//! its own time series; the cross-sectional distribution of those estimates
//! is then summarized (means, standard deviations, quantiles, correlations,
//! empirical CDFs) with split-panel jackknife bias correction and
//! cross-sectional bootstrap inference.

pub mod bootstrap;
pub mod empirical;
pub mod error;
pub mod jackknife;
pub mod montecarlo;
pub mod panel;
pub mod rng;
pub mod stats;

pub use bootstrap::{bootstrap_all, bootstrap_statistic, BootstrapConfig, BootstrapResult, SpecBootstrap};
pub use empirical::{ks_two_sample, kolmogorov_cdf, Ecdf, KsResult};
pub use error::{Error, Result};
pub use jackknife::{build_bundle, corrected_estimate, CorrectedEstimate, JackknifeBundle, JackknifeOrder};
pub use panel::{compute_unit_stats, split_panel, Panel, SplitKind, SplitScheme, TimeId, UnitStats};
pub use stats::{plug_in, EstimateResult, EstimatorKind, Quantity, QuantileLevel, StatisticSpec, UnitTable};
