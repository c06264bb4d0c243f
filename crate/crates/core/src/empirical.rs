//! Empirical distribution functions, the inf-form empirical quantile and the
//! two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empirical CDF of an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of sample values `<= a`.
    pub fn count_le(&self, a: f64) -> usize {
        self.sorted.partition_point(|v| *v <= a)
    }

    /// `F(a) = #{values <= a} / n`.
    pub fn eval(&self, a: f64) -> f64 {
        self.count_le(a) as f64 / self.len() as f64
    }

    /// `inf { a : F(a) >= tau }`, which is always a sample value.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        let k = quantile_rank(tau, self.len())?;
        Ok(self.sorted[k - 1])
    }
}

/// Smallest count `k` in `1..=n` with `k / n >= tau`, evaluated with the same
/// floating-point division as [`Ecdf::eval`] so the two stay consistent.
pub fn quantile_rank(tau: f64, n: usize) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidInput(format!("quantile level {tau} outside (0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    let nf = n as f64;
    let mut k = ((tau * nf).floor() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= tau {
        k -= 1;
    }
    while k < n && (k as f64) / nf < tau {
        k += 1;
    }
    Ok(k)
}

pub fn ecdf_build(values: &[f64]) -> Result<Ecdf> {
    Ecdf::new(values)
}

pub fn ecdf_eval(ecdf: &Ecdf, a: f64) -> f64 {
    ecdf.eval(a)
}

pub fn quantile(ecdf: &Ecdf, tau: f64) -> Result<f64> {
    ecdf.quantile(tau)
}

/// Quantile of a raw sample without keeping the ECDF around.
pub fn sample_quantile(values: &[f64], tau: f64) -> Result<f64> {
    let mut v = values.to_vec();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("sample contains non-finite values".into()));
    }
    let k = quantile_rank(tau, v.len())?;
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

const KOLMOGOROV_TERM_TOL: f64 = 1e-12;
const KOLMOGOROV_MAX_TERMS: usize = 1000;
/// Below this point the theta-function form converges much faster.
const KOLMOGOROV_SMALL_ARG: f64 = 0.6;

/// `P(sup |B(t)| <= a)` for a Brownian bridge `B`:
/// `1 - 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 a^2)`.
///
/// For small `a` the alternating series needs too many terms to settle, so
/// the equivalent `sqrt(2 pi)/a sum_{j>=1} exp(-(2j-1)^2 pi^2 / (8 a^2))`
/// is used there.
pub fn kolmogorov_cdf(a: f64) -> f64 {
    if a.is_nan() || a <= 0.0 {
        return 0.0;
    }
    if a.is_infinite() {
        return 1.0;
    }
    let value = if a < KOLMOGOROV_SMALL_ARG {
        let c = std::f64::consts::PI.powi(2) / (8.0 * a * a);
        let mut sum = 0.0;
        for j in 1..=KOLMOGOROV_MAX_TERMS {
            let odd = (2 * j - 1) as f64;
            let term = (-c * odd * odd).exp();
            sum += term;
            if term < KOLMOGOROV_TERM_TOL * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        (2.0 * std::f64::consts::PI).sqrt() / a * sum
    } else {
        let mut sum = 0.0;
        for j in 1..=KOLMOGOROV_MAX_TERMS {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * a * a).exp();
            sum += if j % 2 == 1 { term } else { -term };
            let next = (-2.0 * (jf + 1.0).powi(2) * a * a).exp();
            if next < KOLMOGOROV_TERM_TOL {
                break;
            }
        }
        1.0 - 2.0 * sum
    };
    value.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sqrt(n1 n2 / (n1 + n2)) * raw_sup`.
    pub statistic: f64,
    /// `sup_a |F1(a) - F2(a)|`.
    pub raw_sup: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Exact two-sample KS statistic. The supremum of a difference of step
/// functions is attained at a jump, so both CDFs are evaluated at every
/// distinct point of the pooled sample (the left limits are the values at
/// the preceding point).
pub fn ks_two_sample(group_a: &[f64], group_b: &[f64]) -> Result<KsResult> {
    let a = Ecdf::new(group_a)?;
    let b = Ecdf::new(group_b)?;
    let (xa, xb) = (a.sorted_values(), b.sorted_values());
    let (n1, n2) = (xa.len(), xb.len());
    let (f1, f2) = (n1 as f64, n2 as f64);

    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0_f64;
    while i < n1 || j < n2 {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < n1 && xa[i] <= next {
            i += 1;
        }
        while j < n2 && xb[j] <= next {
            j += 1;
        }
        sup = sup.max((i as f64 / f1 - j as f64 / f2).abs());
    }

    let statistic = (f1 * f2 / (f1 + f2)).sqrt() * sup;
    let p_value = if statistic == 0.0 { 1.0 } else { 1.0 - kolmogorov_cdf(statistic) };
    Ok(KsResult { statistic, raw_sup: sup, p_value, n1, n2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_eval() {
        let e = ecdf_build(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.sorted_values(), &[1.0, 2.0, 3.0]);
        assert_eq!(e.len(), 3);
        assert_eq!(ecdf_eval(&e, 2.0), 2.0 / 3.0);
        assert_eq!(ecdf_eval(&e, 0.5), 0.0);
        assert_eq!(ecdf_eval(&e, 3.0), 1.0);
        assert_eq!(ecdf_eval(&e, f64::NEG_INFINITY), 0.0);
        assert_eq!(ecdf_eval(&e, f64::INFINITY), 1.0);

        let single = ecdf_build(&[4.5]).unwrap();
        assert_eq!(single.eval(4.4999), 0.0);
        assert_eq!(single.eval(4.5), 1.0);

        let dup = ecdf_build(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(dup.eval(1.0), 2.0 / 3.0);

        assert!(ecdf_build(&[]).is_err());
        assert!(ecdf_build(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn quantile_examples() {
        let e = ecdf_build(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(quantile(&e, 0.5).unwrap(), 3.0);
        assert_eq!(quantile(&e, 0.2).unwrap(), 1.0);
        assert_eq!(quantile(&e, 1.0).unwrap(), 5.0);
        assert!(quantile(&e, 0.0).is_err());
        assert!(quantile(&e, 1.5).is_err());
        assert!(quantile(&e, f64::NAN).is_err());
    }

    #[test]
    fn quantile_rank_agrees_with_eval_at_awkward_levels() {
        // 0.7 * 10 rounds up to 7.000000000000001 in floating point.
        for n in 1..60 {
            for step in 1..=100 {
                let tau = step as f64 / 100.0;
                let k = quantile_rank(tau, n).unwrap();
                assert!(k as f64 / n as f64 >= tau);
                assert!(k == 1 || ((k - 1) as f64 / n as f64) < tau);
            }
        }
        assert_eq!(quantile_rank(0.7, 10).unwrap(), 7);
    }

    #[test]
    fn sample_quantile_matches_ecdf() {
        let v = [0.3, -2.0, 5.5, 0.3, 1.0, 7.25, -0.5];
        let e = Ecdf::new(&v).unwrap();
        for tau in [0.01, 0.25, 0.5, 0.75, 0.975, 1.0] {
            assert_eq!(sample_quantile(&v, tau).unwrap(), e.quantile(tau).unwrap());
        }
    }

    #[test]
    fn kolmogorov_reference_points() {
        assert!((kolmogorov_cdf(1.358) - 0.95).abs() < 5e-4);
        assert_eq!(kolmogorov_cdf(0.0), 0.0);
        assert_eq!(kolmogorov_cdf(-1.0), 0.0);
        assert!((kolmogorov_cdf(3.0) - (1.0 - 2.0 * (-18.0_f64).exp())).abs() < 1e-7);
        // Both branches agree where they meet.
        let below = kolmogorov_cdf(KOLMOGOROV_SMALL_ARG - 1e-12);
        let above = kolmogorov_cdf(KOLMOGOROV_SMALL_ARG);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn ks_examples() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.raw_sup, 0.0);
        assert_eq!(r.p_value, 1.0);

        let r = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.raw_sup, 1.0);
        assert_eq!(r.statistic, 1.0);
        assert!((r.p_value - 0.270).abs() < 1e-3);
        assert_eq!((r.n1, r.n2), (2, 2));

        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
    }

    #[test]
    fn ks_handles_ties_across_groups() {
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r.raw_sup - 1.0 / 3.0).abs() < 1e-15);
    }
}
