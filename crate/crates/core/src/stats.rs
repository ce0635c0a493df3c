//! Binomial intervals and order statistics for Monte Carlo summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{domain, Result};

/// A sample proportion with its exact binomial interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub seed: u64,
}

impl ProportionEstimate {
    pub fn covers(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return domain(format!("need 0 ≤ k ≤ n and n > 0, got k = {k}, n = {n}"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return domain(format!("confidence must lie in (0, 1), got {confidence}"));
    }
    let a = (1.0 - confidence) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 { 0.0 } else { Beta::new(kf, nf - kf + 1.0).unwrap().inverse_cdf(a) };
    let upper = if k == n { 1.0 } else { Beta::new(kf + 1.0, nf - kf).unwrap().inverse_cdf(1.0 - a) };
    Ok((lower, upper))
}

/// Linear-interpolation quantile of unsorted data, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return domain("quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&q) {
        return domain(format!("quantile level must lie in [0, 1], got {q}"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}
