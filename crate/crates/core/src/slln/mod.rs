//! Finite-horizon diagnostics for the strong-law conditions.
//!
//! Every condition is an infinite series or an asymptotic ratio. Reports give
//! partial values at increasing cutoffs and a three-valued verdict from the
//! ratio of the last two increments; a verdict is evidence, never a proof.

mod corollary;
mod growth;
mod moment;
mod series;
mod trajectory;

pub use corollary::{check_corollary_condition, check_pqd_series, corollary_weight, corollary_weight_split, PAIR_HORIZON_CAP, PER_TERM_BUDGET};
pub use growth::{check_condition_a, check_condition_b, check_growth_conditions};
pub use moment::{check_moment_family, default_ranges, scheme_shells, HRelation, MomentEntry, MomentFamilyReport};
pub use series::{check_covariance_conditions, check_series_conditions};
pub use trajectory::{slln_trajectory, CheckpointSummary, TrajectoryStats};

use serde::{Deserialize, Serialize};

use crate::numeric::safe_ratio;
use crate::quadrant::Method;

/// Default relative tolerance on the extrapolated tail.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Increment ratios within this distance of 1 count as non-contracting, so
/// rounding in an exactly linear sequence cannot pass for slow decay.
pub const RATIO_SLACK: f64 = 1e-9;

/// Increments below this fraction of the largest partial value count as 0;
/// long sums of powers carry rounding jitter around 1e-13.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "b'")]
    BPrime,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "f")]
    F,
    #[serde(rename = "g")]
    G,
    #[serde(rename = "3.2")]
    PairWeighted,
    #[serde(rename = "3.7")]
    TruncatedCovariance,
    #[serde(rename = "3.8")]
    ShellCovariance,
    #[serde(rename = "3.10")]
    CenteredSecondMoment,
    #[serde(rename = "3.11")]
    MonotoneCovariance,
    #[serde(rename = "cor3.3")]
    PqdSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergedNumerically,
    Inconclusive,
    DivergingTrend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSum {
    pub cutoff: u64,
    pub value: f64,
}

/// A named yes/no fact checked alongside a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    /// Partial values; the meaning of `cutoff` is stated in `notes`.
    pub partial_sums: Vec<PartialSum>,
    /// `|d_i| / |d_{i−1}|` for the increments `d` of the partial values.
    pub trend_diagnostic: Vec<f64>,
    pub verdict: Verdict,
    /// Last value plus the geometric tail `d ρ / (1 − ρ)`; `None` without a
    /// contracting ratio.
    pub limit_estimate: Option<f64>,
    pub tolerance: f64,
    pub method: Method,
    pub error_bound: f64,
    pub side_checks: Vec<SideCheck>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn new(condition_id: ConditionId, cutoffs: &[u64], values: &[f64], tolerance: f64) -> Self {
        let (verdict, trend_diagnostic, limit_estimate) = judge(values, tolerance);
        Self {
            condition_id,
            partial_sums: cutoffs.iter().zip(values).map(|(c, v)| PartialSum { cutoff: *c, value: *v }).collect(),
            trend_diagnostic,
            verdict,
            limit_estimate,
            tolerance,
            method: Method::Exact,
            error_bound: 0.0,
            side_checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_method(mut self, method: Method, error_bound: f64) -> Self {
        self.method = method;
        self.error_bound = error_bound;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn values(&self) -> Vec<f64> {
        self.partial_sums.iter().map(|p| p.value).collect()
    }

    /// Partial values never decrease; expected for nonnegative-term series.
    pub fn is_nondecreasing(&self) -> bool {
        self.partial_sums.windows(2).all(|w| w[1].value >= w[0].value)
    }

    pub fn side_checks_pass(&self) -> bool {
        self.side_checks.iter().all(|c| c.passed)
    }
}

/// Verdict from the increments of a sequence of partial values.
///
/// Converged when the last increment ratio `ρ` is below 1 and the
/// geometric tail `|d ρ/(1−ρ)|` is within `tol` times the largest value; diverging
/// when the last two ratios are both at least 1 (up to [`RATIO_SLACK`]);
/// inconclusive otherwise.
pub fn judge(values: &[f64], tol: f64) -> (Verdict, Vec<f64>, Option<f64>) {
    // Increments at the rounding level of the largest partial value are
    // indistinguishable from zero.
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = NOISE_FLOOR * scale;
    let diffs: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 { *v } else { v - values[i - 1] })
        .map(|d| if d.abs() <= noise { 0.0 } else { d })
        .collect();
    let ratios: Vec<f64> = diffs.windows(2).map(|w| safe_ratio(w[1].abs(), w[0].abs())).collect();
    let Some(&rho) = ratios.last() else {
        return (Verdict::Inconclusive, ratios, None);
    };
    let last = *values.last().unwrap();
    let stalled = |x: f64| x >= 1.0 - RATIO_SLACK;
    if !stalled(rho) {
        let tail = diffs.last().unwrap() * rho / (1.0 - rho);
        let verdict = if ratios.len() >= 2 && tail.abs() <= tol * scale {
            Verdict::ConvergedNumerically
        } else {
            Verdict::Inconclusive
        };
        return (verdict, ratios, Some(last + tail));
    }
    let verdict = if ratios.len() >= 2 && stalled(ratios[ratios.len() - 2]) {
        Verdict::DivergingTrend
    } else {
        Verdict::Inconclusive
    };
    (verdict, ratios, None)
}
