//! Both sides of the `r`-adic maximal inequality
//!
//! ```text
//! P{ max_{1≤m<r^{n+1}} |Σ_{k≤m} (X_k − E X_k)| > ε b_{r^n} }
//!   ≤ Σ_{k<r^{n+1}} P{|X_k| > b_{r^{n+1}}} + C/ε² (moment + G-blocks + H-blocks)
//! ```
//!
//! together with its checkable precondition `T_b < ε b_{r^n} / 4`, the
//! pathwise identities the bound is built from, an explicit constant and the
//! classical Kolmogorov bound for comparison.

mod lhs;
mod pathwise;
pub(crate) mod rhs;

pub use lhs::{lhs_exceedance_exact, lhs_exceedance_mc, PathSampler, LHS_CONFIDENCE, MIN_REPLICAS};
pub use pathwise::{pathwise_check, pathwise_check_many, PathLawTable, PathwiseReport};
pub use rhs::{condition_b_prime, rhs_bound, rhs_bound_dominated, DominatedRhs, ScaleTerms, TheoremRhsBreakdown};

use serde::{Deserialize, Serialize};

use crate::blocks::{checked_pow, horizon};
use crate::error::{domain, Error, Result};
use crate::model::finite::FiniteJointModel;
use crate::numeric::{compensated_sum, le_with_slack};
use crate::scheme::{power_growth_bound, NormingScheme};
use crate::sequence::{FiniteSequence, SequenceLaw};

/// Relative slack for every `≤` assertion between computed reals.
pub const INEQUALITY_SLACK: f64 = 1e-12;

pub(crate) fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return domain(format!("ε must be positive and finite, got {eps}"));
    }
    Ok(())
}

/// The law must cover `X_1, …, X_{r^{n+1}}`: the top block at scale `n+1`
/// ends at `r^{n+1}`.
pub(crate) fn check_length(law: &dyn SequenceLaw, r: u64, n: u32) -> Result<u64> {
    let top = horizon(r, n)?;
    match law.len() {
        Some(len) if len < top => Err(Error::Index { index: top as usize, len: len as usize }),
        _ => Ok(top),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreconditionReport {
    pub n: u32,
    /// `Σ_{k=1}^{n+1} max_h Σ_{j in block (k,h)} E|X_j| I{|X_j| > b_{r^{k−1}}}`.
    #[serde(rename = "Tb")]
    pub tb: f64,
    /// `ε b_{r^n} / 4`.
    pub threshold: f64,
    pub satisfied: bool,
}

/// Evaluates `T_b` and compares it with `ε b_{r^n} / 4`.
///
/// Marginal moments are analytic for every supported law, so `T_b` is exact
/// up to rounding.
pub fn precondition_b(law: &dyn SequenceLaw, scheme: &NormingScheme, n: u32, eps: f64) -> Result<PreconditionReport> {
    check_epsilon(eps)?;
    scheme.validate()?;
    let r = scheme.r();
    check_length(law, r, n)?;
    let mut per_scale = Vec::with_capacity(n as usize + 1);
    for k in 1..=n + 1 {
        let level = scheme.b_at_scale(k - 1)?;
        let width = checked_pow(r, k)?;
        let f = |m: &crate::model::marginal::Marginal| Ok(m.abs_moment_above(level));
        let best = if law.identically_distributed() {
            law.marginal_sum(1, width, &f)?
        } else {
            let blocks = checked_pow(r, n + 1 - k)?;
            let mut best: f64 = 0.0;
            for h in 0..blocks {
                best = best.max(law.marginal_sum(1 + h * width, (h + 1) * width, &f)?);
            }
            best
        };
        per_scale.push(best);
    }
    let tb = compensated_sum(per_scale);
    let threshold = eps * scheme.b_at_scale(n)? / 4.0;
    Ok(PreconditionReport { n, tb, threshold, satisfied: tb < threshold })
}

/// The explicit constant and the factors it is assembled from.
///
/// On the truncation event the centering shift is at most `T_b`, and the
/// bracketed residual of the decomposition is at most `2 T_b`; with
/// `T_b < ε b/4` the max-event forces the G-part or the H-part above
/// `ε b/8 ≥ ε Σ_k a_{n,k} / (8 C_a)`. Splitting over scales and applying
/// Chebyshev gives `64 C_a² / (ε² a_{n,k}²)` times the second moment of each
/// part. Bounding the maxima by sums over `h` and `ℓ`, the G-part moment is
/// at most `(r−1) M_k + 2(r−1) G_k` and the H-part moment at most
/// `M_k + 2 H_k`, where `M_k` is the moment summand and the 2 counts
/// ordered pairs in `E(Σ)² = Σ Var + 2 Σ_{i<j} Cov`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConstantCalibration {
    pub r: u64,
    pub n: u32,
    /// `max_{0≤n'≤n} Σ_k a_{n',k} / b_{r^{n'}}`.
    pub growth_constant: f64,
    /// Closed-form bound on the growth constant for power schemes.
    pub growth_bound: Option<f64>,
    /// `(8)²` from the two-way split at `ε b / 8`.
    pub chebyshev_factor: f64,
    /// `max(r, 2r − 2)`: the larger of the combined moment and covariance
    /// multiplicities.
    pub block_factor: f64,
    /// `chebyshev_factor · growth_constant² · block_factor`.
    pub constant: f64,
}

pub fn calibrate_constant(scheme: &NormingScheme, n: u32) -> Result<ConstantCalibration> {
    scheme.validate()?;
    let r = scheme.r();
    let growth_constant = scheme.growth_constant(n)?;
    let growth_bound = match scheme {
        NormingScheme::Power { p, alpha, r } => Some(power_growth_bound(*p, *alpha, *r)),
        NormingScheme::Table { .. } => None,
    };
    let rf = r as f64;
    let chebyshev_factor = 64.0;
    let block_factor = rf.max(2.0 * rf - 2.0);
    Ok(ConstantCalibration {
        r,
        n,
        growth_constant,
        growth_bound,
        chebyshev_factor,
        block_factor,
        constant: chebyshev_factor * growth_constant * growth_constant * block_factor,
    })
}

/// `Σ_{k=1}^{n} Var(X_k) / ε²`, the Kolmogorov bound on
/// `P{max_{k≤n} |S_k| ≥ ε}` for independent zero-mean summands.
pub fn kolmogorov_baseline(model: &FiniteJointModel, eps: f64, n: usize) -> Result<f64> {
    check_epsilon(eps)?;
    if n == 0 || n > model.len() {
        return Err(Error::Index { index: n, len: model.len() });
    }
    if !model.is_product(1e-12) {
        return Err(Error::Unsupported("the Kolmogorov bound needs a product law".into()));
    }
    let means = model.means();
    if let Some((j, m)) = means.iter().take(n).enumerate().find(|(_, m)| m.abs() > 1e-12) {
        return Err(Error::Unsupported(format!("the Kolmogorov bound needs zero means, E X_{} = {m}", j + 1)));
    }
    // Zero means: the variance is the second moment.
    let var: Result<Vec<f64>> = (0..n)
        .map(|j| model.marginal_moment(j, 2.0, crate::model::finite::Window::All))
        .collect();
    Ok(compensated_sum(var?) / (eps * eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremVerdict {
    Verified,
    PreconditionUnmet,
    Violated,
}

/// One oracle comparison of the two sides on an enumerable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TheoremCheck {
    pub precondition: PreconditionReport,
    pub lhs: f64,
    pub rhs: TheoremRhsBreakdown,
    pub verdict: TheoremVerdict,
}

/// Exact left side against the bound with constant `constant`. The
/// inequality is only asserted when the precondition holds.
pub fn check_theorem_exact(
    model: &FiniteJointModel,
    eps: f64,
    scheme: &NormingScheme,
    n: u32,
    constant: f64,
    budget: u64,
) -> Result<TheoremCheck> {
    let law = FiniteSequence::new(model)?;
    let precondition = precondition_b(&law, scheme, n, eps)?;
    let lhs = lhs_exceedance_exact(model, eps, scheme, n, budget)?.exact_probability;
    let rhs = rhs_bound(&law, eps, scheme, n, constant)?;
    let verdict = if !precondition.satisfied {
        TheoremVerdict::PreconditionUnmet
    } else if le_with_slack(lhs, rhs.total, INEQUALITY_SLACK) {
        TheoremVerdict::Verified
    } else {
        TheoremVerdict::Violated
    };
    Ok(TheoremCheck { precondition, lhs, rhs, verdict })
}
