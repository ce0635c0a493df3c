use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_epsilon, check_length};
use crate::blocks::checked_pow;
use crate::error::{Error, Result};
use crate::model::domination::DominationCertificate;
use crate::model::marginal::Marginal;
use crate::numeric::compensated_sum;
use crate::quadrant::{positive_part, CovFunctionalResult, Method};
use crate::scheme::NormingScheme;
use crate::sequence::{worse, PairStructure, SequenceLaw};
use crate::transform::Transform;

/// Contributions of one scale `k`, already divided by `a_{n,k}²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaleTerms {
    pub k: u32,
    pub a: f64,
    pub moment: f64,
    pub g: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TheoremRhsBreakdown {
    pub r: u64,
    pub n: u32,
    pub tail_term: f64,
    pub moment_term: f64,
    pub g_term: f64,
    pub h_term: f64,
    pub constant: f64,
    pub epsilon: f64,
    pub total: f64,
    pub per_scale: Vec<ScaleTerms>,
    /// Weakest evaluation method among the covariance functionals.
    pub method: Method,
    /// Accumulated error estimate of `g_term + h_term`.
    pub error_bound: f64,
}

impl TheoremRhsBreakdown {
    fn assemble(
        scheme: &NormingScheme,
        n: u32,
        eps: f64,
        constant: f64,
        tail_term: f64,
        per_scale: Vec<ScaleTerms>,
        method: Method,
        error_bound: f64,
    ) -> Self {
        let moment_term = compensated_sum(per_scale.iter().map(|s| s.moment));
        let g_term = compensated_sum(per_scale.iter().map(|s| s.g));
        let h_term = compensated_sum(per_scale.iter().map(|s| s.h));
        let total = tail_term + constant / (eps * eps) * (moment_term + g_term + h_term);
        Self {
            r: scheme.r(),
            n,
            tail_term,
            moment_term,
            g_term,
            h_term,
            constant,
            epsilon: eps,
            total,
            per_scale,
            method,
            error_bound,
        }
    }
}

fn check_constant(constant: f64) -> Result<()> {
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::Domain(format!("constant must be positive and finite, got {constant}")));
    }
    Ok(())
}

/// `Σ_h [Σ_{pairs in [1 + h r^k, last_h]} Cov(φ(X_i), φ(X_j))]^+` with
/// `last_h = h r^k + span`. Translation-invariant laws evaluate one block.
fn block_positive_sum(
    law: &dyn SequenceLaw,
    r: u64,
    n: u32,
    k: u32,
    span: u64,
    tr: &Transform,
) -> Result<CovFunctionalResult> {
    let width = checked_pow(r, k)?;
    let blocks = checked_pow(r, n + 1 - k)?;
    if span < 2 || law.is_independent() {
        return Ok(CovFunctionalResult::exact(0.0));
    }
    if !matches!(law.structure(), PairStructure::Finite { .. }) {
        let one = law.block_covariance_sum(1, span, tr)?;
        let c = blocks as f64;
        return Ok(CovFunctionalResult {
            value: c * positive_part(one.value),
            method: one.method,
            error_bound: c * one.error_bound,
        });
    }
    let parts: Result<Vec<CovFunctionalResult>> = (0..blocks)
        .into_par_iter()
        .map(|h| law.block_covariance_sum(1 + h * width, h * width + span, tr))
        .collect();
    let parts = parts?;
    Ok(CovFunctionalResult {
        value: compensated_sum(parts.iter().map(|p| positive_part(p.value))),
        method: parts.iter().fold(Method::Exact, |m, p| worse(m, p.method)),
        error_bound: parts.iter().map(|p| p.error_bound).sum(),
    })
}

/// G- and H-block terms of scale `k`, not yet divided by `a²`.
pub(crate) fn covariance_blocks(law: &dyn SequenceLaw, scheme: &NormingScheme, n: u32, k: u32) -> Result<(CovFunctionalResult, CovFunctionalResult)> {
    let r = scheme.r();
    let inner = scheme.b_at_scale(k - 1)?;
    let outer = scheme.b_at_scale(k)?;
    let sub = checked_pow(r, k - 1)?;
    let trunc = Transform::Truncate { level: inner };
    let per_ell: Result<Vec<CovFunctionalResult>> = (1..r).map(|ell| block_positive_sum(law, r, n, k, ell * sub, &trunc)).collect();
    let per_ell = per_ell?;
    // The max is 1-Lipschitz, so the largest error bound covers it.
    let g = CovFunctionalResult {
        value: per_ell.iter().map(|c| c.value).fold(0.0, f64::max),
        method: per_ell.iter().fold(Method::Exact, |m, c| worse(m, c.method)),
        error_bound: per_ell.iter().map(|c| c.error_bound).fold(0.0, f64::max),
    };
    let shell = Transform::ShellMagnitude { inner, outer };
    let h = block_positive_sum(law, r, n, k, sub * r, &shell)?;
    Ok((g, h))
}

/// The four-term bound with constant `constant`.
///
/// The law must cover indices up to `r^{n+1}`.
pub fn rhs_bound(law: &dyn SequenceLaw, eps: f64, scheme: &NormingScheme, n: u32, constant: f64) -> Result<TheoremRhsBreakdown> {
    check_epsilon(eps)?;
    check_constant(constant)?;
    scheme.validate()?;
    let top = check_length(law, scheme.r(), n)?;
    let top_level = scheme.b_at_scale(n + 1)?;
    let tail_term = if top > 1 { law.marginal_sum(1, top - 1, &|m: &Marginal| Ok(m.tail_abs(top_level)))? } else { 0.0 };
    let mut per_scale = Vec::with_capacity(n as usize + 1);
    let mut method = Method::Exact;
    let mut error_bound = 0.0;
    for k in 1..=n + 1 {
        let a = scheme.a(n, k)?;
        let (lo, hi) = (scheme.b_at_scale(k - 1)?, scheme.b_at_scale(k)?);
        let moment = law.marginal_sum(1, top, &|m: &Marginal| Ok(m.second_moment_within(hi) + hi * hi * m.tail_abs(lo)))?;
        let (g, h) = covariance_blocks(law, scheme, n, k)?;
        method = worse(worse(method, g.method), h.method);
        let a2 = a * a;
        error_bound += (g.error_bound + h.error_bound) / a2;
        per_scale.push(ScaleTerms { k, a, moment: moment / a2, g: g.value / a2, h: h.value / a2 });
    }
    Ok(TheoremRhsBreakdown::assemble(scheme, n, eps, constant, tail_term, per_scale, method, error_bound))
}

/// Envelope form of the bound under `P{|X_j| > t} ≤ C P{|X| > t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DominatedRhs {
    /// Terms in the same layout as the direct bound. The tail and moment
    /// terms carry the factors `r C r^n` and `2` that make them dominate
    /// their per-variable counterparts.
    pub breakdown: TheoremRhsBreakdown,
    pub domination_constant: f64,
    /// `P{|X| > b_{r^{n+1}}}`.
    pub envelope_tail: f64,
    /// `Σ_k a_{n,k}^{−2} E X² I{|X| ≤ b_{r^k}}`.
    pub envelope_second_moment: f64,
    /// `Σ_k (b_{r^k}² / a_{n,k}²) P{|X| > b_{r^{k−1}}}`.
    pub envelope_weighted_tail: f64,
}

/// Envelope terms plus the G/H terms of `law`.
///
/// Since `Σ_{k<r^{n+1}} P{|X_k| > t} ≤ r C r^n P{|X| > t}` and
/// `E X_j² I{|X_j| ≤ t} ≤ C (E X² I{|X| ≤ t} + t² P{|X| > t})`, the envelope
/// tail term is `r C r^n P{|X| > b_{r^{n+1}}}` and the envelope moment term
/// is `r C r^n (Σ_k a^{−2} E X² I{|X| ≤ b_{r^k}} + 2 Σ_k b_{r^k}² a^{−2} P{|X| > b_{r^{k−1}}})`,
/// each at least its direct counterpart.
pub fn rhs_bound_dominated(
    cert: &DominationCertificate,
    law: &dyn SequenceLaw,
    eps: f64,
    scheme: &NormingScheme,
    n: u32,
    constant: f64,
) -> Result<DominatedRhs> {
    check_epsilon(eps)?;
    check_constant(constant)?;
    scheme.validate()?;
    if !cert.feasible || !cert.constant.is_finite() {
        return Err(Error::Domain("domination certificate is infeasible".into()));
    }
    check_length(law, scheme.r(), n)?;
    let env = &cert.envelope;
    let dom = cert.constant;
    let r = scheme.r() as f64;
    let count = r * dom * r.powi(n as i32);
    let envelope_tail = env.tail_abs(scheme.b_at_scale(n + 1)?);
    let mut second = Vec::new();
    let mut weighted = Vec::new();
    let mut per_scale = Vec::with_capacity(n as usize + 1);
    let mut method = Method::Exact;
    let mut error_bound = 0.0;
    for k in 1..=n + 1 {
        let a = scheme.a(n, k)?;
        let a2 = a * a;
        let (lo, hi) = (scheme.b_at_scale(k - 1)?, scheme.b_at_scale(k)?);
        let s = env.second_moment_within(hi) / a2;
        let w = hi * hi * env.tail_abs(lo) / a2;
        second.push(s);
        weighted.push(w);
        let (g, h) = covariance_blocks(law, scheme, n, k)?;
        method = worse(worse(method, g.method), h.method);
        error_bound += (g.error_bound + h.error_bound) / a2;
        per_scale.push(ScaleTerms { k, a, moment: count * (s + 2.0 * w), g: g.value / a2, h: h.value / a2 });
    }
    let breakdown =
        TheoremRhsBreakdown::assemble(scheme, n, eps, constant, count * envelope_tail, per_scale, method, error_bound);
    Ok(DominatedRhs {
        breakdown,
        domination_constant: dom,
        envelope_tail,
        envelope_second_moment: compensated_sum(second),
        envelope_weighted_tail: compensated_sum(weighted),
    })
}

/// `Σ_{k=1}^{n+1} r^k E|X| I{|X| > b_{r^{k−1}}}` for an envelope `X`; times
/// the domination constant it bounds `T_b`.
pub fn condition_b_prime(envelope: &Marginal, scheme: &NormingScheme, n: u32) -> Result<f64> {
    let r = scheme.r() as f64;
    let terms: Result<Vec<f64>> = (1..=n + 1)
        .map(|k| Ok(r.powi(k as i32) * envelope.abs_moment_above(scheme.b_at_scale(k - 1)?)))
        .collect();
    Ok(compensated_sum(terms?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxineq::precondition_b;
    use crate::model::copula::{CopulaSequenceModel, CorrelationFn, DependenceSign};
    use crate::model::domination::check_domination;
    use crate::model::finite::tests::{coin, pqd_pair};
    use crate::model::finite::{FiniteJointModel, FiniteModelSpec};
    use crate::model::DEFAULT_ENUMERATION_BUDGET;
    use crate::oracle::exact_pair_covariance;
    use crate::quadrant::Evaluation;
    use crate::sequence::{FiniteSequence, StationarySequence};
    use proptest::prelude::*;

    fn build(spec: &FiniteModelSpec) -> FiniteJointModel {
        FiniteJointModel::build(spec, DEFAULT_ENUMERATION_BUDGET).unwrap()
    }

    fn scheme() -> NormingScheme {
        NormingScheme::power(1.0, 1.5, 2).unwrap()
    }

    #[test]
    fn independent_model_has_no_covariance_terms() {
        let m = build(&FiniteModelSpec::Iid { marginal: Marginal::TwoPoint { low: -1.0, high: 10.0, p_high: 0.25 }, length: 8 });
        let law = FiniteSequence::new(&m).unwrap();
        let rhs = rhs_bound(&law, 1.0, &scheme(), 2, 1.0).unwrap();
        assert_eq!(rhs.g_term, 0.0);
        assert_eq!(rhs.h_term, 0.0);
        assert_eq!(rhs.method, Method::Exact);
        assert!(rhs.tail_term > 0.0 && rhs.moment_term > 0.0);
    }

    #[test]
    fn bounded_model_has_no_tail() {
        // |X| ≤ 1 = b_1.
        let m = build(&FiniteModelSpec::Repeat { block: Box::new(pqd_pair()), copies: 2 });
        let law = FiniteSequence::new(&m).unwrap();
        let rhs = rhs_bound(&law, 1.0, &scheme(), 1, 1.0).unwrap();
        assert_eq!(rhs.tail_term, 0.0);
        // Only E X² I{|X| ≤ b} survives: 4 variables, a_{1,1} = 2^{1/1.5 + 1/3}, a_{1,2} = 2^{1/1.5 + 2/3}.
        let want: f64 = (1..=2).map(|k| 4.0 / scheme().a(1, k).unwrap().powi(2)).sum();
        assert!((rhs.moment_term - want).abs() < 1e-14);
    }

    /// Every term recomputed from enumerated pair covariances.
    #[test]
    fn pqd_copies_match_enumeration() {
        let m = build(&FiniteModelSpec::Repeat { block: Box::new(pqd_pair()), copies: 2 });
        let law = FiniteSequence::new(&m).unwrap();
        let s = scheme();
        let rhs = rhs_bound(&law, 0.5, &s, 1, 3.0).unwrap();
        let cov = |i: usize, j: usize, tr: Transform| exact_pair_covariance(&m, i, j, &tr, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let (b0, b1, b2) = (1.0, 2.0, 4.0);
        // k = 1: sub-blocks {1}, {3} carry no pairs; blocks {1,2}, {3,4}.
        let h1 = positive_part(cov(0, 1, Transform::ShellMagnitude { inner: b0, outer: b1 }))
            + positive_part(cov(2, 3, Transform::ShellMagnitude { inner: b0, outer: b1 }));
        // k = 2: sub-block [1, 2]; block [1, 4].
        let g2 = positive_part(cov(0, 1, Transform::Truncate { level: b1 }));
        let mut all = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                all += cov(i, j, Transform::ShellMagnitude { inner: b1, outer: b2 });
            }
        }
        let (a1, a2) = (s.a(1, 1).unwrap(), s.a(1, 2).unwrap());
        assert_eq!(rhs.per_scale[0].g, 0.0);
        assert!((rhs.per_scale[0].h - h1 / (a1 * a1)).abs() < 1e-15);
        assert!((rhs.per_scale[1].g - g2 / (a2 * a2)).abs() < 1e-15);
        assert!((rhs.per_scale[1].h - positive_part(all) / (a2 * a2)).abs() < 1e-15);
        // Values on [−1, 1] never reach the shells above b_0 = 1.
        assert_eq!(rhs.h_term, 0.0);
        // Cov of the coupled coins: 0.8 − 0.2 = 0.6.
        assert!((rhs.g_term - 0.6 / (a2 * a2)).abs() < 1e-15);
        let want_total = rhs.tail_term + 3.0 / 0.25 * (rhs.moment_term + rhs.g_term + rhs.h_term);
        assert!((rhs.total - want_total).abs() < 1e-13);
    }

    #[test]
    fn stationary_blocks_match_the_finite_path() {
        let s = NormingScheme::power(1.2, 1.6, 2).unwrap();
        let marginal = Marginal::Discrete { values: vec![-3.0, -1.0, 0.5, 2.5], probs: vec![0.1, 0.3, 0.4, 0.2] };
        let model = CopulaSequenceModel::new(
            marginal.clone(),
            CorrelationFn::Banded { rho: vec![0.4] },
            DependenceSign::Pqd,
        )
        .unwrap();
        let stat = StationarySequence::new(model, Some(8), Evaluation::Exact).unwrap();
        let rhs = rhs_bound(&stat, 1.0, &s, 2, 1.0).unwrap();
        // Brute force over every block with the pair laws of the same sequence.
        let mut g = 0.0;
        let mut h = 0.0;
        for k in 1..=3u32 {
            let (lo, hi) = (s.b_at_scale(k - 1).unwrap(), s.b_at_scale(k).unwrap());
            let w = 2u64.pow(k);
            let a2 = s.a(2, k).unwrap().powi(2);
            let block = |start: u64, end: u64, tr: &Transform| {
                let mut acc = 0.0;
                for i in start..=end {
                    for j in i + 1..=end {
                        acc += stat.pair_covariance(i, j, tr).unwrap().value;
                    }
                }
                positive_part(acc)
            };
            let blocks = 2u64.pow(3 - k);
            g += (0..blocks).map(|b| block(1 + b * w, b * w + w / 2, &Transform::Truncate { level: lo })).sum::<f64>() / a2;
            h += (0..blocks)
                .map(|b| block(1 + b * w, b * w + w, &Transform::ShellMagnitude { inner: lo, outer: hi }))
                .sum::<f64>()
                / a2;
        }
        assert!((rhs.g_term - g).abs() < 1e-12 * g.max(1.0));
        assert!((rhs.h_term - h).abs() < 1e-12 * h.max(1.0));
        assert!(rhs.g_term > 0.0);
    }

    #[test]
    fn dominated_collapse_for_identical_laws() {
        let marginal = Marginal::TwoPoint { low: -0.5, high: 3.0, p_high: 0.3 };
        let m = build(&FiniteModelSpec::Iid { marginal: marginal.clone(), length: 8 });
        let law = FiniteSequence::new(&m).unwrap();
        let s = scheme();
        let cert = check_domination(&[marginal.clone()], &marginal, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(cert.constant, 1.0);
        let dom = rhs_bound_dominated(&cert, &law, 1.0, &s, 2, 1.0).unwrap();
        let direct = rhs_bound(&law, 1.0, &s, 2, 1.0).unwrap();
        let rn = 4.0;
        let collapsed = 2.0 * rn * (dom.envelope_second_moment + dom.envelope_weighted_tail);
        assert!((direct.moment_term - collapsed).abs() < 1e-14 * collapsed);
        assert!((direct.tail_term - (2.0 * rn - 1.0) * dom.envelope_tail).abs() < 1e-15);
        assert!(dom.breakdown.total >= direct.total);
        assert_eq!(dom.breakdown.g_term, direct.g_term);
        // Identical laws: T_b equals the envelope sum exactly.
        let tb = precondition_b(&law, &s, 2, 1.0).unwrap().tb;
        assert!((tb - condition_b_prime(&marginal, &s, 2).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn bounded_envelope_and_pareto_envelope() {
        let s = scheme();
        let coin_m = build(&FiniteModelSpec::Iid { marginal: coin(), length: 4 });
        let law = FiniteSequence::new(&coin_m).unwrap();
        let cert = check_domination(&[coin()], &coin(), &[0.5, 1.0]).unwrap();
        let dom = rhs_bound_dominated(&cert, &law, 1.0, &s, 1, 1.0).unwrap();
        assert_eq!(dom.envelope_tail, 0.0);
        assert_eq!(dom.envelope_weighted_tail, 0.0);
        assert!(dom.envelope_second_moment > 0.0);

        // Pareto envelope at p = 1.2: closed forms against numeric integration.
        let s = NormingScheme::power(1.2, 1.6, 2).unwrap();
        let pareto = Marginal::SymmetricPareto { tail_index: 1.5 };
        let cert = DominationCertificate {
            constant: 1.0,
            envelope: pareto.clone(),
            checked_grid: vec![],
            feasible: true,
            exact: true,
        };
        let dom = rhs_bound_dominated(&cert, &law, 1.0, &s, 1, 1.0).unwrap();
        assert!(dom.breakdown.total.is_finite());
        let density = |x: f64| 1.5 * x.powf(-2.5);
        for k in 1..=2 {
            let t = s.b_at_scale(k).unwrap();
            let closed = pareto.second_moment_within(t);
            // E X² I{|X| ≤ t} = ∫_1^t x² · 1.5 x^{−2.5} dx.
            let numeric = crate::numeric::integrate_adaptive(&|x| x * x * density(x), 1.0, t, 1e-12);
            assert!((closed - numeric).abs() < 1e-9);
        }
        let bad = DominationCertificate { feasible: false, ..cert };
        assert!(rhs_bound_dominated(&bad, &law, 1.0, &s, 1, 1.0).is_err());
    }

    #[test]
    fn rejects_short_laws_and_bad_constants() {
        let m = build(&FiniteModelSpec::Iid { marginal: coin(), length: 3 });
        let law = FiniteSequence::new(&m).unwrap();
        assert!(matches!(rhs_bound(&law, 1.0, &scheme(), 1, 1.0), Err(Error::Index { .. })));
        let m = build(&FiniteModelSpec::Iid { marginal: coin(), length: 4 });
        let law = FiniteSequence::new(&m).unwrap();
        assert!(rhs_bound(&law, 1.0, &scheme(), 1, 0.0).is_err());
        assert!(rhs_bound(&law, 0.0, &scheme(), 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn terms_are_nonnegative_and_total_decreases_in_eps(
            p_high in 0.05f64..0.95, high in 0.5f64..6.0, eps in 0.1f64..5.0, scale in 1.01f64..4.0,
        ) {
            let m = build(&FiniteModelSpec::Repeat {
                block: Box::new(FiniteModelSpec::Comonotone {
                    marginal: Marginal::TwoPoint { low: -1.0, high, p_high },
                    length: 2,
                }),
                copies: 2,
            });
            let law = FiniteSequence::new(&m).unwrap();
            let s = scheme();
            let a = rhs_bound(&law, eps, &s, 1, 2.0).unwrap();
            let b = rhs_bound(&law, eps * scale, &s, 1, 2.0).unwrap();
            for t in [a.tail_term, a.moment_term, a.g_term, a.h_term] {
                prop_assert!(t >= 0.0);
            }
            prop_assert!(b.total <= a.total);
        }
    }
}
