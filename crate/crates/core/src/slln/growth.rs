use super::{ConditionId, ConditionReport};
use crate::error::{domain, Result};
use crate::maxineq::{condition_b_prime, precondition_b};
use crate::model::marginal::Marginal;
use crate::scheme::NormingScheme;
use crate::sequence::SequenceLaw;

fn check_range(n_range: std::ops::RangeInclusive<u32>) -> Result<Vec<u32>> {
    let ns: Vec<u32> = n_range.collect();
    if ns.is_empty() {
        return domain("empty range of n");
    }
    Ok(ns)
}

/// Ratio sequence `Σ_k a_{n,k} / b_{r^n}` for (a), which should stay bounded.
/// Power schemes also check it against the closed-form geometric bound.
pub fn check_condition_a(scheme: &NormingScheme, n_range: std::ops::RangeInclusive<u32>, tol: f64) -> Result<ConditionReport> {
    scheme.validate()?;
    let ns = check_range(n_range)?;
    let cut: Vec<u64> = ns.iter().map(|n| *n as u64).collect();
    let a: Vec<f64> = ns.iter().map(|n| scheme.growth_ratio(*n)).collect::<Result<_>>()?;
    let mut rep = ConditionReport::new(ConditionId::A, &cut, &a, tol).with_note("cutoff n; value Σ_k a_{n,k} / b_{r^n}");
    if let NormingScheme::Power { p, alpha, r } = scheme {
        let bound = crate::scheme::power_growth_bound(*p, *alpha, *r);
        rep = rep.with_note(format!("closed-form bound {bound}"));
        rep.side_checks.push(super::SideCheck {
            name: "ratio within the closed-form bound".into(),
            passed: a.iter().all(|v| *v <= bound * (1.0 + 1e-12)),
        });
    }
    Ok(rep)
}

/// Reports for (a) and for (b'), `Σ_k r^k E|X| I{|X| > b_{r^{k−1}}} / b_{r^n}`,
/// which should tend to 0. Both are finite-horizon diagnostics.
pub fn check_growth_conditions(
    scheme: &NormingScheme,
    envelope: &Marginal,
    n_range: std::ops::RangeInclusive<u32>,
    tol: f64,
) -> Result<(ConditionReport, ConditionReport)> {
    envelope.validate()?;
    let ra = check_condition_a(scheme, n_range.clone(), tol)?;
    let ns = check_range(n_range)?;
    let cut: Vec<u64> = ns.iter().map(|n| *n as u64).collect();
    let b: Vec<f64> = ns
        .iter()
        .map(|&n| Ok(condition_b_prime(envelope, scheme, n)? / scheme.b_at_scale(n)?))
        .collect::<Result<_>>()?;
    let rb = ConditionReport::new(ConditionId::BPrime, &cut, &b, tol)
        .with_note("cutoff n; value Σ_k r^k E|X| I{|X| > b_{r^{k−1}}} / b_{r^n}, should tend to 0");
    Ok((ra, rb))
}

/// `T_b(n) / b_{r^n}` for the per-variable condition (b).
pub fn check_condition_b(
    law: &dyn SequenceLaw,
    scheme: &NormingScheme,
    n_range: std::ops::RangeInclusive<u32>,
    tol: f64,
) -> Result<ConditionReport> {
    let ns = check_range(n_range)?;
    let cut: Vec<u64> = ns.iter().map(|n| *n as u64).collect();
    let mut vals = Vec::with_capacity(ns.len());
    for &n in &ns {
        vals.push(precondition_b(law, scheme, n, 1.0)?.tb / scheme.b_at_scale(n)?);
    }
    Ok(ConditionReport::new(ConditionId::B, &cut, &vals, tol).with_note("cutoff n; value T_b(n) / b_{r^n}, should tend to 0"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::copula::{CopulaSequenceModel, CorrelationFn, DependenceSign};
    use crate::quadrant::Evaluation;
    use crate::sequence::StationarySequence;
    use crate::slln::Verdict;

    #[test]
    fn power_scheme_ratio_is_bounded_and_settles() {
        let s = NormingScheme::power(1.0, 1.5, 2).unwrap();
        let coin = Marginal::TwoPoint { low: -1.0, high: 1.0, p_high: 0.5 };
        let (a, b) = check_growth_conditions(&s, &coin, 0..=60, 1e-6).unwrap();
        assert!(a.side_checks_pass());
        assert_eq!(a.verdict, Verdict::ConvergedNumerically);
        // Bounded envelope: every level b_{r^{k−1}} ≥ 1 is above |X|.
        assert!(b.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lp_envelope_ratio_tends_to_zero() {
        let s = NormingScheme::power(1.2, 1.6, 2).unwrap();
        let pareto = Marginal::SymmetricPareto { tail_index: 1.5 };
        let (_, b) = check_growth_conditions(&s, &pareto, 0..=80, 1e-6).unwrap();
        let v = b.values();
        assert!(v.windows(2).skip(5).all(|w| w[1] < w[0]));
        assert!(v.last().unwrap() < &1e-3);
    }

    #[test]
    fn per_variable_condition_matches_envelope_for_identical_laws() {
        let s = NormingScheme::power(1.2, 1.6, 2).unwrap();
        let m = CopulaSequenceModel::new(Marginal::StandardGaussian, CorrelationFn::Banded { rho: vec![0.3] }, DependenceSign::Pqd)
            .unwrap();
        let law = StationarySequence::new(m, None, Evaluation::quadrature()).unwrap();
        let rb = check_condition_b(&law, &s, 0..=10, 1e-6).unwrap();
        let (_, env) = check_growth_conditions(&s, &Marginal::StandardGaussian, 0..=10, 1e-6).unwrap();
        for (x, y) in rb.values().iter().zip(env.values()) {
            assert!((x - y).abs() <= 1e-12 * y.max(1e-300));
        }
    }
}
