//! The pair-weighted covariance series and its PQD simplification.

use super::{ConditionId, ConditionReport, SideCheck};
use crate::blocks::checked_pow;
use crate::error::{domain, Error, Result};
use crate::numeric::{power_sum, CompensatedSum};
use crate::quadrant::{positive_part, CovFunctionalResult, Method};
use crate::sequence::{worse, PairStructure, SequenceLaw};
use crate::transform::Transform;

/// Largest horizon evaluated term by term when `G` never saturates.
pub const PER_TERM_BUDGET: u64 = 1 << 16;

/// Horizon cap for stationary pair structures, whose weight sums are closed
/// forms and never enumerate indices.
pub const PAIR_HORIZON_CAP: u64 = 1 << 62;

fn wide_pow(r: u64, k: u32) -> Result<u64> {
    r.checked_pow(k)
        .filter(|v| *v <= PAIR_HORIZON_CAP)
        .ok_or_else(|| Error::Overflow(format!("{r}^{k} exceeds the pair horizon cap 2^62")))
}

fn check_exponents(p: f64, alpha: f64, strict_p: bool) -> Result<()> {
    let p_ok = if strict_p { p > 1.0 && p < 2.0 } else { (1.0..2.0).contains(&p) };
    if !p_ok || !(alpha > p && alpha < 2.0) {
        let range = if strict_p { "1 < p < 2" } else { "1 ≤ p < 2" };
        return domain(format!("need {range} and p < α < 2, got p = {p}, α = {alpha}"));
    }
    Ok(())
}

/// `r^{(2/α − 2/p) k − 2 (k ∨ log_r j)/α}`, the weight of pair `(i, j)` at scale `k`.
pub fn corollary_weight(k: u32, j: u64, p: f64, alpha: f64, r: u64) -> f64 {
    let rf = r as f64;
    let top = match checked_pow(r, k) {
        Ok(rk) => j <= rk,
        Err(_) => true,
    };
    let scale = if top { k as f64 } else { (j as f64).ln() / rf.ln() };
    rf.powf((2.0 / alpha - 2.0 / p) * k as f64 - 2.0 * scale / alpha)
}

/// The same weight split by cases: `r^{−2k/p}` for `j ≤ r^k`, otherwise
/// `r^{(2/α − 2/p) k} j^{−2/α}`.
pub fn corollary_weight_split(k: u32, j: u64, p: f64, alpha: f64, r: u64) -> f64 {
    let rf = r as f64;
    let inside = checked_pow(r, k).map(|rk| j <= rk).unwrap_or(true);
    if inside {
        rf.powf(-2.0 * k as f64 / p)
    } else {
        rf.powf((2.0 / alpha - 2.0 / p) * k as f64) * (j as f64).powf(-2.0 / alpha)
    }
}

/// `Σ_{j=ell+1}^{big_j} w(k, j)`: all pairs at lag `ell` with right end `≤ big_j`.
fn lag_weight_sum(k: u32, ell: u64, big_j: u64, p: f64, alpha: f64, r: u64) -> Result<f64> {
    let rf = r as f64;
    let rk = wide_pow(r, k)?;
    let inside = big_j.min(rk).saturating_sub(ell) as f64 * rf.powf(-2.0 * k as f64 / p);
    let outside = rf.powf((2.0 / alpha - 2.0 / p) * k as f64) * power_sum(2.0 / alpha, (ell + 1).max(rk + 1), big_j);
    Ok(inside + outside)
}

/// `Σ_{j=2}^{big_j} (j − 1) w(k, j)`: every pair with right end `≤ big_j`.
fn all_pairs_weight_sum(k: u32, big_j: u64, p: f64, alpha: f64, r: u64) -> Result<f64> {
    let rf = r as f64;
    let rk = wide_pow(r, k)?;
    let t = big_j.min(rk) as f64;
    let inside = t * (t - 1.0) / 2.0 * rf.powf(-2.0 * k as f64 / p);
    let s = 2.0 / alpha;
    let outside = rf.powf((s - 2.0 / p) * k as f64) * (power_sum(s - 1.0, rk + 1, big_j) - power_sum(s, rk + 1, big_j));
    Ok(inside + outside)
}

/// Representative pairs of a law: `(i, j, multiplicity class)`.
enum Pairs {
    /// Stationary lags `1..=w`, pair `(1, 1 + ℓ)`.
    Lags(u64),
    /// Every pair has the law of `(1, 2)`.
    Constant,
    /// All `i < j ≤ len`.
    All(u64),
}

fn pairs_of(law: &dyn SequenceLaw) -> Pairs {
    match law.structure() {
        PairStructure::Finite { len } => Pairs::All(len),
        PairStructure::Banded { max_lag } => Pairs::Lags(max_lag),
        PairStructure::Constant => Pairs::Constant,
    }
}

/// `r^m`; enumerated pairs stay within the index cap.
fn horizon_of(pairs: &Pairs, r: u64, m: u32) -> Result<u64> {
    match pairs {
        Pairs::All(_) => checked_pow(r, m),
        _ => wide_pow(r, m),
    }
}

fn pair_list(pairs: &Pairs, limit: u64) -> Vec<(u64, u64)> {
    match *pairs {
        Pairs::Lags(w) => (1..=w).map(|l| (1, 1 + l)).collect(),
        Pairs::Constant => vec![(1, 2)],
        Pairs::All(len) => {
            let n = len.min(limit);
            (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect()
        }
    }
}

/// Worst evaluation method seen and the error bound of the last partial sum.
#[derive(Default)]
struct Tally {
    err: f64,
    method: Option<Method>,
}

impl Tally {
    fn note(&mut self, c: &CovFunctionalResult) -> f64 {
        self.method = Some(self.method.map_or(c.method, |m| worse(m, c.method)));
        c.value
    }

    fn method(&self) -> Method {
        self.method.unwrap_or(Method::Exact)
    }
}

/// The pair-weighted series
/// `Σ_{k≥1} Σ_{1≤i<j} r^{(2/α−2/p)k − 2(k ∨ log_r j)/α} (G⁺_{ij}(r^{(k−1)/p}) + H⁺_{ij}(r^{(k−1)/p}, r^{k/p}))`
/// with positive parts taken per pair. The partial sum at cutoff `M` keeps
/// `k ≤ M` and `j ≤ r^M`.
pub fn check_corollary_condition(
    law: &dyn SequenceLaw,
    p: f64,
    alpha: f64,
    r: u64,
    max_m: u32,
    tol: f64,
) -> Result<ConditionReport> {
    check_exponents(p, alpha, false)?;
    if r < 2 || max_m == 0 {
        return domain("need r ≥ 2 and a positive cutoff");
    }
    let pairs = pairs_of(law);
    let top = horizon_of(&pairs, r, max_m)?;
    let level = |k: u32| (r as f64).powf(k as f64 / p);
    let mut tally = Tally::default();
    let mut cut = Vec::new();
    let mut vals = Vec::new();
    if law.is_independent() {
        for m in 1..=max_m {
            cut.push(m as u64);
            vals.push(0.0);
        }
        return Ok(ConditionReport::new(ConditionId::PairWeighted, &cut, &vals, tol).with_note("independent: every covariance is 0"));
    }
    let list = pair_list(&pairs, top);
    // F[k−1][pair] = G⁺ + H⁺ at scale k.
    let mut f: Vec<Vec<(f64, f64)>> = Vec::with_capacity(max_m as usize);
    for k in 1..=max_m {
        let (inner, outer) = (level(k - 1), level(k));
        let trunc = Transform::Truncate { level: inner };
        let shell = Transform::ShellMagnitude { inner, outer };
        let mut row = Vec::with_capacity(list.len());
        for &(i, j) in &list {
            let g = law.pair_covariance(i, j, &trunc)?;
            let h = law.pair_covariance(i, j, &shell)?;
            let value = positive_part(tally.note(&g)) + positive_part(tally.note(&h));
            row.push((value, g.error_bound + h.error_bound));
        }
        f.push(row);
    }
    for m in 1..=max_m {
        let big_j = horizon_of(&pairs, r, m)?;
        let mut acc = CompensatedSum::new();
        let mut err = 0.0;
        for k in 1..=m {
            let row = &f[k as usize - 1];
            match pairs {
                Pairs::Lags(_) => {
                    for (idx, &(_, j)) in list.iter().enumerate() {
                        let w = lag_weight_sum(k, j - 1, big_j, p, alpha, r)?;
                        acc.add(w * row[idx].0);
                        err += w * row[idx].1;
                    }
                }
                Pairs::Constant => {
                    let w = all_pairs_weight_sum(k, big_j, p, alpha, r)?;
                    acc.add(w * row[0].0);
                    err += w * row[0].1;
                }
                Pairs::All(_) => {
                    for (idx, &(_, j)) in list.iter().enumerate() {
                        if j <= big_j {
                            let w = corollary_weight(k, j, p, alpha, r);
                            acc.add(w * row[idx].0);
                            err += w * row[idx].1;
                        }
                    }
                }
            }
        }
        cut.push(m as u64);
        vals.push(acc.total());
        tally.err = err;
    }
    let mut rep = ConditionReport::new(ConditionId::PairWeighted, &cut, &vals, tol)
        .with_method(tally.method(), tally.err)
        .with_note("cutoff M; scales k ≤ M and pairs with j ≤ r^M");
    if let Pairs::All(len) = pairs {
        if len < top {
            rep = rep.with_note(format!("finite sequence of length {len}: later cutoffs add only new scales"));
        }
    }
    Ok(rep)
}

/// Smallest `n` with `n^{1/p} ≥ bound`; beyond it every truncation level
/// exceeds the support and `G` is constant.
fn saturation_index(bound: f64, p: f64) -> u64 {
    let mut n = bound.powf(p).ceil().max(1.0) as u64;
    while (n as f64).powf(1.0 / p) < bound {
        n += 1;
    }
    n
}

/// The PQD series `Σ_{i<j} Σ_{n≥j} n^{−1−2/α} Cov(g_{n^{1/p}}(X_i), g_{n^{1/p}}(X_j))`.
///
/// Needs `1 < p < 2`, `p < α < 2` and a pairwise PQD law. The partial sum at
/// cutoff `M` runs `n` up to `r^M`. Side checks report pairwise PQD and the
/// monotonicity `G(r^{(k−1)/p}) ≤ G(r^{k/p})` on every evaluated pair.
pub fn check_pqd_series(law: &dyn SequenceLaw, p: f64, alpha: f64, r: u64, max_m: u32, tol: f64) -> Result<ConditionReport> {
    check_exponents(p, alpha, true)?;
    if r < 2 || max_m == 0 {
        return domain("need r ≥ 2 and a positive cutoff");
    }
    if !law.is_pairwise_pqd()? {
        return Err(Error::Unsupported("the series needs a pairwise positively quadrant dependent law".into()));
    }
    let pairs = pairs_of(law);
    let top = horizon_of(&pairs, r, max_m)?;
    let mut cut = Vec::new();
    let mut vals = Vec::new();
    if law.is_independent() {
        for m in 1..=max_m {
            cut.push(m as u64);
            vals.push(0.0);
        }
        let mut rep = ConditionReport::new(ConditionId::PqdSeries, &cut, &vals, tol).with_note("independent: every covariance is 0");
        rep.side_checks.push(SideCheck { name: "pairwise PQD".into(), passed: true });
        return Ok(rep);
    }
    let bound = match pairs {
        Pairs::All(len) => {
            let mut b: Option<f64> = Some(0.0);
            for j in 1..=len {
                b = match (b, law.marginal(j)?.effective_bound()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    _ => None,
                };
            }
            b
        }
        _ => law.marginal(1)?.effective_bound(),
    };
    let n_sat = match bound {
        Some(b) => saturation_index(b, p),
        None if top <= PER_TERM_BUDGET => top + 1,
        None => return Err(Error::Budget { needed: top as u128, budget: PER_TERM_BUDGET }),
    };
    let list = pair_list(&pairs, top);
    let s = 2.0 / alpha;
    let g_at = |i: u64, j: u64, n: u64| law.pair_covariance(i, j, &Transform::Truncate { level: (n as f64).powf(1.0 / p) });
    // Multiplicity of a representative pair among pairs with j ≤ n.
    let count = |i: u64, j: u64, n: f64| -> f64 {
        match pairs {
            Pairs::Lags(_) => n - (j - i) as f64,
            Pairs::Constant => n * (n - 1.0) / 2.0,
            Pairs::All(_) => 1.0,
        }
    };
    let mut tally = Tally::default();
    let mut saturated: Vec<Option<CovFunctionalResult>> = vec![None; list.len()];
    for m in 1..=max_m {
        let big_n = horizon_of(&pairs, r, m)?;
        let mut acc = CompensatedSum::new();
        let mut err = 0.0;
        for (idx, &(i, j)) in list.iter().enumerate() {
            let direct_end = big_n.min(n_sat - 1);
            for n in j..=direct_end {
                let c = g_at(i, j, n)?;
                let w = count(i, j, n as f64) * (n as f64).powf(-1.0 - s);
                acc.add(w * tally.note(&c));
                err += w * c.error_bound;
            }
            let start = j.max(n_sat);
            if start <= big_n {
                let c = match saturated[idx] {
                    Some(c) => c,
                    None => {
                        let c = g_at(i, j, n_sat)?;
                        saturated[idx] = Some(c);
                        c
                    }
                };
                // Σ_{n=start}^{N} count(n) n^{−1−s}.
                let w = match pairs {
                    Pairs::Lags(_) => power_sum(s, start, big_n) - (j - i) as f64 * power_sum(1.0 + s, start, big_n),
                    Pairs::Constant => (power_sum(s - 1.0, start, big_n) - power_sum(s, start, big_n)) / 2.0,
                    Pairs::All(_) => power_sum(1.0 + s, start, big_n),
                };
                acc.add(w * tally.note(&c));
                err += w * c.error_bound;
            }
        }
        cut.push(m as u64);
        vals.push(acc.total());
        tally.err = err;
    }
    let mut monotone = true;
    for k in 1..=max_m {
        let lo = Transform::Truncate { level: (r as f64).powf((k - 1) as f64 / p) };
        let hi = Transform::Truncate { level: (r as f64).powf(k as f64 / p) };
        for &(i, j) in &list {
            let a = law.pair_covariance(i, j, &lo)?;
            let b = law.pair_covariance(i, j, &hi)?;
            let slack = 1e-12 * a.value.abs().max(b.value.abs()).max(1.0) + 2.0 * (a.error_bound + b.error_bound);
            monotone &= a.value <= b.value + slack;
        }
    }
    let mut rep = ConditionReport::new(ConditionId::PqdSeries, &cut, &vals, tol)
        .with_method(tally.method(), tally.err)
        .with_note(format!("cutoff M; n runs to r^M; G is constant for n ≥ {n_sat}"));
    rep.side_checks.push(SideCheck { name: "pairwise PQD".into(), passed: true });
    rep.side_checks.push(SideCheck { name: "G nondecreasing in the level".into(), passed: monotone });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::copula::{CopulaSequenceModel, CorrelationFn, DependenceSign};
    use crate::model::finite::{FiniteJointModel, FiniteModelSpec};
    use crate::model::marginal::Marginal;
    use crate::model::DEFAULT_ENUMERATION_BUDGET;
    use crate::quadrant::Evaluation;
    use crate::sequence::{FiniteSequence, StationarySequence};
    use crate::slln::Verdict;
    use proptest::prelude::*;

    fn coin() -> Marginal {
        Marginal::TwoPoint { low: -1.0, high: 1.0, p_high: 0.5 }
    }

    fn stationary(marginal: Marginal, corr: CorrelationFn, sign: DependenceSign, len: Option<u64>) -> StationarySequence {
        let m = CopulaSequenceModel::new(marginal, corr, sign).unwrap();
        StationarySequence::new(m, len, Evaluation::quadrature()).unwrap()
    }

    proptest! {
        #[test]
        fn weight_forms_agree(k in 0u32..20, j in 1u64..5_000_000, p in 1.0f64..1.9, gap in 0.01f64..0.09) {
            let alpha = (p + gap).min(1.99);
            let (a, b) = (corollary_weight(k, j, p, alpha, 2), corollary_weight_split(k, j, p, alpha, 2));
            prop_assert!((a - b).abs() <= 1e-12 * b);
            let (a, b) = (corollary_weight(k, j, p, alpha, 3), corollary_weight_split(k, j, p, alpha, 3));
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn closed_form_weight_sums_match_brute_force() {
        let (p, alpha, r) = (1.2, 1.6, 2);
        for k in 0..6 {
            for big_j in [1u64, 5, 40, 300, 5000] {
                for ell in 1..4 {
                    let brute: f64 = (ell + 1..=big_j).map(|j| corollary_weight(k, j, p, alpha, r)).sum();
                    let fast = lag_weight_sum(k, ell, big_j, p, alpha, r).unwrap();
                    assert!((brute - fast).abs() <= 1e-10 * brute.max(1e-300), "k {k} J {big_j} ℓ {ell}");
                }
                let brute: f64 = (2..=big_j).map(|j| (j - 1) as f64 * corollary_weight(k, j, p, alpha, r)).sum();
                let fast = all_pairs_weight_sum(k, big_j, p, alpha, r).unwrap();
                assert!((brute - fast).abs() <= 1e-10 * brute.max(1e-300));
            }
        }
    }

    #[test]
    fn independent_is_exactly_zero() {
        let law = stationary(Marginal::StandardGaussian, CorrelationFn::Independent, DependenceSign::Independent, None);
        let rep = check_corollary_condition(&law, 1.2, 1.6, 2, 20, 1e-6).unwrap();
        assert!(rep.values().iter().all(|v| *v == 0.0));
        let rep = check_pqd_series(&law, 1.2, 1.6, 2, 20, 1e-6).unwrap();
        assert!(rep.values().iter().all(|v| *v == 0.0));
        assert_eq!(rep.verdict, Verdict::ConvergedNumerically);
    }

    #[test]
    fn comonotone_diverges_banded_does_not() {
        let como = stationary(coin(), CorrelationFn::Geometric { phi: 1.0 }, DependenceSign::Pqd, None);
        let rep = check_corollary_condition(&como, 1.2, 1.6, 2, 25, 1e-6).unwrap();
        assert_eq!(rep.verdict, Verdict::DivergingTrend);
        let rep = check_pqd_series(&como, 1.2, 1.6, 2, 25, 1e-6).unwrap();
        assert_eq!(rep.verdict, Verdict::DivergingTrend);
        assert!(rep.side_checks_pass());

        let band = stationary(Marginal::StandardGaussian, CorrelationFn::Banded { rho: vec![0.4, 0.2] }, DependenceSign::Pqd, None);
        let rep = check_corollary_condition(&band, 1.2, 1.6, 2, 30, 1e-6).unwrap();
        assert_ne!(rep.verdict, Verdict::DivergingTrend);
        assert!(rep.is_nondecreasing());
        let rep = check_pqd_series(&band, 1.2, 1.6, 2, 36, 1e-6).unwrap();
        assert_ne!(rep.verdict, Verdict::DivergingTrend);
        assert!(rep.is_nondecreasing());
        assert!(rep.side_checks_pass());
    }

    #[test]
    fn pqd_series_matches_direct_double_sum_on_a_finite_model() {
        let spec = FiniteModelSpec::Comonotone { marginal: Marginal::Discrete { values: vec![-1.0, 0.5, 2.0], probs: vec![0.3, 0.5, 0.2] }, length: 4 };
        let model = FiniteJointModel::build(&spec, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let law = FiniteSequence::new(&model).unwrap();
        let (p, alpha) = (1.3, 1.7);
        let rep = check_pqd_series(&law, p, alpha, 2, 6, 1e-6).unwrap();
        for (m, v) in rep.values().iter().enumerate() {
            let big_n = 1u64 << (m + 1);
            let mut direct = 0.0;
            for i in 1..=4u64 {
                for j in i + 1..=4 {
                    for n in j..=big_n {
                        let tr = Transform::Truncate { level: (n as f64).powf(1.0 / p) };
                        direct += (n as f64).powf(-1.0 - 2.0 / alpha) * law.pair_covariance(i, j, &tr).unwrap().value;
                    }
                }
            }
            assert!((v - direct).abs() <= 1e-12 * direct.abs().max(1e-300), "M {}: {v} vs {direct}", m + 1);
        }
        assert!(rep.side_checks_pass());
    }

    #[test]
    fn finite_and_stationary_pair_sums_agree() {
        let spec = FiniteModelSpec::Comonotone { marginal: coin(), length: 8 };
        let model = FiniteJointModel::build(&spec, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let fin = FiniteSequence::new(&model).unwrap();
        let st = stationary(coin(), CorrelationFn::Geometric { phi: 1.0 }, DependenceSign::Pqd, Some(8));
        let a = check_corollary_condition(&fin, 1.0, 1.5, 2, 3, 1e-6).unwrap();
        let b = check_corollary_condition(&st, 1.0, 1.5, 2, 3, 1e-6).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
        let a = check_pqd_series(&fin, 1.2, 1.5, 2, 3, 1e-6).unwrap();
        let b = check_pqd_series(&st, 1.2, 1.5, 2, 3, 1e-6).unwrap();
        // The finite series stops adding pairs at length 8 = r^3; equal up to M = 3.
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let law = stationary(Marginal::StandardGaussian, CorrelationFn::Banded { rho: vec![0.3] }, DependenceSign::Pqd, None);
        assert!(check_pqd_series(&law, 1.0, 1.5, 2, 5, 1e-6).is_err());
        assert!(check_pqd_series(&law, 1.5, 1.4, 2, 5, 1e-6).is_err());
        assert!(check_corollary_condition(&law, 1.2, 2.0, 2, 5, 1e-6).is_err());
        let nqd = stationary(Marginal::StandardGaussian, CorrelationFn::Banded { rho: vec![-0.3] }, DependenceSign::Nqd, None);
        assert!(matches!(check_pqd_series(&nqd, 1.2, 1.5, 2, 5, 1e-6), Err(Error::Unsupported(_))));
        let pareto = CopulaSequenceModel::new(Marginal::SymmetricPareto { tail_index: 1.8 }, CorrelationFn::Banded { rho: vec![0.3] }, DependenceSign::Pqd).unwrap();
        let heavy = StationarySequence::new(pareto, None, Evaluation::MonteCarlo { samples: 2000, seed: 1 }).unwrap();
        assert!(matches!(check_pqd_series(&heavy, 1.2, 1.5, 2, 20, 1e-6), Err(Error::Budget { .. })));
    }
}
