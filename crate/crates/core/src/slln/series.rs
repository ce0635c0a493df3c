//! Series conditions over dyadic-type scales `m = 0, 1, …, M`.

use super::{ConditionId, ConditionReport};
use crate::blocks::checked_pow;
use crate::error::{domain, Error, Result};
use crate::maxineq::rhs::covariance_blocks;
use crate::model::marginal::Marginal;
use crate::numeric::compensated_sum;
use crate::quadrant::{positive_part, CovFunctionalResult, Method};
use crate::scheme::NormingScheme;
use crate::sequence::{worse, SequenceLaw};
use crate::transform::Transform;

fn cutoffs(max_m: u32) -> Vec<u64> {
    (0..=max_m as u64).collect()
}

fn running(terms: &[f64]) -> Vec<f64> {
    let mut acc = crate::numeric::CompensatedSum::new();
    terms
        .iter()
        .map(|t| {
            acc.add(*t);
            acc.total()
        })
        .collect()
}

/// Conditions (c), (d) and (e) for an envelope `X`:
///
/// * (c) `Σ_m C_m r^m P{|X| > b_{r^{m+1}}}`
/// * (d) `Σ_m C_m r^m Σ_{k=1}^{m+1} a_{m,k}^{−2} E X² I{|X| ≤ b_{r^k}}`
/// * (e) `Σ_m C_m r^m Σ_{k=1}^{m+1} a_{m,k}^{−2} b_{r^k}² P{|X| > b_{r^{k−1}}}`
///
/// with `C_m = Σ_{n=r^m}^{r^{m+1}−1} c_n`. Partial sums at `m = 0..=max_m`.
pub fn check_series_conditions(envelope: &Marginal, scheme: &NormingScheme, max_m: u32, tol: f64) -> Result<Vec<ConditionReport>> {
    scheme.validate()?;
    envelope.validate()?;
    let r = scheme.r() as f64;
    let levels: Result<Vec<f64>> = (0..=max_m + 1).map(|k| scheme.b_at_scale(k)).collect();
    let levels = levels?;
    let (mut c, mut d, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for m in 0..=max_m {
        let weight = scheme.c_block_sum(m)? * r.powi(m as i32);
        c.push(weight * envelope.tail_abs(levels[m as usize + 1]));
        let mut dm = Vec::with_capacity(m as usize + 1);
        let mut em = Vec::with_capacity(m as usize + 1);
        for k in 1..=m + 1 {
            let a2 = scheme.a(m, k)?.powi(2);
            let b = levels[k as usize];
            dm.push(envelope.second_moment_within(b) / a2);
            em.push(b * b * envelope.tail_abs(levels[k as usize - 1]) / a2);
        }
        d.push(weight * compensated_sum(dm));
        e.push(weight * compensated_sum(em));
    }
    let cut = cutoffs(max_m);
    Ok(vec![
        ConditionReport::new(ConditionId::C, &cut, &running(&c), tol).with_note("cutoff m; tail series of the envelope"),
        ConditionReport::new(ConditionId::D, &cut, &running(&d), tol).with_note("cutoff m; truncated second-moment series"),
        ConditionReport::new(ConditionId::E, &cut, &running(&e), tol).with_note("cutoff m; weighted tail series"),
    ])
}

/// Per-scale G/H block values for one `k`, before the block count and `a²`.
struct ScaleCov {
    g: CovFunctionalResult,
    h: CovFunctionalResult,
}

fn stationary_scale(law: &dyn SequenceLaw, scheme: &NormingScheme, k: u32) -> Result<ScaleCov> {
    let r = scheme.r();
    let inner = scheme.b_at_scale(k - 1)?;
    let outer = scheme.b_at_scale(k)?;
    let sub = (r as f64).powi(k as i32 - 1);
    let window = |span: f64, tr: &Transform| -> Result<CovFunctionalResult> {
        law.window_covariance_sum(span, tr).expect("stationary law")
    };
    let trunc = Transform::Truncate { level: inner };
    let mut g = CovFunctionalResult::exact(0.0);
    for ell in 1..r {
        let w = window(ell as f64 * sub, &trunc)?;
        g.value = g.value.max(positive_part(w.value));
        g.error_bound = g.error_bound.max(w.error_bound);
        g.method = worse(g.method, w.method);
    }
    let hw = window(sub * r as f64, &Transform::ShellMagnitude { inner, outer })?;
    let h = CovFunctionalResult { value: positive_part(hw.value), ..hw };
    Ok(ScaleCov { g, h })
}

/// Conditions (f) and (g):
/// `Σ_m C_m Σ_{k=1}^{m+1} a_{m,k}^{−2} · max_ℓ Σ_h [Σ_{i<j in sub-block} Cov(g(X_i), g(X_j))]^+`
/// and the same with full blocks and the shell magnitude `h`.
///
/// Stationary laws count pairs in floating point, so `max_m` can exceed
/// the integer index range; finite laws need length `≥ r^{max_m+1}`.
pub fn check_covariance_conditions(
    law: &dyn SequenceLaw,
    scheme: &NormingScheme,
    max_m: u32,
    tol: f64,
) -> Result<(ConditionReport, ConditionReport)> {
    scheme.validate()?;
    let r = scheme.r() as f64;
    let stationary = law.len().is_none() || law.window_covariance_sum(1.0, &Transform::Identity).is_some();
    if !stationary {
        let top = checked_pow(scheme.r(), max_m + 1)?;
        let len = law.len().unwrap_or(u64::MAX);
        if len < top {
            return Err(Error::Index { index: top as usize, len: len as usize });
        }
    } else if law.len().is_some_and(|len| (len as f64) < r.powi(max_m as i32 + 1)) {
        return domain(format!("cutoff m = {max_m} needs at least r^{} variables", max_m + 1));
    }
    let per_k: Vec<ScaleCov> = if stationary && !law.is_independent() {
        (1..=max_m + 1).map(|k| stationary_scale(law, scheme, k)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let (mut f, mut g) = (Vec::new(), Vec::new());
    let (mut f_err, mut g_err) = (0.0, 0.0);
    let mut method = Method::Exact;
    for m in 0..=max_m {
        let cm = scheme.c_block_sum(m)?;
        let (mut fm, mut gm) = (Vec::new(), Vec::new());
        if !law.is_independent() {
            for k in 1..=m + 1 {
                let a2 = scheme.a(m, k)?.powi(2);
                let (gk, hk) = if stationary {
                    let blocks = r.powi((m + 1 - k) as i32);
                    let s = &per_k[k as usize - 1];
                    let scale = |c: &CovFunctionalResult| CovFunctionalResult {
                        value: blocks * c.value,
                        method: c.method,
                        error_bound: blocks * c.error_bound,
                    };
                    (scale(&s.g), scale(&s.h))
                } else {
                    covariance_blocks(law, scheme, m, k)?
                };
                fm.push(gk.value / a2);
                gm.push(hk.value / a2);
                f_err += cm * gk.error_bound / a2;
                g_err += cm * hk.error_bound / a2;
                method = worse(method, worse(gk.method, hk.method));
            }
        }
        f.push(cm * compensated_sum(fm));
        g.push(cm * compensated_sum(gm));
    }
    let cut = cutoffs(max_m);
    let rf = ConditionReport::new(ConditionId::F, &cut, &running(&f), tol)
        .with_method(method, f_err)
        .with_note("cutoff m; truncated-covariance series over sub-blocks");
    let rg = ConditionReport::new(ConditionId::G, &cut, &running(&g), tol)
        .with_method(method, g_err)
        .with_note("cutoff m; shell-magnitude covariance series over blocks");
    Ok((rf, rg))
}
