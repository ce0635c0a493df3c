//! Minimal constants in the moment-inequality family.
//!
//! For each shell `(L, K)` and index range `[m, n]` the report gives the
//! smallest `C` making each inequality hold on that range:
//!
//! * 3.7: `|Σ_{i<j} Cov(g_L(X_i), g_L(X_j))| ≤ C Σ E g_L(X_i)²`
//! * 3.8: the same for `f`, `f⁺` and `f⁻` of the shell
//! * 3.10: `E(Σ (φ(X_i) − E φ(X_i)))² ≤ C Σ Var φ(X_i)` over the family
//! * 3.11: `|Σ_{i<j} Cov(φ(X_i), φ(X_j))| ≤ C Σ E φ(X_i)²` over the family
//!
//! where the family is `g_L, f, f⁺, f⁻, −f⁺`.

use serde::{Deserialize, Serialize};

use super::{ConditionId, ConditionReport, SideCheck};
use crate::error::{domain, Result};
use crate::quadrant::Method;
use crate::scheme::NormingScheme;
use crate::sequence::{worse, SequenceLaw};
use crate::transform::Transform;

const H_SLACK: f64 = 1e-12;

/// One inequality on one shell, range and transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentEntry {
    pub condition: ConditionId,
    pub inner: f64,
    pub outer: f64,
    pub start: u64,
    pub end: u64,
    pub transform: Transform,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; infinite when `rhs = 0 < lhs`.
    pub minimal_c: f64,
}

/// `|Σ_block Cov(h(X_i), h(X_j))| ≤ 5 C Σ_block E f(X_i)²` with `C` the
/// largest of the three shell constants on the same range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HRelation {
    pub inner: f64,
    pub outer: f64,
    pub start: u64,
    pub end: u64,
    pub h_covariance_abs: f64,
    pub shell_second_moment: f64,
    pub constant: f64,
    pub bound: f64,
    /// `None` when the constant is infinite and the relation is vacuous.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentFamilyReport {
    pub entries: Vec<MomentEntry>,
    pub h_relations: Vec<HRelation>,
    /// One report per inequality: cutoff is the range length, value the
    /// running maximum of the minimal constant over ranges up to that length.
    pub reports: Vec<ConditionReport>,
}

impl MomentFamilyReport {
    pub fn h_relations_hold(&self) -> bool {
        self.h_relations.iter().all(|h| h.holds != Some(false))
    }
}

/// Every range `1 ≤ m ≤ n ≤ len`.
pub fn default_ranges(len: u64) -> Vec<(u64, u64)> {
    (1..=len).flat_map(|m| (m..=len).map(move |n| (m, n))).collect()
}

/// Shells `(b_{r^{k−1}}, b_{r^k})` for `k = 1..=max_k`.
pub fn scheme_shells(scheme: &NormingScheme, max_k: u32) -> Result<Vec<(f64, f64)>> {
    (1..=max_k).map(|k| Ok((scheme.b_at_scale(k - 1)?, scheme.b_at_scale(k)?))).collect()
}

fn minimal_constant(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

struct Sums {
    cov: f64,
    square: f64,
    var: f64,
    err: f64,
    method: Method,
}

fn sums(law: &dyn SequenceLaw, start: u64, end: u64, tr: &Transform) -> Result<Sums> {
    let cov = law.block_covariance_sum(start, end, tr)?;
    let square = law.marginal_sum(start, end, &|m| m.expect_square(tr))?;
    let var = law.marginal_sum(start, end, &|m| {
        let e = m.expect(tr)?;
        Ok((m.expect_square(tr)? - e * e).max(0.0))
    })?;
    Ok(Sums { cov: cov.value, square, var, err: cov.error_bound, method: cov.method })
}

fn family(inner: f64, outer: f64) -> [Transform; 5] {
    [
        Transform::Truncate { level: inner },
        Transform::ShellSigned { inner, outer },
        Transform::ShellPositive { inner, outer },
        Transform::ShellNegative { inner, outer },
        Transform::NegatedShellPositive { inner, outer },
    ]
}

/// Minimal constants for every shell and range, the `H` relation and one
/// trend report per inequality.
pub fn check_moment_family(
    law: &dyn SequenceLaw,
    shells: &[(f64, f64)],
    ranges: &[(u64, u64)],
    tol: f64,
) -> Result<MomentFamilyReport> {
    if shells.is_empty() || ranges.is_empty() {
        return domain("need at least one shell and one range");
    }
    let mut entries = Vec::new();
    let mut h_relations = Vec::new();
    let mut method = Method::Exact;
    let mut err: f64 = 0.0;
    // Per condition: (range length, minimal C).
    let ids = [
        ConditionId::TruncatedCovariance,
        ConditionId::ShellCovariance,
        ConditionId::CenteredSecondMoment,
        ConditionId::MonotoneCovariance,
    ];
    let mut by_len: Vec<Vec<(u64, f64)>> = vec![Vec::new(); ids.len()];
    for &(inner, outer) in shells {
        for &(start, end) in ranges {
            let fam = family(inner, outer);
            let s: Vec<Sums> = fam.iter().map(|tr| sums(law, start, end, tr)).collect::<Result<_>>()?;
            for x in &s {
                method = worse(method, x.method);
                err = err.max(x.err);
            }
            let mut push = |cid: ConditionId, idx: usize, lhs: f64, rhs: f64| -> f64 {
                let c = minimal_constant(lhs, rhs);
                entries.push(MomentEntry { condition: cid, inner, outer, start, end, transform: fam[idx], lhs, rhs, minimal_c: c });
                c
            };
            let len = end - start + 1;
            let c37 = push(ConditionId::TruncatedCovariance, 0, s[0].cov.abs(), s[0].square);
            let c38 = [1, 2, 3].map(|i| push(ConditionId::ShellCovariance, i, s[i].cov.abs(), s[i].square));
            let c310 = (0..5).map(|i| push(ConditionId::CenteredSecondMoment, i, (s[i].var + 2.0 * s[i].cov).max(0.0), s[i].var));
            let c310 = c310.fold(0.0f64, f64::max);
            let c311 = (0..5).map(|i| push(ConditionId::MonotoneCovariance, i, s[i].cov.abs(), s[i].square)).fold(0.0f64, f64::max);
            let c = c38.iter().copied().fold(0.0f64, f64::max);
            for (slot, v) in [c37, c, c310, c311].into_iter().enumerate() {
                by_len[slot].push((len, v));
            }
            let h = law.block_covariance_sum(start, end, &Transform::ShellMagnitude { inner, outer })?;
            let bound = 5.0 * c * s[1].square;
            let holds = c.is_finite().then(|| h.value.abs() <= bound + H_SLACK * bound.max(1.0) + 2.0 * (h.error_bound + 3.0 * err));
            h_relations.push(HRelation {
                inner,
                outer,
                start,
                end,
                h_covariance_abs: h.value.abs(),
                shell_second_moment: s[1].square,
                constant: c,
                bound,
                holds,
            });
        }
    }
    let reports = ids
        .iter()
        .zip(by_len)
        .map(|(id, mut pts)| {
            pts.sort_by_key(|(len, _)| *len);
            let mut cut: Vec<u64> = Vec::new();
            let mut vals: Vec<f64> = Vec::new();
            let mut best = 0.0f64;
            for (len, c) in pts {
                best = best.max(c);
                if cut.last() == Some(&len) {
                    *vals.last_mut().unwrap() = best;
                } else {
                    cut.push(len);
                    vals.push(best);
                }
            }
            let mut rep = ConditionReport::new(*id, &cut, &vals, tol)
                .with_method(method, err)
                .with_note("cutoff = range length; value = largest minimal constant over ranges of at most that length");
            rep.side_checks.push(SideCheck { name: "finite constant".into(), passed: vals.iter().all(|v| v.is_finite()) });
            rep
        })
        .collect();
    Ok(MomentFamilyReport { entries, h_relations, reports })
}
