//! Deterministic facts behind the bound, checked on concrete paths.
//!
//! With `S_{m,L} = Σ_{j≤m} (g_L(x_j) − E g_L(X_j))`, levels `b_k := b_{r^k}`
//! and anchors `A_k = r^k ⌊m / r^k⌋`, every `m < r^{n+1}` satisfies
//!
//! ```text
//! S_{m,b_{n+1}} = Σ_k (S_{A_{k−1},b_{k−1}} − S_{A_k,b_{k−1}})
//!               + Σ_k (S_{m,b_k} − S_{m,b_{k−1}} − S_{A_k,b_k} + S_{A_k,b_{k−1}})
//! ```
//!
//! The first bracket is a partial sub-block sum of `r^{k−1}`-wide pieces; the
//! second is bounded through the shell `h` over the full block containing `m`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_length, INEQUALITY_SLACK};
use crate::blocks::{checked_pow, floor_anchor, horizon};
use crate::error::{domain, Error, Result};
use crate::numeric::{compensated_sum, le_with_slack};
use crate::scheme::NormingScheme;
use crate::sequence::SequenceLaw;
use crate::transform::Transform;

/// Absolute tolerance of the decomposition identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Per-index expectations the pathwise statements center at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLawTable {
    pub r: u64,
    pub n: u32,
    /// `b_{r^k}` for `k = 0..=n+1`.
    pub levels: Vec<f64>,
    /// `[k][j−1] = E g_{b_{r^k}}(X_j)`.
    pub truncated_means: Vec<Vec<f64>>,
    /// `[k][j−1] = E h_{b_{r^{k−1}}, b_{r^k}}(X_j)`; row 0 is empty.
    pub shell_means: Vec<Vec<f64>>,
    /// `[k][j−1] = E|X_j| I{|X_j| > b_{r^{k−1}}}`; row 0 is empty.
    pub tail_means: Vec<Vec<f64>>,
}

impl PathLawTable {
    /// Expectations of `X_1, …, X_{r^{n+1}}` under `law`.
    pub fn from_law(law: &dyn SequenceLaw, scheme: &NormingScheme, n: u32) -> Result<Self> {
        scheme.validate()?;
        let r = scheme.r();
        let top = check_length(law, r, n)?;
        let levels: Vec<f64> = (0..=n + 1).map(|k| scheme.b_at_scale(k)).collect::<Result<_>>()?;
        let mut truncated_means = vec![Vec::with_capacity(top as usize); levels.len()];
        let mut shell_means = vec![Vec::new(); levels.len()];
        let mut tail_means = vec![Vec::new(); levels.len()];
        for j in 1..=top {
            let m = law.marginal(j)?;
            for (k, level) in levels.iter().enumerate() {
                truncated_means[k].push(m.expect(&Transform::Truncate { level: *level })?);
                if k > 0 {
                    let shell = Transform::ShellMagnitude { inner: levels[k - 1], outer: *level };
                    shell_means[k].push(m.expect(&shell)?);
                    tail_means[k].push(m.abs_moment_above(levels[k - 1]));
                }
            }
        }
        Ok(Self { r, n, levels, truncated_means, shell_means, tail_means })
    }

    fn top(&self) -> usize {
        self.truncated_means[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PathwiseReport {
    pub checked_m: u64,
    /// Largest `|S_{m,b_{r^{n+1}}} − (decomposition)|` over `m`.
    pub identity_max_error: f64,
    pub identity_ok: bool,
    /// The shell chain for the second bracket at every `(m, k)`.
    pub shell_chain_ok: bool,
    /// The first bracket is at most the max over `ℓ` of sub-block sums.
    pub sub_block_ok: bool,
    /// `max_m |S_{m,b_{r^{n+1}}}|` is at most the three-term majorant.
    pub majorization_ok: bool,
    pub max_partial_sum: f64,
    pub majorant: f64,
    /// First failing statement, for diagnostics.
    pub first_failure: Option<String>,
}

impl PathwiseReport {
    pub fn all_ok(&self) -> bool {
        self.identity_ok && self.shell_chain_ok && self.sub_block_ok && self.majorization_ok
    }
}

fn prefix(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for v in values {
        acc += v;
        out.push(acc);
    }
    out
}

/// Runs every pathwise statement for `m ∈ [1, r^{n+1})`.
///
/// The path must cover `x_1, …, x_{r^{n+1}}`, since the block containing
/// `m` can end at `r^{n+1}`. The identity is evaluated from direct sums over
/// each index range, so its cost is quadratic in `r^{n+1}`.
pub fn pathwise_check(path: &[f64], table: &PathLawTable) -> Result<PathwiseReport> {
    let (r, n) = (table.r, table.n);
    let top = horizon(r, n)? as usize;
    if table.top() != top {
        return domain(format!("law table covers {} indices, the scale needs {top}", table.top()));
    }
    if path.len() < top {
        return Err(Error::Index { index: top, len: path.len() });
    }
    if path.iter().take(top).any(|x| !x.is_finite()) {
        return domain("path values must be finite");
    }
    let kmax = n as usize + 1;
    let x = &path[..top];
    let lv = &table.levels;
    let tm = &table.truncated_means;
    let centered = |k: usize, j: usize| x[j].clamp(-lv[k], lv[k]) - tm[k][j];
    // Prefix sums, index i covers x_1..x_i.
    let p: Vec<Vec<f64>> = (0..=kmax).map(|k| prefix((0..top).map(|j| centered(k, j)))).collect();
    let shell_dev = |k: usize, j: usize| centered(k, j) - centered(k - 1, j);
    let abs_dev: Vec<Vec<f64>> =
        (0..=kmax).map(|k| if k == 0 { vec![] } else { prefix((0..top).map(|j| shell_dev(k, j).abs())) }).collect();
    let h_of = |k: usize, j: usize| (x[j].clamp(-lv[k], lv[k]) - x[j].clamp(-lv[k - 1], lv[k - 1])).abs();
    let h_centered: Vec<Vec<f64>> = (0..=kmax)
        .map(|k| if k == 0 { vec![] } else { prefix((0..top).map(|j| h_of(k, j) - table.shell_means[k][j])) })
        .collect();
    let h_plus: Vec<Vec<f64>> = (0..=kmax)
        .map(|k| if k == 0 { vec![] } else { prefix((0..top).map(|j| h_of(k, j) + table.shell_means[k][j])) })
        .collect();
    let tails: Vec<Vec<f64>> =
        (0..=kmax).map(|k| if k == 0 { vec![] } else { prefix(table.tail_means[k].iter().copied()) }).collect();

    let mut report = PathwiseReport {
        checked_m: top as u64 - 1,
        identity_max_error: 0.0,
        identity_ok: true,
        shell_chain_ok: true,
        sub_block_ok: true,
        majorization_ok: true,
        max_partial_sum: 0.0,
        majorant: 0.0,
        first_failure: None,
    };
    fn fail(flag: &mut bool, msg: String, first: &mut Option<String>) {
        *flag = false;
        first.get_or_insert(msg);
    }

    // Scale-wise pieces of the majorant.
    let mut sub_max = vec![0.0f64; kmax + 1];
    let mut shell_max = vec![0.0f64; kmax + 1];
    for k in 1..=kmax {
        let w = checked_pow(r, k as u32)? as usize;
        let sub = w / r as usize;
        let mut best_sub: f64 = 0.0;
        let mut best_shell: f64 = 0.0;
        let mut best_tail: f64 = 0.0;
        for start in (0..top).step_by(w) {
            for ell in 1..r as usize {
                best_sub = best_sub.max((p[k - 1][start + ell * sub] - p[k - 1][start]).abs());
            }
            best_shell = best_shell.max((h_centered[k][start + w] - h_centered[k][start]).abs());
            best_tail = best_tail.max(tails[k][start + w] - tails[k][start]);
        }
        sub_max[k] = best_sub;
        shell_max[k] = best_shell + 2.0 * best_tail;
    }
    let majorant = compensated_sum(sub_max.iter().chain(&shell_max).copied());
    report.majorant = majorant;

    for m in 1..top {
        let direct = compensated_sum((0..m).map(|j| centered(kmax, j)));
        report.max_partial_sum = report.max_partial_sum.max(direct.abs());
        let mut pieces = Vec::with_capacity(2 * kmax);
        let mut per_m_bound = Vec::with_capacity(2 * kmax);
        for k in 1..=kmax {
            let ak = floor_anchor(m as u64, r, k as u32)? as usize;
            let ak1 = floor_anchor(m as u64, r, k as u32 - 1)? as usize;
            let w = checked_pow(r, k as u32)? as usize;
            let sub = w / r as usize;
            let first = compensated_sum((ak..ak1).map(|j| centered(k - 1, j)));
            let second = compensated_sum((ak..m).map(|j| shell_dev(k, j)));
            pieces.push(first);
            pieces.push(second);

            let best_ell = (1..r as usize).map(|l| (p[k - 1][ak + l * sub] - p[k - 1][ak]).abs()).fold(0.0, f64::max);
            if !le_with_slack(first.abs(), best_ell, INEQUALITY_SLACK) {
                fail(&mut report.sub_block_ok, format!("sub-block bound at m = {m}, k = {k}"), &mut report.first_failure);
            }
            let chain = [
                second.abs(),
                abs_dev[k][m] - abs_dev[k][ak],
                abs_dev[k][ak + w] - abs_dev[k][ak],
                h_plus[k][ak + w] - h_plus[k][ak],
                (h_centered[k][ak + w] - h_centered[k][ak]).abs() + 2.0 * (tails[k][ak + w] - tails[k][ak]),
            ];
            if let Some(i) = chain.windows(2).position(|c| !le_with_slack(c[0], c[1], INEQUALITY_SLACK)) {
                fail(
                    &mut report.shell_chain_ok,
                    format!("shell chain link {} at m = {m}, k = {k}", i + 1),
                    &mut report.first_failure,
                );
            }
            per_m_bound.push(best_ell);
            per_m_bound.push(chain[4]);
        }
        let err = (direct - compensated_sum(pieces)).abs();
        report.identity_max_error = report.identity_max_error.max(err);
        if err > IDENTITY_TOLERANCE {
            fail(&mut report.identity_ok, format!("decomposition identity at m = {m}, error {err:e}"), &mut report.first_failure);
        }
        let bound = compensated_sum(per_m_bound);
        if !le_with_slack(direct.abs(), bound, INEQUALITY_SLACK) || !le_with_slack(bound, majorant, INEQUALITY_SLACK) {
            fail(&mut report.majorization_ok, format!("majorization at m = {m}"), &mut report.first_failure);
        }
    }
    if !le_with_slack(report.max_partial_sum, majorant, INEQUALITY_SLACK) {
        fail(&mut report.majorization_ok, "majorization of the maximum".into(), &mut report.first_failure);
    }
    Ok(report)
}

/// [`pathwise_check`] over many paths in parallel, results in input order.
pub fn pathwise_check_many(paths: &[Vec<f64>], table: &PathLawTable) -> Result<Vec<PathwiseReport>> {
    paths.par_iter().map(|p| pathwise_check(p, table)).collect()
}
