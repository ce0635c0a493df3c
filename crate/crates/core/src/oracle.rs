//! Exhaustive enumeration of finite joint laws.
//!
//! Outcomes are visited in lexicographic order of their atom indices. Work
//! is sharded by the atom of the first variable; shards are reduced in
//! shard order with compensated sums, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::finite::check_budget;
use crate::model::{FiniteJointModel, DEFAULT_ENUMERATION_BUDGET};
use crate::numeric::CompensatedSum;
use crate::transform::Transform;

/// Environment variable overriding the enumeration budget.
pub const BUDGET_ENV: &str = "MAXINEQ_ENUM_BUDGET";

/// The enumeration budget: `MAXINEQ_ENUM_BUDGET` when set to a positive
/// integer, the default otherwise.
pub fn enumeration_budget() -> u64 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|v| *v > 0)
        .unwrap_or(DEFAULT_ENUMERATION_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub outcome_count: u64,
    pub exact_probability: f64,
    /// Total probability over all outcomes; 1 up to rounding.
    pub total_mass: f64,
    /// `E X_j` for every variable, the centering used by path events.
    pub exact_moments: Vec<f64>,
}

fn check(model: &FiniteJointModel, budget: u64) -> Result<()> {
    check_budget(model.outcome_count() as u128, budget)
}

/// Every outcome with its probability, in lexicographic order.
pub fn enumerate_paths(model: &FiniteJointModel, budget: u64) -> Result<impl Iterator<Item = (Vec<f64>, f64)> + '_> {
    check(model, budget)?;
    Ok((0..model.outcome_count()).map(move |idx| {
        let mut path = vec![0.0; model.len()];
        model.outcome_values(idx, &mut path);
        (path, model.pmf()[idx])
    }))
}

/// `(P{event}, total mass)` summed shard by shard.
fn sharded_probability(model: &FiniteJointModel, event: &(dyn Fn(&[f64]) -> bool + Sync)) -> (f64, f64) {
    let shard = model.strides()[0];
    let shards = model.supports()[0].len();
    let parts: Vec<(CompensatedSum, CompensatedSum)> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut hit = CompensatedSum::new();
            let mut all = CompensatedSum::new();
            let mut path = vec![0.0; model.len()];
            for idx in s * shard..(s + 1) * shard {
                let p = model.pmf()[idx];
                if p == 0.0 {
                    continue;
                }
                all.add(p);
                model.outcome_values(idx, &mut path);
                if event(&path) {
                    hit.add(p);
                }
            }
            (hit, all)
        })
        .collect();
    let mut hit = CompensatedSum::new();
    let mut all = CompensatedSum::new();
    for (h, a) in parts {
        hit.add(h.total());
        all.add(a.total());
    }
    (hit.total(), all.total())
}

/// Probability of an arbitrary path event.
pub fn exact_event_probability(
    model: &FiniteJointModel,
    budget: u64,
    event: &(dyn Fn(&[f64]) -> bool + Sync),
) -> Result<EnumerationResult> {
    check(model, budget)?;
    let (p, mass) = sharded_probability(model, event);
    Ok(EnumerationResult {
        outcome_count: model.outcome_count() as u64,
        exact_probability: p.clamp(0.0, 1.0),
        total_mass: mass,
        exact_moments: model.means(),
    })
}

/// `max_{1 ≤ m ≤ horizon} |Σ_{k ≤ m} (x_k − E X_k)|`.
pub fn max_centered_partial_sum(path: &[f64], means: &[f64], horizon: usize) -> f64 {
    let mut s = 0.0;
    let mut best: f64 = 0.0;
    for (x, m) in path.iter().zip(means).take(horizon) {
        s += x - m;
        best = best.max(s.abs());
    }
    best
}

/// `P{max_{1 ≤ m ≤ horizon} |Σ_{k ≤ m} (X_k − E X_k)| > ε b}`.
pub fn exact_max_partial_sum_tail(
    model: &FiniteJointModel,
    eps: f64,
    b: f64,
    horizon: usize,
    budget: u64,
) -> Result<EnumerationResult> {
    if !(eps > 0.0) || !(b > 0.0) || !eps.is_finite() || !b.is_finite() {
        return domain(format!("threshold factors must be positive and finite, got ε = {eps}, b = {b}"));
    }
    exact_max_partial_sum_tail_at(model, eps * b, horizon, budget)
}

/// Same event with the threshold given directly; `threshold = 0` is allowed.
pub fn exact_max_partial_sum_tail_at(
    model: &FiniteJointModel,
    threshold: f64,
    horizon: usize,
    budget: u64,
) -> Result<EnumerationResult> {
    if horizon == 0 || horizon > model.len() {
        return Err(Error::Index { index: horizon, len: model.len() });
    }
    if !(threshold >= 0.0) {
        return domain(format!("threshold must be nonnegative, got {threshold}"));
    }
    let means = model.means();
    exact_event_probability(model, budget, &|path| max_centered_partial_sum(path, &means, horizon) > threshold)
}

/// `Cov(φ(X_i), φ(X_j))` by a pass over the full joint law, 0-based indices.
///
/// This deliberately avoids the pair tables used elsewhere, so it serves as
/// an independent check of them.
pub fn exact_pair_covariance(model: &FiniteJointModel, i: usize, j: usize, tr: &Transform, budget: u64) -> Result<f64> {
    tr.validate()?;
    if i >= model.len() || j >= model.len() {
        return Err(Error::Index { index: i.max(j), len: model.len() });
    }
    if i == j {
        return domain("pair covariance needs two distinct indices");
    }
    check(model, budget)?;
    let mut path = vec![0.0; model.len()];
    let (mut ex, mut ey, mut exy) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (idx, p) in model.pmf().iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        model.outcome_values(idx, &mut path);
        let (fx, fy) = (tr.apply(path[i]), tr.apply(path[j]));
        ex.add(p * fx);
        ey.add(p * fy);
        exy.add(p * fx * fy);
    }
    Ok(exy.total() - ex.total() * ey.total())
}
