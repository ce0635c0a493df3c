use rayon::prelude::*;

use super::check_epsilon;
use crate::blocks::horizon;
use crate::error::{domain, Error, Result};
use crate::model::copula::SequenceSampler;
use crate::model::finite::{FiniteJointModel, FiniteSampler};
use crate::oracle::{exact_max_partial_sum_tail_at, max_centered_partial_sum, EnumerationResult};
use crate::rng::replica_rng;
use crate::scheme::NormingScheme;
use crate::stats::{clopper_pearson, ProportionEstimate};

pub const MIN_REPLICAS: u64 = 100;
pub const LHS_CONFIDENCE: f64 = 0.99;

/// Draws reproducible paths: replica `i` of `seed` is a fixed function of both.
pub trait PathSampler: Sync {
    fn path_len(&self) -> usize;
    fn draw(&self, seed: u64, replica: u64, out: &mut [f64]);
}

impl PathSampler for FiniteSampler<'_> {
    fn path_len(&self) -> usize {
        self.model().len()
    }

    fn draw(&self, seed: u64, replica: u64, out: &mut [f64]) {
        self.sample_into(&mut replica_rng(seed, replica), out);
    }
}

impl PathSampler for SequenceSampler {
    fn path_len(&self) -> usize {
        self.len()
    }

    fn draw(&self, seed: u64, replica: u64, out: &mut [f64]) {
        self.sample(seed, replica, out);
    }
}

/// `P{max_{1≤m<r^{n+1}} |Σ_{k≤m}(X_k − E X_k)| > ε b_{r^n}}` by enumeration.
pub fn lhs_exceedance_exact(
    model: &FiniteJointModel,
    eps: f64,
    scheme: &NormingScheme,
    n: u32,
    budget: u64,
) -> Result<EnumerationResult> {
    check_epsilon(eps)?;
    scheme.validate()?;
    let last = horizon(scheme.r(), n)? - 1;
    exact_max_partial_sum_tail_at(model, eps * scheme.b_at_scale(n)?, last as usize, budget)
}

/// Monte Carlo estimate of the same event with a Clopper–Pearson interval.
///
/// `means` are the exact expectations `E X_k`; the path is never centered at
/// sample means.
pub fn lhs_exceedance_mc(
    sampler: &dyn PathSampler,
    means: &[f64],
    eps: f64,
    scheme: &NormingScheme,
    n: u32,
    replicas: u64,
    seed: u64,
) -> Result<ProportionEstimate> {
    check_epsilon(eps)?;
    scheme.validate()?;
    if replicas < MIN_REPLICAS {
        return domain(format!("need at least {MIN_REPLICAS} replicas, got {replicas}"));
    }
    let last = (horizon(scheme.r(), n)? - 1) as usize;
    let len = sampler.path_len();
    if len < last || means.len() < last {
        return Err(Error::Index { index: last, len: len.min(means.len()) });
    }
    let threshold = eps * scheme.b_at_scale(n)?;
    let successes: u64 = (0..replicas)
        .into_par_iter()
        .map_init(
            || vec![0.0; len],
            |buf, i| {
                sampler.draw(seed, i, buf);
                u64::from(max_centered_partial_sum(buf, means, last) > threshold)
            },
        )
        .sum();
    let (lower, upper) = clopper_pearson(successes, replicas, LHS_CONFIDENCE)?;
    Ok(ProportionEstimate {
        successes,
        trials: replicas,
        estimate: successes as f64 / replicas as f64,
        lower,
        upper,
        confidence: LHS_CONFIDENCE,
        seed,
    })
}
