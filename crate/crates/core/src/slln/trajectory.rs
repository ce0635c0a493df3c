//! Simulated normalized partial sums across seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::copula::CopulaSequenceModel;
use crate::stats::{median, quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckpointSummary {
    pub n: u64,
    /// Cross-seed quantiles of `|S_n| / n^{1/p}`.
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    /// Fraction of seeds with `max_{j≤n} |S_j| / b_n > ε`, one per ladder value.
    pub exceedance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryStats {
    pub p: f64,
    pub checkpoints: Vec<u64>,
    pub seeds: Vec<u64>,
    pub eps_ladder: Vec<f64>,
    /// `[seed][checkpoint]` of `|S_n − n μ| / n^{1/p}`.
    pub normalized: Vec<Vec<f64>>,
    /// `[seed][checkpoint]` of `max_{j≤n} |S_j − j μ| / n^{1/p}`.
    pub normalized_max: Vec<Vec<f64>>,
    pub summary: Vec<CheckpointSummary>,
    /// Median and 90th percentile both smaller at the last checkpoint than
    /// at the first.
    pub decreasing: bool,
}

impl TrajectoryStats {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["seed".to_string(), "n".to_string(), "normalized_max".to_string()];
        h.extend(self.eps_ladder.iter().map(|v| format!("exceed_eps_{v}")));
        h
    }

    /// One row per seed and checkpoint; indicators are 0 or 1.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::with_capacity(self.seeds.len() * self.checkpoints.len());
        for (s, seed) in self.seeds.iter().enumerate() {
            for (c, n) in self.checkpoints.iter().enumerate() {
                let v = self.normalized_max[s][c];
                let mut row = vec![seed.to_string(), n.to_string(), format!("{v:.16e}")];
                row.extend(self.eps_ladder.iter().map(|e| u8::from(v > *e).to_string()));
                rows.push(row);
            }
        }
        rows
    }

    /// `median(last) / median(first)` of `|S_n| / n^{1/p}`.
    pub fn median_ratio(&self) -> f64 {
        let first = self.summary.first().map_or(f64::NAN, |s| s.median);
        let last = self.summary.last().map_or(f64::NAN, |s| s.median);
        last / first
    }
}

/// Run one centered path per seed to the largest checkpoint and record
/// `|S_n| / n^{1/p}` and `max_{j≤n} |S_j| / n^{1/p}` at every checkpoint.
pub fn slln_trajectory(
    model: &CopulaSequenceModel,
    p: f64,
    checkpoints: &[u64],
    seeds: &[u64],
    eps_ladder: &[f64],
) -> Result<TrajectoryStats> {
    if !(p > 0.0 && p < 2.0) {
        return domain(format!("need 0 < p < 2, got {p}"));
    }
    if checkpoints.is_empty() || seeds.is_empty() {
        return domain("need at least one checkpoint and one seed");
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return domain("checkpoints must be positive and strictly increasing");
    }
    if eps_ladder.iter().any(|e| !(*e > 0.0)) {
        return domain("ε values must be positive");
    }
    let mean = model.mean()?;
    let len = *checkpoints.last().unwrap() as usize;
    let sampler = model.sampler(len)?;
    let per_seed: Vec<(Vec<f64>, Vec<f64>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut path = vec![0.0; len];
            sampler.sample(seed, 0, &mut path);
            let (mut s, mut running) = (0.0, 0.0f64);
            let mut next = 0;
            let mut at = Vec::with_capacity(checkpoints.len());
            let mut mx = Vec::with_capacity(checkpoints.len());
            for (j, x) in path.iter().enumerate() {
                s += x - mean;
                running = running.max(s.abs());
                if (j + 1) as u64 == checkpoints[next] {
                    let b = ((j + 1) as f64).powf(1.0 / p);
                    at.push(s.abs() / b);
                    mx.push(running / b);
                    next += 1;
                }
            }
            (at, mx)
        })
        .collect();
    let (normalized, normalized_max): (Vec<_>, Vec<_>) = per_seed.into_iter().unzip();
    let mut summary = Vec::with_capacity(checkpoints.len());
    for (c, &n) in checkpoints.iter().enumerate() {
        let col: Vec<f64> = normalized.iter().map(|row| row[c]).collect();
        let exceedance = eps_ladder
            .iter()
            .map(|e| normalized_max.iter().filter(|row| row[c] > *e).count() as f64 / seeds.len() as f64)
            .collect();
        summary.push(CheckpointSummary { n, median: median(&col)?, q10: quantile(&col, 0.1)?, q90: quantile(&col, 0.9)?, exceedance });
    }
    let (first, last) = (&summary[0], &summary[summary.len() - 1]);
    let decreasing = summary.len() > 1 && last.median < first.median && last.q90 < first.q90;
    Ok(TrajectoryStats {
        p,
        checkpoints: checkpoints.to_vec(),
        seeds: seeds.to_vec(),
        eps_ladder: eps_ladder.to_vec(),
        normalized,
        normalized_max,
        summary,
        decreasing,
    })
}
