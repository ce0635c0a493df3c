//! Stochastic domination certificates: `P{|X_n| > t} ≤ C · P{|X| > t}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::marginal::Marginal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRatio {
    pub t: f64,
    /// Largest tail ratio over the variables at `t`; 0 when every variable tail vanishes.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationCertificate {
    /// Smallest feasible constant; infinite when infeasible.
    pub constant: f64,
    pub envelope: Marginal,
    pub checked_grid: Vec<GridRatio>,
    /// False when some variable has positive tail where the envelope has none.
    pub feasible: bool,
    /// True when the grid was completed with every tail breakpoint, which
    /// makes the constant exact for all `t > 0`.
    pub exact: bool,
}

fn ratio_at(variables: &[Marginal], envelope: &Marginal, t: f64) -> f64 {
    let env = envelope.tail_abs(t);
    variables
        .iter()
        .map(|v| {
            let p = v.tail_abs(t);
            if p == 0.0 {
                0.0
            } else if env == 0.0 {
                f64::INFINITY
            } else {
                p / env
            }
        })
        .fold(0.0, f64::max)
}

/// Certify domination of `variables` by `envelope` on `grid`.
///
/// When every law has finite support the grid is augmented with all
/// breakpoints of the tail functions, so the certificate covers every
/// `t > 0`. Identical marginals certify `C = 1` analytically.
pub fn check_domination(variables: &[Marginal], envelope: &Marginal, grid: &[f64]) -> Result<DominationCertificate> {
    if grid.is_empty() {
        return domain("domination grid is empty");
    }
    if let Some(t) = grid.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return domain(format!("domination grid values must be positive and finite, got {t}"));
    }
    if variables.is_empty() {
        return domain("no variables to certify");
    }
    envelope.validate()?;
    for v in variables {
        v.validate()?;
    }
    let checked_grid: Vec<GridRatio> =
        grid.iter().map(|&t| GridRatio { t, max_ratio: ratio_at(variables, envelope, t) }).collect();

    let all_finite = envelope.is_discrete() && variables.iter().all(|v| v.is_discrete());
    let identical = variables.iter().all(|v| v == envelope);
    let (constant_raw, exact) = if identical {
        (1.0, true)
    } else if all_finite {
        // Tails are right-continuous step functions; they only change at |atom|.
        let mut points: Vec<f64> = variables
            .iter()
            .chain(std::iter::once(envelope))
            .flat_map(|m| m.atoms().unwrap().into_iter().map(|(v, _)| v.abs()))
            .filter(|v| *v > 0.0)
            .collect();
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        let first = points.first().copied().unwrap_or(1.0);
        points.push(first / 2.0);
        let c = points
            .iter()
            .chain(grid)
            .map(|&t| ratio_at(variables, envelope, t))
            .fold(0.0, f64::max);
        (c, true)
    } else {
        (checked_grid.iter().map(|g| g.max_ratio).fold(0.0, f64::max), false)
    };
    let feasible = constant_raw.is_finite();
    // Degenerate variables (all tails zero) are dominated with any constant.
    let constant = if constant_raw == 0.0 { 1.0 } else { constant_raw };
    Ok(DominationCertificate { constant, envelope: envelope.clone(), checked_grid, feasible, exact })
}
