//! Norming schemes `(b_n, a_{n,k}, c_n)` together with the block base `r`.

use serde::{Deserialize, Serialize};

use crate::blocks::checked_pow;
use crate::error::{domain, Error, Result};
use crate::numeric::{compensated_sum, power_sum};

/// A norming scheme with its block base.
///
/// `Power` is the parametric family `b_n = n^{1/p}`, `c_n = 1/n`,
/// `a_{n,k} = r^{n/α + (1/p − 1/α)k}`. `Table` carries explicit values:
/// `b[i] = b_{i+1}`, `c[i] = c_{i+1}`, and `a[n][k−1] = a_{n,k}` for
/// `1 ≤ k ≤ n+1`, rows starting at `n = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormingScheme {
    Power { p: f64, alpha: f64, r: u64 },
    Table { r: u64, b: Vec<f64>, a: Vec<Vec<f64>>, c: Vec<f64> },
}

impl NormingScheme {
    pub fn power(p: f64, alpha: f64, r: u64) -> Result<Self> {
        let s = NormingScheme::Power { p, alpha, r };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r() < 2 {
            return domain(format!("r must be an integer ≥ 2, got {}", self.r()));
        }
        match self {
            NormingScheme::Power { p, alpha, .. } => {
                if !(*p >= 1.0 && *p < 2.0) {
                    return domain(format!("p must lie in [1, 2), got {p}"));
                }
                if !(*alpha > *p && *alpha < 2.0) {
                    return domain(format!("alpha must lie in (p, 2) = ({p}, 2), got {alpha}"));
                }
                Ok(())
            }
            NormingScheme::Table { b, a, c, .. } => {
                if b.is_empty() {
                    return domain("b table is empty");
                }
                if b.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return domain("b values must be positive and finite");
                }
                if b.windows(2).any(|w| w[1] < w[0]) {
                    return domain("b must be nondecreasing");
                }
                if c.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return domain("c values must be nonnegative and finite");
                }
                if c.windows(2).any(|w| w[1] > w[0]) {
                    return domain("c must be nonincreasing");
                }
                for (n, row) in a.iter().enumerate() {
                    if row.len() != n + 1 {
                        return domain(format!("a row {n} must have {} entries, has {}", n + 1, row.len()));
                    }
                    if row.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                        return domain(format!("a row {n} has a non-positive entry"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn r(&self) -> u64 {
        match self {
            NormingScheme::Power { r, .. } | NormingScheme::Table { r, .. } => *r,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            NormingScheme::Power { p, .. } => Some(*p),
            NormingScheme::Table { .. } => None,
        }
    }

    /// `b_n` for `n ≥ 1`.
    pub fn b(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return domain("b_n needs n ≥ 1");
        }
        match self {
            NormingScheme::Power { p, .. } => Ok((n as f64).powf(1.0 / p)),
            NormingScheme::Table { b, .. } => table_at(b, n - 1, "b"),
        }
    }

    /// `b_{r^k}`. The power scheme evaluates `r^{k/p}` directly, so it is
    /// defined beyond the integer index cap.
    pub fn b_at_scale(&self, k: u32) -> Result<f64> {
        match self {
            NormingScheme::Power { p, r, .. } => Ok((*r as f64).powf(k as f64 / p)),
            NormingScheme::Table { .. } => self.b(checked_pow(self.r(), k)?),
        }
    }

    /// `a_{n,k}` for `1 ≤ k ≤ n+1`.
    pub fn a(&self, n: u32, k: u32) -> Result<f64> {
        if k < 1 || k > n + 1 {
            return domain(format!("a_{{n,k}} needs 1 ≤ k ≤ n+1, got n = {n}, k = {k}"));
        }
        match self {
            NormingScheme::Power { p, alpha, r } => {
                let d = 1.0 / p - 1.0 / alpha;
                Ok((*r as f64).powf(n as f64 / alpha + d * k as f64))
            }
            NormingScheme::Table { a, .. } => {
                let row = a.get(n as usize).ok_or(Error::Index { index: n as usize, len: a.len() })?;
                Ok(row[k as usize - 1])
            }
        }
    }

    /// `c_n` for `n ≥ 1`.
    pub fn c(&self, n: u64) -> Result<f64> {
        if n < 1 {
            return domain("c_n needs n ≥ 1");
        }
        match self {
            NormingScheme::Power { .. } => Ok(1.0 / n as f64),
            NormingScheme::Table { c, .. } => table_at(c, n - 1, "c"),
        }
    }

    /// `Σ_{n=r^m}^{r^{m+1}−1} c_n`.
    pub fn c_block_sum(&self, m: u32) -> Result<f64> {
        let r = self.r();
        match self {
            NormingScheme::Power { .. } => match (checked_pow(r, m), checked_pow(r, m + 1)) {
                (Ok(lo), Ok(hi)) => Ok(power_sum(1.0, lo, hi - 1)),
                // Beyond the index cap the harmonic block sum equals ln r up
                // to O(r^{−m}), far below f64 resolution.
                _ => Ok((r as f64).ln() - (r as f64 - 1.0) / (2.0 * (r as f64).powi(m as i32 + 1))),
            },
            NormingScheme::Table { .. } => {
                let lo = checked_pow(r, m)?;
                let hi = checked_pow(r, m + 1)?;
                let vals: Result<Vec<f64>> = (lo..hi).map(|n| self.c(n)).collect();
                Ok(compensated_sum(vals?))
            }
        }
    }

    /// `Σ_{k=1}^{n+1} a_{n,k}`.
    pub fn a_row_sum(&self, n: u32) -> Result<f64> {
        let vals: Result<Vec<f64>> = (1..=n + 1).map(|k| self.a(n, k)).collect();
        Ok(compensated_sum(vals?))
    }

    /// `Σ_k a_{n,k} / b_{r^n}`.
    pub fn growth_ratio(&self, n: u32) -> Result<f64> {
        Ok(self.a_row_sum(n)? / self.b_at_scale(n)?)
    }

    /// `max_{0 ≤ n' ≤ n} Σ_k a_{n',k} / b_{r^{n'}}`, the working-range
    /// constant of the growth condition on the row sums of `a`.
    pub fn growth_constant(&self, n: u32) -> Result<f64> {
        let mut best: f64 = 0.0;
        for m in 0..=n {
            best = best.max(self.growth_ratio(m)?);
        }
        if !best.is_finite() {
            return Err(Error::Domain("row sums of a are not O(b_{r^n}) on the working range".into()));
        }
        Ok(best)
    }
}

fn table_at(v: &[f64], i: u64, name: &str) -> Result<f64> {
    v.get(i as usize)
        .copied()
        .ok_or_else(|| Error::Domain(format!("{name} table has {} entries, index {} requested", v.len(), i + 1)))
}

/// Closed form of `Σ_{k=1}^{n+1} a_{n,k}` for the power scheme:
/// `r^{n/α} (r^{d(n+2)} − r^d) / (r^d − 1)` with `d = 1/p − 1/α`.
pub fn power_row_sum_closed_form(p: f64, alpha: f64, r: u64, n: u32) -> f64 {
    let r = r as f64;
    let d = 1.0 / p - 1.0 / alpha;
    let n = n as f64;
    r.powf(n / alpha) * (r.powf(d * (n + 2.0)) - r.powf(d)) / (r.powf(d) - 1.0)
}

/// The geometric bound `r^{2/p − 2/α} / (r^{1/p − 1/α} − 1)` on
/// `Σ_k a_{n,k} / r^{n/p}`, uniform in `n`.
pub fn power_growth_bound(p: f64, alpha: f64, r: u64) -> f64 {
    let r = r as f64;
    r.powf(2.0 / p - 2.0 / alpha) / (r.powf(1.0 / p - 1.0 / alpha) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        assert!(NormingScheme::power(1.0, 1.5, 2).is_ok());
        assert!(NormingScheme::power(2.5, 1.5, 2).is_err());
        assert!(NormingScheme::power(1.2, 1.1, 2).is_err());
        assert!(NormingScheme::power(1.2, 2.0, 2).is_err());
        assert!(NormingScheme::power(1.2, 1.5, 1).is_err());
        let bad_c = NormingScheme::Table { r: 2, b: vec![1.0, 2.0], a: vec![vec![1.0]], c: vec![0.5, 1.0] };
        assert!(bad_c.validate().is_err());
        let bad_b = NormingScheme::Table { r: 2, b: vec![2.0, 1.0], a: vec![], c: vec![] };
        assert!(bad_b.validate().is_err());
        let bad_a = NormingScheme::Table { r: 2, b: vec![1.0], a: vec![vec![1.0, 2.0]], c: vec![] };
        assert!(bad_a.validate().is_err());
    }

    #[test]
    fn power_values() {
        let s = NormingScheme::power(1.0, 1.5, 2).unwrap();
        assert_eq!(s.b(4).unwrap(), 4.0);
        assert_eq!(s.b_at_scale(3).unwrap(), 8.0);
        assert_eq!(s.c(4).unwrap(), 0.25);
        let d = 1.0 - 1.0 / 1.5;
        assert!((s.a(2, 1).unwrap() - 2f64.powf(2.0 / 1.5 + d)).abs() < 1e-14);
        assert!(s.a(2, 4).is_err());
        // 1/2 + 1/3 for r = 2, m = 1.
        assert!((s.c_block_sum(1).unwrap() - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((s.c_block_sum(60).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn table_values() {
        let s = NormingScheme::Table {
            r: 2,
            b: vec![1.0, 1.5, 2.0, 2.0],
            a: vec![vec![1.0], vec![0.5, 0.7]],
            c: vec![1.0, 0.5, 0.5, 0.25],
        };
        s.validate().unwrap();
        assert_eq!(s.b_at_scale(2).unwrap(), 2.0);
        assert_eq!(s.a(1, 2).unwrap(), 0.7);
        assert_eq!(s.c_block_sum(1).unwrap(), 1.0);
        assert!(s.b(5).is_err());
        assert!((s.growth_ratio(1).unwrap() - 1.2 / 1.5).abs() < 1e-15);
        assert!((s.growth_constant(1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_row_sum() {
        for (p, alpha, r) in [(1.0, 1.5, 2u64), (1.2, 1.5, 3), (1.5, 1.9, 2)] {
            let s = NormingScheme::power(p, alpha, r).unwrap();
            let bound = power_growth_bound(p, alpha, r);
            for n in 0..=30 {
                let direct = s.a_row_sum(n).unwrap();
                let closed = power_row_sum_closed_form(p, alpha, r, n);
                assert!((direct - closed).abs() <= 1e-12 * closed, "{p} {alpha} {r} {n}");
                assert!(s.growth_ratio(n).unwrap() <= bound * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn growth_ratio_increases_to_bound(p in 1.0f64..1.9, frac in 0.05f64..0.95, r in 2u64..6) {
            let alpha = p + frac * (2.0 - p);
            let s = NormingScheme::power(p, alpha, r).unwrap();
            let bound = power_growth_bound(p, alpha, r);
            let mut prev = 0.0;
            for n in 0..20 {
                let g = s.growth_ratio(n).unwrap();
                prop_assert!(g >= prev * (1.0 - 1e-12));
                prop_assert!(g <= bound * (1.0 + 1e-12));
                prev = g;
            }
        }
    }
}
