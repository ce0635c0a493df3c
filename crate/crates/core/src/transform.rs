//! Scalar truncation transforms.
//!
//! `truncate` clamps to `[-L, L]`, `shell_magnitude` measures how far a value
//! reaches into the annulus `L < |t| <= K`, and `shell_signed` is the signed
//! version of the same quantity. All maps are exact piecewise-linear functions
//! and are total on the finite reals; breakpoints are not fuzzed.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Inner and outer truncation levels with `0 < inner <= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPair {
    inner: f64,
    outer: f64,
}

impl TruncationPair {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner.is_finite() && outer.is_finite()) {
            return domain(format!("truncation levels must be finite, got ({inner}, {outer})"));
        }
        if !(inner > 0.0 && inner <= outer) {
            return domain(format!("truncation levels must satisfy 0 < L <= K, got ({inner}, {outer})"));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }
}

#[inline]
pub(crate) fn clamp_level(t: f64, level: f64) -> f64 {
    t.min(level).max(-level)
}

/// `(t ∧ L) ∨ (−L)`.
pub fn truncate(t: f64, level: f64) -> Result<f64> {
    if !t.is_finite() {
        return domain(format!("truncate: non-finite input {t}"));
    }
    if !(level > 0.0) || !level.is_finite() {
        return domain(format!("truncate: level must be positive and finite, got {level}"));
    }
    Ok(clamp_level(t, level))
}

/// `|g_K(t) − g_L(t)|`.
pub fn shell_magnitude(t: f64, pair: TruncationPair) -> Result<f64> {
    check_finite(t)?;
    Ok(shell_magnitude_unchecked(t, pair))
}

/// The lattice form `0 ∨ [(K − L) ∧ (t − L)] − 0 ∧ [(L − K) ∨ (t + L)]`.
///
/// Kept separate from [`shell_magnitude`] so the two expressions can be
/// compared against each other.
pub fn shell_magnitude_lattice(t: f64, pair: TruncationPair) -> Result<f64> {
    check_finite(t)?;
    let (l, k) = (pair.inner, pair.outer);
    let upper = 0f64.max((k - l).min(t - l));
    let lower = 0f64.min((l - k).max(t + l));
    Ok(upper - lower)
}

/// `g_K(t) − g_L(t)`.
pub fn shell_signed(t: f64, pair: TruncationPair) -> Result<f64> {
    check_finite(t)?;
    Ok(shell_signed_unchecked(t, pair))
}

/// `0 ∨ t`.
pub fn pos_part(t: f64) -> Result<f64> {
    check_finite(t)?;
    Ok(t.max(0.0))
}

/// `0 ∨ (−t)`.
pub fn neg_part(t: f64) -> Result<f64> {
    check_finite(t)?;
    Ok((-t).max(0.0))
}

#[inline]
pub(crate) fn shell_signed_unchecked(t: f64, pair: TruncationPair) -> f64 {
    clamp_level(t, pair.outer) - clamp_level(t, pair.inner)
}

#[inline]
pub(crate) fn shell_magnitude_unchecked(t: f64, pair: TruncationPair) -> f64 {
    shell_signed_unchecked(t, pair).abs()
}

fn check_finite(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        domain(format!("non-finite input {t}"))
    }
}

/// A scalar transform applied to each coordinate before taking moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `g_L`
    Truncate { level: f64 },
    /// `h_{L,K}`
    ShellMagnitude { inner: f64, outer: f64 },
    /// `f_{L,K}`
    ShellSigned { inner: f64, outer: f64 },
    /// `f_{L,K}^+`
    ShellPositive { inner: f64, outer: f64 },
    /// `f_{L,K}^-`
    ShellNegative { inner: f64, outer: f64 },
    /// `-f_{L,K}^+`
    NegatedShellPositive { inner: f64, outer: f64 },
    /// `t + shift`; only useful for checking translation invariance.
    Shifted { shift: f64 },
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Transform::Identity => Ok(()),
            Transform::Truncate { level } => truncate(0.0, level).map(|_| ()),
            Transform::ShellMagnitude { inner, outer }
            | Transform::ShellSigned { inner, outer }
            | Transform::ShellPositive { inner, outer }
            | Transform::ShellNegative { inner, outer }
            | Transform::NegatedShellPositive { inner, outer } => {
                TruncationPair::new(inner, outer).map(|_| ())
            }
            Transform::Shifted { shift } => check_finite(shift),
        }
    }

    /// Apply the transform. Callers validate once with [`Transform::validate`].
    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            Transform::Identity => t,
            Transform::Truncate { level } => clamp_level(t, level),
            Transform::ShellMagnitude { inner, outer } => {
                (clamp_level(t, outer) - clamp_level(t, inner)).abs()
            }
            Transform::ShellSigned { inner, outer } => clamp_level(t, outer) - clamp_level(t, inner),
            Transform::ShellPositive { inner, outer } => {
                (clamp_level(t, outer) - clamp_level(t, inner)).max(0.0)
            }
            Transform::ShellNegative { inner, outer } => {
                (clamp_level(t, inner) - clamp_level(t, outer)).max(0.0)
            }
            Transform::NegatedShellPositive { inner, outer } => {
                -(clamp_level(t, outer) - clamp_level(t, inner)).max(0.0)
            }
            Transform::Shifted { shift } => t + shift,
        }
    }

    /// True for transforms that are nondecreasing on the real line.
    pub fn is_nondecreasing(&self) -> bool {
        matches!(
            self,
            Transform::Identity
                | Transform::Truncate { .. }
                | Transform::ShellSigned { .. }
                | Transform::ShellPositive { .. }
                | Transform::Shifted { .. }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(l: f64, k: f64) -> TruncationPair {
        TruncationPair::new(l, k).unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(3.5, 2.0).unwrap(), 2.0);
        assert_eq!(truncate(-3.5, 2.0).unwrap(), -2.0);
        assert_eq!(truncate(1.5, 2.0).unwrap(), 1.5);
    }

    #[test]
    fn truncate_rejects_bad_input() {
        assert!(truncate(f64::NAN, 1.0).is_err());
        assert!(truncate(f64::INFINITY, 1.0).is_err());
        assert!(truncate(1.0, 0.0).is_err());
        assert!(truncate(1.0, -1.0).is_err());
    }

    #[test]
    fn shell_examples() {
        let p = pair(1.0, 2.0);
        assert_eq!(shell_magnitude(3.0, p).unwrap(), 1.0);
        assert_eq!(shell_magnitude(0.5, p).unwrap(), 0.0);
        assert_eq!(shell_magnitude(-1.5, p).unwrap(), 0.5);
        assert_eq!(shell_signed(3.0, p).unwrap(), 1.0);
        assert_eq!(shell_signed(-3.0, p).unwrap(), -1.0);
        assert_eq!(shell_signed(1.0, p).unwrap(), 0.0);
    }

    #[test]
    fn parts() {
        assert_eq!(pos_part(-2.0).unwrap(), 0.0);
        assert_eq!(neg_part(-2.0).unwrap(), 2.0);
        assert_eq!(pos_part(0.0).unwrap(), 0.0);
        assert!(pos_part(f64::NAN).is_err());
    }

    #[test]
    fn invalid_pair() {
        assert!(TruncationPair::new(2.0, 1.0).is_err());
        assert!(TruncationPair::new(0.0, 1.0).is_err());
        assert!(TruncationPair::new(1.0, f64::INFINITY).is_err());
        assert!(TruncationPair::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn breakpoints_are_exact() {
        let p = pair(1.0, 2.0);
        for t in [-2.0, -1.0, 1.0, 2.0] {
            assert_eq!(
                shell_magnitude(t, p).unwrap(),
                shell_magnitude_lattice(t, p).unwrap()
            );
        }
        assert_eq!(shell_magnitude(2.0, p).unwrap(), 1.0);
        assert_eq!(shell_magnitude(-2.0, p).unwrap(), 1.0);
    }

    #[test]
    fn equal_levels_vanish() {
        let p = pair(1.5, 1.5);
        for t in [-4.0, -1.5, 0.0, 0.7, 1.5, 9.0] {
            assert_eq!(shell_magnitude(t, p).unwrap(), 0.0);
            assert_eq!(shell_signed(t, p).unwrap(), 0.0);
            assert_eq!(shell_magnitude_lattice(t, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn transform_family_parts() {
        let (l, k) = (0.5, 1.5);
        let f = Transform::ShellSigned { inner: l, outer: k };
        let fp = Transform::ShellPositive { inner: l, outer: k };
        let fm = Transform::ShellNegative { inner: l, outer: k };
        let h = Transform::ShellMagnitude { inner: l, outer: k };
        let nfp = Transform::NegatedShellPositive { inner: l, outer: k };
        for t in [-3.0, -1.0, -0.2, 0.0, 0.8, 2.2] {
            assert_eq!(fp.apply(t) - fm.apply(t), f.apply(t));
            assert_eq!(fp.apply(t) + fm.apply(t), h.apply(t));
            assert_eq!(nfp.apply(t), -fp.apply(t));
        }
        assert!(fp.is_nondecreasing());
        assert!(!nfp.is_nondecreasing());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn truncation_is_odd_bounded_lipschitz(
                t in -1e6f64..1e6, s in -1e6f64..1e6, l in 1e-3f64..1e3
            ) {
                let gt = truncate(t, l).unwrap();
                let gs = truncate(s, l).unwrap();
                prop_assert!(gt.abs() <= l);
                prop_assert_eq!(truncate(-t, l).unwrap(), -gt);
                prop_assert!((gt - gs).abs() <= (t - s).abs());
                if t <= s { prop_assert!(gt <= gs); }
            }

            #[test]
            fn shell_forms_agree(t in -50f64..50.0, l in 1e-3f64..10.0, w in 0f64..10.0) {
                let p = TruncationPair::new(l, l + w).unwrap();
                let h = shell_magnitude(t, p).unwrap();
                prop_assert_eq!(h, shell_magnitude_lattice(t, p).unwrap());
                let f = shell_signed(t, p).unwrap();
                prop_assert_eq!(h, f.abs());
                prop_assert_eq!(h, pos_part(f).unwrap() + neg_part(f).unwrap());
                prop_assert_eq!(h, shell_magnitude(-t, p).unwrap());
                prop_assert!(h >= 0.0 && h <= p.outer() - p.inner());
            }
        }
    }
}
