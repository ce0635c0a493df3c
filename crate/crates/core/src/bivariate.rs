//! Quadrant deviation of the standard bivariate normal law.

use crate::numeric::{integrate_adaptive, norm_cdf};

/// `Φ₂(a, b; ρ) − Φ(a)Φ(b)`.
///
/// Uses the identity `∂Φ₂/∂ρ = φ₂(a, b; ρ)` integrated along `ρ = sin θ`,
/// which yields the deviation directly instead of as a difference of two
/// nearly equal probabilities.
pub fn normal_quadrant_deviation(a: f64, b: f64, rho: f64) -> f64 {
    if rho == 0.0 || a.is_infinite() || b.is_infinite() || a.is_nan() || b.is_nan() {
        return 0.0;
    }
    let (fa, fb) = (norm_cdf(a), norm_cdf(b));
    if rho >= 1.0 {
        return fa.min(fb) - fa * fb;
    }
    if rho <= -1.0 {
        return (fa + fb - 1.0).max(0.0) - fa * fb;
    }
    let upper = rho.asin();
    let s = a * a + b * b;
    let ab = 2.0 * a * b;
    let f = move |theta: f64| {
        let (sn, cs) = theta.sin_cos();
        (-(s - ab * sn) / (2.0 * cs * cs)).exp()
    };
    integrate_adaptive(&f, 0.0, upper, 1e-15) / (2.0 * std::f64::consts::PI)
}

/// `Φ₂(a, b; ρ)`.
pub fn normal_joint_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    (norm_cdf(a) * norm_cdf(b) + normal_quadrant_deviation(a, b, rho)).clamp(0.0, 1.0)
}
