//! Numeric helpers shared across modules: compensated summation, normal
//! distribution functions, power sums and Gauss–Legendre rules.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().total()
}

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("standard normal"))
}

// statrs' erfc loses about ten digits of relative accuracy in the body of
// the law; the musl port in libm is accurate to an ulp or so.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile; saturates to ±∞ at the endpoints.
pub fn norm_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        f64::NEG_INFINITY
    } else if u >= 1.0 {
        f64::INFINITY
    } else {
        // One Newton step against the accurate cdf polishes the initial guess.
        let x = std_normal().inverse_cdf(u);
        let d = norm_pdf(x);
        if d > 0.0 && x.is_finite() {
            let err = if u < 0.5 { norm_cdf(x) - u } else { (1.0 - u) - norm_sf(x) };
            x - err / d
        } else {
            x
        }
    }
}

/// `Σ_{n=a}^{b} n^{-s}` for `1 <= a <= b`, `s > 0`.
///
/// Sums the first terms directly and the remainder with Euler–Maclaurin.
pub fn power_sum(s: f64, a: u64, b: u64) -> f64 {
    if a > b {
        return 0.0;
    }
    debug_assert!(a >= 1);
    const DIRECT: u64 = 2_000;
    if b - a < DIRECT {
        return compensated_sum((a..=b).rev().map(|n| (n as f64).powf(-s)));
    }
    let head_end = a + DIRECT - 1;
    let head = compensated_sum((a..=head_end).rev().map(|n| (n as f64).powf(-s)));
    head + euler_maclaurin_tail(s, (head_end + 1) as f64, b as f64)
}

/// `Σ_{n=a}^{∞} n^{-s}` for `s > 1`.
pub fn power_sum_to_infinity(s: f64, a: u64) -> f64 {
    assert!(s > 1.0, "power_sum_to_infinity requires s > 1");
    const DIRECT: u64 = 2_000;
    let head_end = a + DIRECT - 1;
    let head = compensated_sum((a..=head_end).rev().map(|n| (n as f64).powf(-s)));
    let x = (head_end + 1) as f64;
    // f(x) = x^{-s}; tail via Euler–Maclaurin with the upper end at infinity.
    let integral = x.powf(1.0 - s) / (s - 1.0);
    let f = x.powf(-s);
    let d1 = -s * x.powf(-s - 1.0);
    let d3 = -s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0);
    head + integral + f / 2.0 - d1 / 12.0 + d3 / 720.0
}

fn euler_maclaurin_tail(s: f64, x: f64, y: f64) -> f64 {
    let integral = if (s - 1.0).abs() < 1e-15 {
        (y / x).ln()
    } else {
        (y.powf(1.0 - s) - x.powf(1.0 - s)) / (1.0 - s)
    };
    let f = |t: f64| t.powf(-s);
    let d1 = |t: f64| -s * t.powf(-s - 1.0);
    let d3 = |t: f64| -s * (s + 1.0) * (s + 2.0) * t.powf(-s - 3.0);
    integral + (f(x) + f(y)) / 2.0 + (d1(y) - d1(x)) / 12.0 - (d3(y) - d3(x)) / 720.0
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

type Rule = (Vec<f64>, Vec<f64>);

fn gl_pair() -> &'static (Rule, Rule) {
    static RULES: OnceLock<(Rule, Rule)> = OnceLock::new();
    RULES.get_or_init(|| (gauss_legendre(10), gauss_legendre(20)))
}

fn apply_rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &Rule) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// Each interval compares a 10-point and a 20-point rule and bisects until
/// they agree within `tol` (absolute) or the depth limit is reached.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (coarse_rule, fine_rule) = gl_pair();
        let coarse = apply_rule(f, a, b, coarse_rule);
        let fine = apply_rule(f, a, b, fine_rule);
        if (fine - coarse).abs() <= tol || depth == 0 {
            return fine;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, tol / 2.0, depth - 1) + go(f, m, b, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    go(f, a, b, tol, 30)
}

/// Ratio of two nonnegative quantities where `0/0` counts as 0.
pub(crate) fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `lhs <= rhs` up to `slack` scaled by the magnitude of the larger side.
pub fn le_with_slack(lhs: f64, rhs: f64, slack: f64) -> bool {
    lhs <= rhs + slack * lhs.abs().max(rhs.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1e16, 1.0, -1e16];
        v.extend(std::iter::repeat_n(1e-3, 1000));
        assert!((compensated_sum(v) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn power_sum_matches_direct_summation() {
        for &s in &[0.5, 1.0, 4.0 / 3.0, 1.6, 2.5] {
            for &(a, b) in &[(1u64, 10u64), (3, 5_000), (17, 200_000), (1000, 1_000_000)] {
                let direct: f64 = compensated_sum((a..=b).map(|n| (n as f64).powf(-s)));
                let fast = power_sum(s, a, b);
                assert!(
                    ((direct - fast) / direct).abs() < 1e-12,
                    "s={s} a={a} b={b}: {direct} vs {fast}"
                );
            }
        }
    }

    #[test]
    fn power_sum_to_infinity_zeta_two() {
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((power_sum_to_infinity(2.0, 1) - z2).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_integration() {
        let v = integrate_adaptive(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate_adaptive(&|x: f64| (-x * x / 2.0).exp(), -40.0, 40.0, 1e-14);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normal_functions() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
        assert_eq!(norm_quantile(0.0), f64::NEG_INFINITY);
        assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }
}
