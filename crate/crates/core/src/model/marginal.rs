//! One-dimensional distribution descriptors with the truncated moments the
//! inequalities need in closed form.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::numeric::{compensated_sum, norm_cdf, norm_pdf, norm_quantile, norm_sf};
use crate::transform::Transform;

/// A marginal law. Discrete variants are exact; `SymmetricPareto` and
/// `StandardGaussian` use analytic formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
    /// `B − p` for `B ~ Bernoulli(p)`.
    CenteredBernoulli { p: f64 },
    /// Random sign times a Pareto(1, β) magnitude: `P{|X| > t} = t^{−β}` for `t ≥ 1`.
    SymmetricPareto { tail_index: f64 },
    StandardGaussian,
    /// Finite support given as strictly increasing values with probabilities.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::TwoPoint { low, high, p_high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return domain(format!("two-point law needs finite low < high, got {low}, {high}"));
                }
                if !(0.0..=1.0).contains(p_high) {
                    return domain(format!("two-point probability {p_high} outside [0, 1]"));
                }
                Ok(())
            }
            Marginal::CenteredBernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return domain(format!("Bernoulli probability {p} outside [0, 1]"));
                }
                Ok(())
            }
            Marginal::SymmetricPareto { tail_index } => {
                if !(tail_index.is_finite() && *tail_index > 0.0) {
                    return domain(format!("Pareto tail index must be positive, got {tail_index}"));
                }
                Ok(())
            }
            Marginal::StandardGaussian => Ok(()),
            Marginal::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return domain("discrete law needs matching nonempty values and probs");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return domain("discrete support values must be finite");
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return domain("discrete support must be strictly increasing");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return domain("discrete probabilities must be nonnegative");
                }
                let s = compensated_sum(probs.iter().copied());
                if (s - 1.0).abs() > 1e-12 {
                    return domain(format!("discrete probabilities sum to {s}, not 1"));
                }
                Ok(())
            }
        }
    }

    /// Atoms `(value, probability)` for finite-support laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Marginal::TwoPoint { low, high, p_high } => {
                Some(vec![(*low, 1.0 - p_high), (*high, *p_high)])
            }
            Marginal::CenteredBernoulli { p } => Some(vec![(-p, 1.0 - p), (1.0 - p, *p)]),
            Marginal::Discrete { values, probs } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.atoms().is_some()
    }

    /// True when `X` and `−X` have the same law.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Marginal::SymmetricPareto { .. } | Marginal::StandardGaussian => true,
            _ => {
                let atoms = self.atoms().unwrap_or_default();
                let n = atoms.len();
                (0..n).all(|i| {
                    let (v, p) = atoms[i];
                    let (w, q) = atoms[n - 1 - i];
                    v == -w && p == q
                })
            }
        }
    }

    /// Smallest `T` with `P{|X| > T}` negligible (zero for finite support);
    /// `None` for heavy tails.
    pub fn effective_bound(&self) -> Option<f64> {
        match self {
            Marginal::StandardGaussian => Some(GAUSSIAN_BOUND),
            Marginal::SymmetricPareto { .. } => None,
            _ => self
                .atoms()
                .map(|a| a.iter().filter(|(_, p)| *p > 0.0).fold(0.0f64, |m, (v, _)| m.max(v.abs()))),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            Marginal::SymmetricPareto { tail_index } => {
                if *tail_index <= 1.0 {
                    domain(format!("Pareto tail index {tail_index} has no finite mean"))
                } else {
                    Ok(0.0)
                }
            }
            Marginal::StandardGaussian => Ok(0.0),
            _ => Ok(self.discrete_expectation(|x| x)),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => norm_cdf(x),
            Marginal::SymmetricPareto { tail_index } => {
                if x <= -1.0 {
                    0.5 * (-x).powf(-tail_index)
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0 - 0.5 * x.powf(-tail_index)
                }
            }
            _ => {
                let atoms = self.atoms().expect("discrete");
                compensated_sum(atoms.iter().filter(|(v, _)| *v <= x).map(|(_, p)| *p)).min(1.0)
            }
        }
    }

    /// `P{|X| > t}`.
    pub fn tail_abs(&self, t: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => {
                if t < 0.0 {
                    1.0
                } else {
                    2.0 * norm_sf(t)
                }
            }
            Marginal::SymmetricPareto { tail_index } => {
                if t < 1.0 {
                    1.0
                } else {
                    t.powf(-tail_index)
                }
            }
            _ => self.discrete_expectation(|x| if x.abs() > t { 1.0 } else { 0.0 }),
        }
    }

    /// `E|X| I{|X| > t}`.
    pub fn abs_moment_above(&self, t: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => 2.0 * norm_pdf(t.max(0.0)),
            Marginal::SymmetricPareto { tail_index: b } => {
                if *b <= 1.0 {
                    f64::INFINITY
                } else {
                    b / (b - 1.0) * t.max(1.0).powf(1.0 - b)
                }
            }
            _ => self.discrete_expectation(|x| if x.abs() > t { x.abs() } else { 0.0 }),
        }
    }

    /// `E X² I{|X| ≤ t}`.
    pub fn second_moment_within(&self, t: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => {
                if t <= 0.0 {
                    0.0
                } else {
                    (1.0 - 2.0 * norm_sf(t) - 2.0 * t * norm_pdf(t)).max(0.0)
                }
            }
            Marginal::SymmetricPareto { tail_index: b } => {
                if t < 1.0 {
                    0.0
                } else if (b - 2.0).abs() < 1e-15 {
                    2.0 * t.ln()
                } else {
                    b / (2.0 - b) * (t.powf(2.0 - b) - 1.0)
                }
            }
            _ => self.discrete_expectation(|x| if x.abs() <= t { x * x } else { 0.0 }),
        }
    }

    /// `E|X|^q`.
    pub fn abs_power_moment(&self, q: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => {
                2f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            Marginal::SymmetricPareto { tail_index: b } => {
                if q < *b {
                    b / (b - q)
                } else {
                    f64::INFINITY
                }
            }
            _ => self.discrete_expectation(|x| x.abs().powf(q)),
        }
    }

    /// `∫_l^k P{|X| > s} ds` for `0 ≤ l ≤ k`.
    pub fn integrated_tail(&self, l: f64, k: f64) -> f64 {
        if k <= l {
            return 0.0;
        }
        match self {
            Marginal::StandardGaussian => {
                let anti = |s: f64| s * norm_sf(s) - norm_pdf(s);
                (2.0 * (anti(k) - anti(l))).max(0.0)
            }
            Marginal::SymmetricPareto { tail_index: b } => {
                let flat = (k.min(1.0) - l).max(0.0);
                let lo = l.max(1.0);
                if k <= lo {
                    return flat;
                }
                let upper = if (b - 1.0).abs() < 1e-15 {
                    (k / lo).ln()
                } else {
                    (k.powf(1.0 - b) - lo.powf(1.0 - b)) / (1.0 - b)
                };
                flat + upper
            }
            _ => self.discrete_expectation(|x| (x.abs().min(k) - l).max(0.0)),
        }
    }

    /// `E φ(X)` for a transform from the truncation family.
    pub fn expect(&self, tr: &Transform) -> Result<f64> {
        tr.validate()?;
        if let Some(atoms) = self.atoms() {
            return Ok(compensated_sum(atoms.iter().map(|(v, p)| p * tr.apply(*v))));
        }
        let shell = |inner: f64, outer: f64| self.integrated_tail(inner, outer);
        Ok(match *tr {
            Transform::Identity => self.mean()?,
            Transform::Shifted { shift } => self.mean()? + shift,
            Transform::Truncate { .. } | Transform::ShellSigned { .. } => 0.0,
            Transform::ShellMagnitude { inner, outer } => shell(inner, outer),
            Transform::ShellPositive { inner, outer } | Transform::ShellNegative { inner, outer } => {
                0.5 * shell(inner, outer)
            }
            Transform::NegatedShellPositive { inner, outer } => -0.5 * shell(inner, outer),
        })
    }

    /// `E φ(X)²` for a transform from the truncation family.
    pub fn expect_square(&self, tr: &Transform) -> Result<f64> {
        tr.validate()?;
        if let Some(atoms) = self.atoms() {
            return Ok(compensated_sum(atoms.iter().map(|(v, p)| {
                let y = tr.apply(*v);
                p * y * y
            })));
        }
        // E (|X| ∧ K − L)^2 I{|X| > L}
        let shell_sq = |l: f64, k: f64| {
            let annulus_sq = self.second_moment_within(k) - self.second_moment_within(l);
            let annulus_abs = (self.abs_moment_above(l) - self.abs_moment_above(k)).max(0.0);
            let annulus_p = (self.tail_abs(l) - self.tail_abs(k)).max(0.0);
            let inside = annulus_sq - 2.0 * l * annulus_abs + l * l * annulus_p;
            inside.max(0.0) + (k - l) * (k - l) * self.tail_abs(k)
        };
        Ok(match *tr {
            Transform::Identity => self.abs_power_moment(2.0),
            Transform::Shifted { shift } => {
                self.abs_power_moment(2.0) + 2.0 * shift * self.mean()? + shift * shift
            }
            Transform::Truncate { level } => {
                self.second_moment_within(level) + level * level * self.tail_abs(level)
            }
            Transform::ShellMagnitude { inner, outer } | Transform::ShellSigned { inner, outer } => {
                shell_sq(inner, outer)
            }
            Transform::ShellPositive { inner, outer }
            | Transform::ShellNegative { inner, outer }
            | Transform::NegatedShellPositive { inner, outer } => 0.5 * shell_sq(inner, outer),
        })
    }

    /// Quantile function `F^{-1}(u)` (left-continuous inverse).
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Marginal::StandardGaussian => norm_quantile(u),
            Marginal::SymmetricPareto { tail_index } => {
                if u < 0.5 {
                    -(2.0 * u).powf(-1.0 / tail_index)
                } else {
                    (2.0 * (1.0 - u)).powf(-1.0 / tail_index)
                }
            }
            _ => {
                let atoms = self.atoms().expect("discrete");
                let mut acc = 0.0;
                for (v, p) in &atoms {
                    acc += p;
                    if u <= acc {
                        return *v;
                    }
                }
                atoms.last().map(|(v, _)| *v).unwrap_or(0.0)
            }
        }
    }

    fn discrete_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let atoms = self.atoms().expect("discrete marginal");
        compensated_sum(atoms.iter().map(|(v, p)| p * f(*v)))
    }
}

/// Beyond this level the Gaussian tail is below `1e−18`.
pub(crate) const GAUSSIAN_BOUND: f64 = 9.0;

/// Maps a standard normal draw `z` to a draw of the marginal, `F^{-1}(Φ(z))`,
/// without losing precision in the tails.
#[derive(Debug, Clone)]
pub struct GaussianTransform {
    kind: TransformKind,
}

#[derive(Debug, Clone)]
enum TransformKind {
    Identity,
    Pareto(f64),
    /// Upper normal thresholds: value `values[i]` is taken when
    /// `thresholds[i-1] < z <= thresholds[i]`.
    Steps { thresholds: Vec<f64>, values: Vec<f64> },
}

impl GaussianTransform {
    pub fn new(marginal: &Marginal) -> Self {
        let kind = match marginal {
            Marginal::StandardGaussian => TransformKind::Identity,
            Marginal::SymmetricPareto { tail_index } => TransformKind::Pareto(*tail_index),
            _ => {
                let atoms = marginal.atoms().expect("discrete");
                let mut acc = 0.0;
                let mut thresholds = Vec::with_capacity(atoms.len());
                let mut values = Vec::with_capacity(atoms.len());
                for (i, (v, p)) in atoms.iter().enumerate() {
                    acc += p;
                    let t = if i + 1 == atoms.len() { f64::INFINITY } else { norm_quantile(acc.min(1.0)) };
                    thresholds.push(t);
                    values.push(*v);
                }
                TransformKind::Steps { thresholds, values }
            }
        };
        Self { kind }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match &self.kind {
            TransformKind::Identity => z,
            TransformKind::Pareto(b) => {
                if z >= 0.0 {
                    (2.0 * norm_sf(z)).powf(-1.0 / b)
                } else {
                    -(2.0 * norm_cdf(z)).powf(-1.0 / b)
                }
            }
            TransformKind::Steps { thresholds, values } => {
                let idx = thresholds.partition_point(|t| *t < z);
                values[idx.min(values.len() - 1)]
            }
        }
    }
}

/// `Φ^{-1}(F(x))`, the Gaussian score of a marginal value.
pub(crate) fn gaussian_score(marginal: &Marginal, x: f64) -> f64 {
    match marginal {
        Marginal::StandardGaussian => x,
        Marginal::SymmetricPareto { tail_index } => {
            if x <= -1.0 {
                norm_quantile(0.5 * (-x).powf(-tail_index))
            } else if x < 1.0 {
                0.0
            } else {
                -norm_quantile(0.5 * x.powf(-tail_index))
            }
        }
        _ => norm_quantile(marginal.cdf(x)),
    }
}
