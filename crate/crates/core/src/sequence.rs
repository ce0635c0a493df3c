//! Marginal and pairwise views of a dependent sequence, shared by the
//! maximal-inequality bound and the series conditions.
//!
//! Finite models answer every query by enumeration. Stationary copula
//! sequences reduce block sums to lag counting: for a window of `n`
//! consecutive indices, `Σ_{i<j} Cov = Σ_ℓ (n − ℓ) C_ℓ`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{domain, Error, Result};
use crate::model::{CopulaSequenceModel, FiniteJointModel, LagProfile, Marginal};
use crate::numeric::CompensatedSum;
use crate::quadrant::{sample_covariance, CovFunctionalResult, Evaluation, Method, PairLaw};
use crate::transform::Transform;

/// How the pairwise covariances of a sequence are organised.
#[derive(Debug, Clone, PartialEq)]
pub enum PairStructure {
    /// Arbitrary pairs, finitely many variables.
    Finite { len: u64 },
    /// Stationary; pairs at lag `> max_lag` are independent.
    Banded { max_lag: u64 },
    /// Stationary with the same dependence at every lag.
    Constant,
}

/// A sequence `X_1, X_2, …` seen through its one- and two-dimensional laws.
pub trait SequenceLaw: Sync {
    /// Number of variables; `None` for an unbounded stationary sequence.
    fn len(&self) -> Option<u64>;

    /// Law of `X_j`, `j ≥ 1`.
    fn marginal(&self, j: u64) -> Result<&Marginal>;

    fn structure(&self) -> PairStructure;

    /// `Cov(φ(X_i), φ(X_j))`, `i ≠ j`.
    fn pair_covariance(&self, i: u64, j: u64, tr: &Transform) -> Result<CovFunctionalResult>;

    /// `Σ_{start ≤ i < j ≤ end} Cov(φ(X_i), φ(X_j))`.
    fn block_covariance_sum(&self, start: u64, end: u64, tr: &Transform) -> Result<CovFunctionalResult> {
        self.check_range(start, end)?;
        let mut value = CompensatedSum::new();
        let mut err = 0.0;
        let mut method = Method::Exact;
        for i in start..=end {
            for j in (i + 1)..=end {
                let c = self.pair_covariance(i, j, tr)?;
                value.add(c.value);
                err += c.error_bound;
                method = worse(method, c.method);
            }
        }
        Ok(CovFunctionalResult { value: value.total(), method, error_bound: err })
    }

    /// `Σ_{j=start}^{end} f(law of X_j)`.
    fn marginal_sum(&self, start: u64, end: u64, f: &dyn Fn(&Marginal) -> Result<f64>) -> Result<f64> {
        self.check_range(start, end)?;
        let mut acc = CompensatedSum::new();
        for j in start..=end {
            acc.add(f(self.marginal(j)?)?);
        }
        Ok(acc.total())
    }

    fn check_range(&self, start: u64, end: u64) -> Result<()> {
        if start < 1 || end < start {
            return domain(format!("invalid index range [{start}, {end}]"));
        }
        match self.len() {
            Some(n) if end > n => Err(Error::Index { index: end as usize, len: n as usize }),
            _ => Ok(()),
        }
    }

    /// True when every pairwise covariance is identically zero.
    fn is_independent(&self) -> bool;

    fn identically_distributed(&self) -> bool;

    /// `E X_j`.
    fn mean(&self, j: u64) -> Result<f64> {
        self.marginal(j)?.mean()
    }

    /// Pair sum over any window of `span` consecutive indices, for laws
    /// whose pair covariances depend on the lag only. Counts are real, so
    /// `span` may exceed the integer index cap. `None` for other laws.
    fn window_covariance_sum(&self, _span: f64, _tr: &Transform) -> Option<Result<CovFunctionalResult>> {
        None
    }

    /// True when every pair is positively quadrant dependent.
    fn is_pairwise_pqd(&self) -> Result<bool>;
}

/// Ranks methods by how weak their guarantee is, for labelling aggregates.
pub(crate) fn worse(a: Method, b: Method) -> Method {
    let rank = |m: Method| match m {
        Method::Exact => 0,
        Method::Quadrature => 1,
        Method::MonteCarlo => 2,
    };
    if rank(b) > rank(a) { b } else { a }
}

/// A finite joint law with per-pair tables computed on first use.
pub struct FiniteSequence<'a> {
    model: &'a FiniteJointModel,
    marginals: Vec<Marginal>,
    pairs: Vec<OnceLock<PairLaw>>,
    eval: Evaluation,
    independent: bool,
}

impl<'a> FiniteSequence<'a> {
    pub fn new(model: &'a FiniteJointModel) -> Result<Self> {
        Self::with_evaluation(model, Evaluation::Exact)
    }

    pub fn with_evaluation(model: &'a FiniteJointModel, eval: Evaluation) -> Result<Self> {
        let n = model.len();
        let marginals = (0..n).map(|j| model.marginal(j)).collect::<Result<Vec<_>>>()?;
        let pairs = (0..n * n.saturating_sub(1) / 2).map(|_| OnceLock::new()).collect();
        Ok(FiniteSequence { model, marginals, pairs, eval, independent: model.is_independent_by_construction() || model.is_product(0.0) })
    }

    pub fn model(&self) -> &FiniteJointModel {
        self.model
    }

    fn pair_slot(&self, i: u64, j: u64) -> Result<usize> {
        let n = self.model.len() as u64;
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == j {
            return domain("pair functionals need two distinct indices");
        }
        if i < 1 || j > n {
            return Err(Error::Index { index: j as usize, len: n as usize });
        }
        // Row-major index into the strict upper triangle, 0-based.
        let (a, b) = (i - 1, j - 1);
        Ok((a * (2 * n - a - 1) / 2 + (b - a - 1)) as usize)
    }

    pub fn pair_law(&self, i: u64, j: u64) -> Result<&PairLaw> {
        let slot = self.pair_slot(i, j)?;
        if let Some(law) = self.pairs[slot].get() {
            return Ok(law);
        }
        let law = PairLaw::from_finite(self.model, (i.min(j) - 1) as usize, (i.max(j) - 1) as usize)?;
        Ok(self.pairs[slot].get_or_init(|| law))
    }
}

impl SequenceLaw for FiniteSequence<'_> {
    fn len(&self) -> Option<u64> {
        Some(self.model.len() as u64)
    }

    fn marginal(&self, j: u64) -> Result<&Marginal> {
        if j < 1 || j as usize > self.marginals.len() {
            return Err(Error::Index { index: j as usize, len: self.marginals.len() });
        }
        Ok(&self.marginals[j as usize - 1])
    }

    fn structure(&self) -> PairStructure {
        PairStructure::Finite { len: self.model.len() as u64 }
    }

    fn pair_covariance(&self, i: u64, j: u64, tr: &Transform) -> Result<CovFunctionalResult> {
        if self.independent {
            tr.validate()?;
            self.pair_slot(i, j)?;
            return Ok(CovFunctionalResult::exact(0.0));
        }
        self.pair_law(i, j)?.covariance(tr, &self.eval)
    }

    fn is_independent(&self) -> bool {
        self.independent
    }

    fn is_pairwise_pqd(&self) -> Result<bool> {
        crate::quadrant::is_pairwise_pqd(self.model, 1e-12)
    }

    fn identically_distributed(&self) -> bool {
        self.marginals.windows(2).all(|w| w[0] == w[1])
    }
}

/// A stationary Gaussian-copula sequence, optionally cut to `len` variables.
///
/// Covariances are cached per lag and transform. Monte Carlo evaluation
/// draws one sample set per lag and reuses it for every transform, so
/// functionals at different levels share common random numbers.
pub struct StationarySequence {
    model: CopulaSequenceModel,
    len: Option<u64>,
    eval: Evaluation,
    profile: LagProfile,
    laws: Vec<PairLaw>,
    samples: Vec<OnceLock<Vec<(f64, f64)>>>,
    cache: Mutex<HashMap<(u64, String), CovFunctionalResult>>,
    bound: Option<f64>,
}

impl StationarySequence {
    pub fn new(model: CopulaSequenceModel, len: Option<u64>, eval: Evaluation) -> Result<Self> {
        model.validate()?;
        if len == Some(0) {
            return domain("sequence length must be positive");
        }
        let profile = model.lag_profile();
        let laws = match &profile {
            LagProfile::Band(band) => {
                (1..=band.len() as u64).map(|l| PairLaw::from_copula(&model, l)).collect::<Result<Vec<_>>>()?
            }
            LagProfile::Constant(_) => vec![PairLaw::from_copula(&model, 1)?],
        };
        let samples = laws.iter().map(|_| OnceLock::new()).collect();
        let bound = model.marginal.effective_bound();
        Ok(StationarySequence { model, len, eval, profile, laws, samples, cache: Mutex::new(HashMap::new()), bound })
    }

    pub fn model(&self) -> &CopulaSequenceModel {
        &self.model
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    /// Pair law at `lag ≥ 1`.
    pub fn law_at_lag(&self, lag: u64) -> Result<PairLaw> {
        PairLaw::from_copula(&self.model, lag)
    }

    /// Levels at or above the effective bound of the marginal give the same
    /// transform; folding them together lets the cache absorb every large
    /// level. For the Gaussian marginal the bound is 9 and the folding error
    /// is below `P{|Z| > 9} ≈ 2e−19`.
    fn canonical(&self, tr: &Transform) -> Option<Transform> {
        let b = match self.bound {
            Some(b) => b,
            None => return Some(*tr),
        };
        let shell = |inner: f64, outer: f64, make: fn(f64, f64) -> Transform| {
            if inner >= b { None } else { Some(make(inner, outer.min(b))) }
        };
        match *tr {
            Transform::Truncate { level } => Some(Transform::Truncate { level: level.min(b) }),
            Transform::ShellMagnitude { inner, outer } => {
                shell(inner, outer, |inner, outer| Transform::ShellMagnitude { inner, outer })
            }
            Transform::ShellSigned { inner, outer } => {
                shell(inner, outer, |inner, outer| Transform::ShellSigned { inner, outer })
            }
            Transform::ShellPositive { inner, outer } => {
                shell(inner, outer, |inner, outer| Transform::ShellPositive { inner, outer })
            }
            Transform::ShellNegative { inner, outer } => {
                shell(inner, outer, |inner, outer| Transform::ShellNegative { inner, outer })
            }
            Transform::NegatedShellPositive { inner, outer } => {
                shell(inner, outer, |inner, outer| Transform::NegatedShellPositive { inner, outer })
            }
            other => Some(other),
        }
    }

    /// Covariance at `lag ≥ 1`.
    pub fn lag_covariance(&self, lag: u64, tr: &Transform) -> Result<CovFunctionalResult> {
        tr.validate()?;
        if lag == 0 {
            return domain("pair functionals need two distinct indices");
        }
        let slot = match &self.profile {
            LagProfile::Band(band) => {
                if lag as usize > band.len() || band[lag as usize - 1] == 0.0 {
                    return Ok(CovFunctionalResult::exact(0.0));
                }
                lag as usize - 1
            }
            LagProfile::Constant(rho) => {
                if *rho == 0.0 {
                    return Ok(CovFunctionalResult::exact(0.0));
                }
                0
            }
        };
        let tr = match self.canonical(tr) {
            Some(t) => t,
            None => return Ok(CovFunctionalResult::exact(0.0)),
        };
        let key = (slot as u64, format!("{tr:?}"));
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let result = match self.eval {
            Evaluation::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return domain("Monte Carlo covariance needs at least two samples");
                }
                let pairs = self.samples[slot].get_or_init(|| self.laws[slot].sample_pairs(samples, seed, slot as u64 + 1));
                sample_covariance(pairs, &tr)
            }
            ref eval => self.laws[slot].covariance(&tr, eval)?,
        };
        self.cache.lock().unwrap().insert(key, result);
        Ok(result)
    }

    fn real_window_sum(&self, span: f64, tr: &Transform) -> Result<CovFunctionalResult> {
        if !(span >= 1.0) {
            return domain(format!("window span must be at least 1, got {span}"));
        }
        match self.max_lag() {
            None => {
                let c = self.lag_covariance(1, tr)?;
                let pairs = span * (span - 1.0) / 2.0;
                Ok(CovFunctionalResult { value: pairs * c.value, method: c.method, error_bound: pairs * c.error_bound })
            }
            Some(w) => {
                let mut value = CompensatedSum::new();
                let mut err = 0.0;
                let mut method = Method::Exact;
                let mut lag = 1u64;
                while lag <= w && (lag as f64) < span {
                    let c = self.lag_covariance(lag, tr)?;
                    let count = span - lag as f64;
                    value.add(count * c.value);
                    err += count * c.error_bound;
                    method = worse(method, c.method);
                    lag += 1;
                }
                Ok(CovFunctionalResult { value: value.total(), method, error_bound: err })
            }
        }
    }

    /// Largest lag with nonzero dependence; `None` when every lag is dependent.
    pub fn max_lag(&self) -> Option<u64> {
        match &self.profile {
            LagProfile::Band(b) => Some(b.len() as u64),
            LagProfile::Constant(rho) if *rho == 0.0 => Some(0),
            LagProfile::Constant(_) => None,
        }
    }
}

impl SequenceLaw for StationarySequence {
    fn len(&self) -> Option<u64> {
        self.len
    }

    fn marginal(&self, j: u64) -> Result<&Marginal> {
        if j < 1 || self.len.is_some_and(|n| j > n) {
            return Err(Error::Index { index: j as usize, len: self.len.unwrap_or(0) as usize });
        }
        Ok(&self.model.marginal)
    }

    fn structure(&self) -> PairStructure {
        match self.max_lag() {
            Some(max_lag) => PairStructure::Banded { max_lag },
            None => PairStructure::Constant,
        }
    }

    fn pair_covariance(&self, i: u64, j: u64, tr: &Transform) -> Result<CovFunctionalResult> {
        self.check_range(i.min(j), i.max(j))?;
        self.lag_covariance(i.abs_diff(j), tr)
    }

    fn block_covariance_sum(&self, start: u64, end: u64, tr: &Transform) -> Result<CovFunctionalResult> {
        self.check_range(start, end)?;
        self.real_window_sum((end - start + 1) as f64, tr)
    }

    fn marginal_sum(&self, start: u64, end: u64, f: &dyn Fn(&Marginal) -> Result<f64>) -> Result<f64> {
        self.check_range(start, end)?;
        Ok((end - start + 1) as f64 * f(&self.model.marginal)?)
    }

    fn is_independent(&self) -> bool {
        self.max_lag() == Some(0)
    }

    fn window_covariance_sum(&self, span: f64, tr: &Transform) -> Option<Result<CovFunctionalResult>> {
        Some(self.real_window_sum(span, tr))
    }

    /// The declared sign, confirmed on a grid of quantile pairs for every
    /// dependent lag up to 16.
    fn is_pairwise_pqd(&self) -> Result<bool> {
        use crate::model::DependenceSign;
        if !matches!(self.model.sign, DependenceSign::Pqd | DependenceSign::Independent) {
            return Ok(false);
        }
        let grid: Vec<f64> = (1..20).map(|i| self.model.marginal.quantile(i as f64 / 20.0)).collect();
        let lags = self.max_lag().unwrap_or(16).min(16);
        for lag in 1..=lags {
            for &u in &grid {
                for &v in &grid {
                    if self.model.quadrant_deviation(lag, u, v) < -1e-12 {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn identically_distributed(&self) -> bool {
        true
    }
}
