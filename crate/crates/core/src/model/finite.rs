//! Exactly enumerable joint laws of finite random vectors.
//!
//! The joint pmf is stored densely over the mixed-radix outcome space, with
//! the first variable as the most significant digit, so flat index order is
//! lexicographic order of outcome tuples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::marginal::Marginal;
use crate::numeric::compensated_sum;
use crate::transform::Transform;

/// Default cap on the number of outcomes a model may enumerate.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

const STRICT_SUM_TOLERANCE: f64 = 1e-9;
const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Outcome values, one per variable; each must appear in that variable's support.
    pub outcome: Vec<f64>,
    pub p: f64,
}

fn default_strict() -> bool {
    true
}

/// Declarative description of a finite joint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiniteModelSpec {
    /// Independent variables with the given finite marginals.
    Product { marginals: Vec<Marginal> },
    /// `length` independent copies of one finite marginal.
    Iid { marginal: Marginal, length: usize },
    /// Explicit joint pmf; outcomes not listed have probability 0.
    Table {
        supports: Vec<Vec<f64>>,
        entries: Vec<TableEntry>,
        #[serde(default = "default_strict")]
        strict: bool,
    },
    /// `X_1 = … = X_length` with the given marginal.
    Comonotone { marginal: Marginal, length: usize },
    /// Independent concatenation of blocks.
    Concat { blocks: Vec<FiniteModelSpec> },
    /// `copies` independent copies of a block.
    Repeat { block: Box<FiniteModelSpec>, copies: usize },
}

/// A joint law over `supports[0] × … × supports[N-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJointModel {
    supports: Vec<Vec<f64>>,
    strides: Vec<usize>,
    pmf: Vec<f64>,
    /// Group label per variable; variables with different labels are
    /// independent by construction.
    groups: Vec<usize>,
}

/// Joint pmf of two coordinates, row-major over `xs × ys`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub p: Vec<f64>,
    /// Known independent, so every dependence functional is exactly 0
    /// rather than a rounding residue of `p − p_x p_y`.
    pub independent: bool,
}

impl PairTable {
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.ys.len() + b]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.xs.len()).map(|a| compensated_sum((0..self.ys.len()).map(|b| self.at(a, b)))).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.ys.len()).map(|b| compensated_sum((0..self.xs.len()).map(|a| self.at(a, b)))).collect()
    }

    /// A two-variable model with this pmf.
    pub fn to_model(&self) -> Result<FiniteJointModel> {
        FiniteJointModel::from_dense(vec![self.xs.clone(), self.ys.clone()], self.p.clone(), true, u64::MAX)
    }
}

/// Which part of the range of `|x|` a marginal moment integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    All,
    /// `|x| > level`
    Above { level: f64 },
    /// `|x| ≤ level`
    Within { level: f64 },
    /// `inner < |x| ≤ outer`
    Annulus { inner: f64, outer: f64 },
}

impl Window {
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        let a = x.abs();
        match *self {
            Window::All => true,
            Window::Above { level } => a > level,
            Window::Within { level } => a <= level,
            Window::Annulus { inner, outer } => inner < a && a <= outer,
        }
    }
}

pub(crate) fn outcome_count(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().fold(1u128, |acc, s| acc.saturating_mul(s as u128))
}

pub(crate) fn check_budget(needed: u128, budget: u64) -> Result<()> {
    if needed > budget as u128 {
        Err(Error::Budget { needed, budget })
    } else {
        Ok(())
    }
}

fn validate_support(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Model("empty support".into()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("support values must be finite".into()));
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Model("support must be strictly increasing".into()));
    }
    Ok(())
}

fn finite_atoms(m: &Marginal) -> Result<Vec<(f64, f64)>> {
    m.validate()?;
    m.atoms()
        .ok_or_else(|| Error::Model(format!("finite models need finite-support marginals, got {m:?}")))
}

impl FiniteJointModel {
    pub fn build(spec: &FiniteModelSpec, budget: u64) -> Result<Self> {
        match spec {
            FiniteModelSpec::Product { marginals } => {
                if marginals.is_empty() {
                    return Err(Error::Model("product of zero variables".into()));
                }
                let blocks: Result<Vec<_>> =
                    marginals.iter().map(|m| Self::single(m)).collect();
                Self::concat(&blocks?, budget)
            }
            FiniteModelSpec::Iid { marginal, length } => {
                if *length == 0 {
                    return Err(Error::Model("length must be positive".into()));
                }
                let one = Self::single(marginal)?;
                Self::concat(&vec![one; *length], budget)
            }
            FiniteModelSpec::Table { supports, entries, strict } => {
                Self::from_table(supports.clone(), entries, *strict, budget)
            }
            FiniteModelSpec::Comonotone { marginal, length } => {
                if *length == 0 {
                    return Err(Error::Model("length must be positive".into()));
                }
                let atoms = finite_atoms(marginal)?;
                let support: Vec<f64> = atoms.iter().map(|a| a.0).collect();
                let supports = vec![support; *length];
                check_budget(outcome_count(supports.iter().map(|s| s.len())), budget)?;
                let mut model = Self::zeros(supports);
                for (a, (_, p)) in atoms.iter().enumerate() {
                    let idx: usize = model.strides.iter().map(|s| s * a).sum();
                    model.pmf[idx] = *p;
                }
                Ok(model)
            }
            FiniteModelSpec::Concat { blocks } => {
                if blocks.is_empty() {
                    return Err(Error::Model("concatenation of zero blocks".into()));
                }
                let built: Result<Vec<_>> = blocks.iter().map(|b| Self::build(b, budget)).collect();
                Self::concat(&built?, budget)
            }
            FiniteModelSpec::Repeat { block, copies } => {
                if *copies == 0 {
                    return Err(Error::Model("copies must be positive".into()));
                }
                let one = Self::build(block, budget)?;
                Self::concat(&vec![one; *copies], budget)
            }
        }
    }

    /// A model from a dense pmf in lexicographic order.
    pub fn from_dense(supports: Vec<Vec<f64>>, pmf: Vec<f64>, strict: bool, budget: u64) -> Result<Self> {
        for s in &supports {
            validate_support(s)?;
        }
        if supports.is_empty() {
            return Err(Error::Model("model needs at least one variable".into()));
        }
        let needed = outcome_count(supports.iter().map(|s| s.len()));
        check_budget(needed, budget)?;
        if pmf.len() as u128 != needed {
            return Err(Error::Model(format!("pmf has {} entries, expected {needed}", pmf.len())));
        }
        let mut model = Self::zeros(supports);
        model.pmf = pmf;
        model.normalize(strict)?;
        Ok(model)
    }

    fn single(m: &Marginal) -> Result<Self> {
        let atoms = finite_atoms(m)?;
        Ok(Self {
            supports: vec![atoms.iter().map(|a| a.0).collect()],
            strides: vec![1],
            pmf: atoms.iter().map(|a| a.1).collect(),
            groups: vec![0],
        })
    }

    fn zeros(supports: Vec<Vec<f64>>) -> Self {
        let mut strides = vec![1usize; supports.len()];
        for j in (0..supports.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * supports[j + 1].len();
        }
        let total = supports.iter().map(|s| s.len()).product();
        let groups = vec![0; supports.len()];
        Self { supports, strides, pmf: vec![0.0; total], groups }
    }

    fn from_table(supports: Vec<Vec<f64>>, entries: &[TableEntry], strict: bool, budget: u64) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::Model("model needs at least one variable".into()));
        }
        for s in &supports {
            validate_support(s)?;
        }
        check_budget(outcome_count(supports.iter().map(|s| s.len())), budget)?;
        let mut model = Self::zeros(supports);
        for e in entries {
            if !(e.p >= 0.0) {
                return Err(Error::Model(format!("negative probability {} in table", e.p)));
            }
            if e.outcome.len() != model.len() {
                return Err(Error::Model(format!(
                    "outcome {:?} has {} coordinates, model has {}",
                    e.outcome,
                    e.outcome.len(),
                    model.len()
                )));
            }
            let mut idx = 0usize;
            for (j, v) in e.outcome.iter().enumerate() {
                let a = model.supports[j]
                    .iter()
                    .position(|s| s == v)
                    .ok_or_else(|| Error::Model(format!("value {v} not in support of variable {}", j + 1)))?;
                idx += a * model.strides[j];
            }
            model.pmf[idx] += e.p;
        }
        model.normalize(strict)?;
        Ok(model)
    }

    fn concat(blocks: &[Self], budget: u64) -> Result<Self> {
        let needed = outcome_count(blocks.iter().map(|b| b.pmf.len()));
        check_budget(needed, budget)?;
        let mut supports = Vec::new();
        let mut groups = Vec::new();
        let mut pmf = vec![1.0];
        for b in blocks {
            supports.extend(b.supports.iter().cloned());
            let offset = groups.iter().max().map_or(0, |g| g + 1);
            groups.extend(b.groups.iter().map(|g| g + offset));
            let mut next = Vec::with_capacity(pmf.len() * b.pmf.len());
            for p in &pmf {
                next.extend(b.pmf.iter().map(|q| p * q));
            }
            pmf = next;
        }
        let mut model = Self::zeros(supports);
        model.pmf = pmf;
        model.groups = groups;
        model.normalize(false)?;
        Ok(model)
    }

    fn normalize(&mut self, strict: bool) -> Result<()> {
        if let Some(p) = self.pmf.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::Model(format!("negative or NaN probability {p}")));
        }
        let s = compensated_sum(self.pmf.iter().copied());
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Model(format!("probabilities sum to {s}")));
        }
        if strict && (s - 1.0).abs() > STRICT_SUM_TOLERANCE {
            return Err(Error::Model(format!("probabilities sum to {s}, not 1")));
        }
        if s != 1.0 {
            for p in &mut self.pmf {
                *p /= s;
            }
        }
        let s = compensated_sum(self.pmf.iter().copied());
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Model(format!("probabilities sum to {s} after normalization")));
        }
        Ok(())
    }

    /// Number of variables.
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn supports(&self) -> &[Vec<f64>] {
        &self.supports
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn outcome_count(&self) -> usize {
        self.pmf.len()
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Digit of variable `j` in flat outcome index `idx`.
    #[inline]
    pub(crate) fn digit(&self, idx: usize, j: usize) -> usize {
        (idx / self.strides[j]) % self.supports[j].len()
    }

    pub fn prob_of(&self, digits: &[usize]) -> Result<f64> {
        if digits.len() != self.len() {
            return Err(Error::Model("outcome tuple has wrong length".into()));
        }
        let mut idx = 0;
        for (j, d) in digits.iter().enumerate() {
            if *d >= self.supports[j].len() {
                return Err(Error::Index { index: *d, len: self.supports[j].len() });
            }
            idx += d * self.strides[j];
        }
        Ok(self.pmf[idx])
    }

    pub(crate) fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            Err(Error::Index { index: j, len: self.len() })
        } else {
            Ok(())
        }
    }

    /// Probabilities of the atoms of variable `j` (0-based).
    pub fn marginal_probs(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        let n = self.supports[j].len();
        let mut acc = vec![crate::numeric::CompensatedSum::new(); n];
        for (idx, p) in self.pmf.iter().enumerate() {
            if *p != 0.0 {
                acc[self.digit(idx, j)].add(*p);
            }
        }
        Ok(acc.iter().map(|a| a.total()).collect())
    }

    pub fn marginal(&self, j: usize) -> Result<Marginal> {
        Ok(Marginal::Discrete { values: self.supports[j].clone(), probs: self.marginal_probs(j)? })
    }

    /// Joint pmf of variables `i` and `j` (0-based, distinct).
    pub fn pair_table(&self, i: usize, j: usize) -> Result<PairTable> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return domain("pair functionals need two distinct indices");
        }
        let (nx, ny) = (self.supports[i].len(), self.supports[j].len());
        if self.groups[i] != self.groups[j] {
            let (px, py) = (self.marginal_probs(i)?, self.marginal_probs(j)?);
            return Ok(PairTable {
                xs: self.supports[i].clone(),
                ys: self.supports[j].clone(),
                p: px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect(),
                independent: true,
            });
        }
        let mut acc = vec![crate::numeric::CompensatedSum::new(); nx * ny];
        for (idx, p) in self.pmf.iter().enumerate() {
            if *p != 0.0 {
                acc[self.digit(idx, i) * ny + self.digit(idx, j)].add(*p);
            }
        }
        Ok(PairTable {
            xs: self.supports[i].clone(),
            ys: self.supports[j].clone(),
            p: acc.iter().map(|a| a.total()).collect(),
            independent: false,
        })
    }

    pub fn mean(&self, j: usize) -> Result<f64> {
        self.expect(j, &Transform::Identity)
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.mean(j).expect("index in range")).collect()
    }

    pub fn expect(&self, j: usize, tr: &Transform) -> Result<f64> {
        let probs = self.marginal_probs(j)?;
        Ok(compensated_sum(self.supports[j].iter().zip(&probs).map(|(v, p)| p * tr.apply(*v))))
    }

    /// `E |X_j|^q I{|X_j| ∈ window}`, exact by enumeration of the marginal.
    pub fn marginal_moment(&self, j: usize, q: f64, window: Window) -> Result<f64> {
        if !(q >= 0.0) {
            return domain(format!("moment power must be nonnegative, got {q}"));
        }
        let probs = self.marginal_probs(j)?;
        Ok(compensated_sum(
            self.supports[j]
                .iter()
                .zip(&probs)
                .filter(|(v, _)| window.contains(**v))
                .map(|(v, p)| if q == 0.0 { *p } else { p * v.abs().powf(q) }),
        ))
    }

    /// True when the model was built from independent pieces with one
    /// variable each, e.g. a product or i.i.d. specification.
    pub fn is_independent_by_construction(&self) -> bool {
        let mut seen = self.groups.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == self.groups.len()
    }

    /// True when the joint pmf equals the product of its marginals within `tol`.
    pub fn is_product(&self, tol: f64) -> bool {
        let margs: Vec<Vec<f64>> = (0..self.len()).map(|j| self.marginal_probs(j).unwrap()).collect();
        self.pmf.iter().enumerate().all(|(idx, p)| {
            let q: f64 = (0..self.len()).map(|j| margs[j][self.digit(idx, j)]).product();
            (p - q).abs() <= tol
        })
    }

    /// The largest `|x|` carrying positive probability for any variable.
    pub fn max_abs_support(&self) -> f64 {
        (0..self.len())
            .flat_map(|j| {
                let probs = self.marginal_probs(j).unwrap();
                self.supports[j]
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(v, _)| v.abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// Values of the outcome with flat index `idx`.
    pub fn outcome_values(&self, idx: usize, out: &mut [f64]) {
        for j in 0..self.len() {
            out[j] = self.supports[j][self.digit(idx, j)];
        }
    }

    pub fn sampler(&self) -> FiniteSampler<'_> {
        let mut cdf = Vec::with_capacity(self.pmf.len());
        let mut acc = crate::numeric::CompensatedSum::new();
        for p in &self.pmf {
            acc.add(*p);
            cdf.push(acc.total());
        }
        FiniteSampler { model: self, cdf }
    }
}

/// Inverse-CDF sampler over lexicographically ordered outcomes.
pub struct FiniteSampler<'a> {
    model: &'a FiniteJointModel,
    cdf: Vec<f64>,
}

impl FiniteSampler<'_> {
    pub fn model(&self) -> &FiniteJointModel {
        self.model
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|c| *c <= u);
        // Skip zero-probability outcomes that share a cumulative value.
        idx.min(self.cdf.len() - 1)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let idx = self.sample_index(rng);
        self.model.outcome_values(idx, out);
    }
}
