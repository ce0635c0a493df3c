//! Quadrant deviation `Δ` and the truncated covariance functionals
//! `G(L) = Cov(g_L(X), g_L(Y))` and `H(L, K) = Cov(h_{L,K}(X), h_{L,K}(Y))`.
//!
//! Every functional has two independent routes: the covariance of the
//! transformed pair, and Hoeffding's identity
//! `Cov(φ(X), ψ(Y)) = ∫∫ φ'(u) ψ'(v) Δ(u, v) du dv`, which for the
//! piecewise-linear transforms used here reduces to a signed sum of
//! rectangle integrals of `Δ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bivariate::normal_quadrant_deviation;
use crate::error::{domain, Error, Result};
use crate::model::copula::gaussian_pair_table;
use crate::model::marginal::gaussian_score;
use crate::model::{CopulaSequenceModel, FiniteJointModel, Marginal, PairTable};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::rng::replica_rng;
use crate::transform::Transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Quadrature,
    #[serde(rename = "montecarlo")]
    MonteCarlo,
}

/// How a functional should be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Evaluation {
    Exact,
    /// Midpoint rule with `cells` cells per rectangle side, refined once for
    /// a Richardson estimate. Finite-support laws use exact cell sums.
    Quadrature {
        #[serde(default = "default_cells")]
        cells: usize,
    },
    #[serde(rename = "montecarlo")]
    MonteCarlo { samples: usize, seed: u64 },
}

fn default_cells() -> usize {
    96
}

impl Evaluation {
    pub fn quadrature() -> Self {
        Evaluation::Quadrature { cells: default_cells() }
    }

    pub fn method(&self) -> Method {
        match self {
            Evaluation::Exact => Method::Exact,
            Evaluation::Quadrature { .. } => Method::Quadrature,
            Evaluation::MonteCarlo { .. } => Method::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovFunctionalResult {
    pub value: f64,
    pub method: Method,
    /// 0 for exact values, the Richardson estimate for quadrature, the
    /// standard error for Monte Carlo.
    pub error_bound: f64,
}

impl CovFunctionalResult {
    pub fn exact(value: f64) -> Self {
        Self { value, method: Method::Exact, error_bound: 0.0 }
    }
}

/// `0 ∨ x`. Applied to aggregated block sums, never pair by pair.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 { x } else { 0.0 }
}

/// `[Σ x_i]^+`.
pub fn positive_part_of_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    positive_part(compensated_sum(terms))
}

/// One side of a shell rectangle: `[L, K]` or `[−K, −L]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellSide {
    Upper,
    Lower,
}

impl ShellSide {
    pub fn interval(self, inner: f64, outer: f64) -> (f64, f64) {
        match self {
            ShellSide::Upper => (inner, outer),
            ShellSide::Lower => (-outer, -inner),
        }
    }
}

/// The four signed rectangles whose `Δ`-integrals sum to `H(L, K)`:
/// `(u-side, v-side, sign)`.
pub const SHELL_RECTANGLES: [(ShellSide, ShellSide, f64); 4] = [
    (ShellSide::Upper, ShellSide::Upper, 1.0),
    (ShellSide::Lower, ShellSide::Lower, 1.0),
    (ShellSide::Upper, ShellSide::Lower, -1.0),
    (ShellSide::Lower, ShellSide::Upper, -1.0),
];

/// Intervals on which the transform has constant nonzero slope, with that
/// slope. The transforms in this crate are piecewise linear with slopes ±1.
pub fn slope_pieces(tr: &Transform) -> Vec<(f64, f64, f64)> {
    match *tr {
        Transform::Identity | Transform::Shifted { .. } => {
            vec![(f64::NEG_INFINITY, f64::INFINITY, 1.0)]
        }
        Transform::Truncate { level } => vec![(-level, level, 1.0)],
        Transform::ShellMagnitude { inner, outer } => SHELL_SIDES
            .iter()
            .map(|(side, s)| {
                let (a, b) = side.interval(inner, outer);
                (a, b, *s)
            })
            .collect(),
        Transform::ShellSigned { inner, outer } => vec![(-outer, -inner, 1.0), (inner, outer, 1.0)],
        Transform::ShellPositive { inner, outer } => vec![(inner, outer, 1.0)],
        Transform::ShellNegative { inner, outer } => vec![(-outer, -inner, -1.0)],
        Transform::NegatedShellPositive { inner, outer } => vec![(inner, outer, -1.0)],
    }
}

/// Slope of `h_{L,K}` on each side; their products give the signs in
/// [`SHELL_RECTANGLES`].
const SHELL_SIDES: [(ShellSide, f64); 2] = [(ShellSide::Upper, 1.0), (ShellSide::Lower, -1.0)];

/// The joint law of a pair of variables.
#[derive(Debug, Clone, PartialEq)]
pub enum PairLaw {
    Table(PairTable),
    /// Common continuous marginal coupled by a Gaussian copula.
    Gaussian { marginal: Marginal, rho: f64 },
}

impl PairLaw {
    /// Pair `(X_i, X_{i+lag})` of a copula sequence. Finite marginals give an
    /// exact table.
    pub fn from_copula(model: &CopulaSequenceModel, lag: u64) -> Result<Self> {
        if lag == 0 {
            return domain("pair functionals need two distinct indices");
        }
        let rho = model.rho(lag);
        Ok(match model.marginal.atoms() {
            Some(atoms) => PairLaw::Table(gaussian_pair_table(&atoms, rho)),
            None => PairLaw::Gaussian { marginal: model.marginal.clone(), rho },
        })
    }

    /// Pair `(X_i, X_j)` of a finite model, 0-based indices.
    pub fn from_finite(model: &FiniteJointModel, i: usize, j: usize) -> Result<Self> {
        Ok(PairLaw::Table(model.pair_table(i, j)?))
    }

    pub fn delta(&self, u: f64, v: f64) -> f64 {
        match self {
            PairLaw::Table(t) => table_delta(t, u, v),
            PairLaw::Gaussian { marginal, rho } => {
                normal_quadrant_deviation(gaussian_score(marginal, u), gaussian_score(marginal, v), *rho)
            }
        }
    }

    /// True when `Δ ≡ 0`, known without computation.
    fn is_trivially_independent(&self) -> bool {
        matches!(self, PairLaw::Gaussian { rho, .. } if *rho == 0.0)
    }

    /// `Cov(φ(X), φ(Y))` by the requested route.
    pub fn covariance(&self, tr: &Transform, eval: &Evaluation) -> Result<CovFunctionalResult> {
        tr.validate()?;
        if self.is_trivially_independent() {
            return Ok(CovFunctionalResult { value: 0.0, method: eval.method(), error_bound: 0.0 });
        }
        match *eval {
            Evaluation::Exact => self.exact_covariance(tr),
            Evaluation::Quadrature { cells } => self.hoeffding_covariance(tr, cells),
            Evaluation::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return domain("Monte Carlo covariance needs at least two samples");
                }
                let pairs = self.sample_pairs(samples, seed, 0);
                Ok(sample_covariance(&pairs, tr))
            }
        }
    }

    pub fn g(&self, level: f64, eval: &Evaluation) -> Result<CovFunctionalResult> {
        self.covariance(&Transform::Truncate { level }, eval)
    }

    pub fn h(&self, inner: f64, outer: f64, eval: &Evaluation) -> Result<CovFunctionalResult> {
        self.covariance(&Transform::ShellMagnitude { inner, outer }, eval)
    }

    fn exact_covariance(&self, tr: &Transform) -> Result<CovFunctionalResult> {
        match self {
            PairLaw::Table(t) => Ok(CovFunctionalResult::exact(table_covariance(t, tr))),
            PairLaw::Gaussian { marginal, rho } if *rho == 1.0 => {
                let m = marginal.expect(tr)?;
                let v = marginal.expect_square(tr)? - m * m;
                Ok(CovFunctionalResult::exact(v.max(0.0)))
            }
            PairLaw::Gaussian { .. } => Err(Error::Unsupported(
                "exact covariance needs a finite-support or comonotone pair; use quadrature or montecarlo".into(),
            )),
        }
    }

    fn hoeffding_covariance(&self, tr: &Transform, cells: usize) -> Result<CovFunctionalResult> {
        let pieces = slope_pieces(tr);
        let mut value = CompensatedSum::new();
        let mut err = 0.0;
        for &(ua, ub, su) in &pieces {
            for &(va, vb, sv) in &pieces {
                let (v, e) = self.rectangle_integral((ua, ub), (va, vb), cells)?;
                value.add(su * sv * v);
                err += e;
            }
        }
        Ok(CovFunctionalResult { value: value.total(), method: Method::Quadrature, error_bound: err })
    }

    /// `∫_{u∈I} ∫_{v∈J} Δ(u, v) dv du` with its error estimate.
    pub fn rectangle_integral(
        &self,
        (ua, ub): (f64, f64),
        (va, vb): (f64, f64),
        cells: usize,
    ) -> Result<(f64, f64)> {
        match self {
            PairLaw::Table(t) => Ok((table_rectangle(t, (ua, ub), (va, vb)), 0.0)),
            PairLaw::Gaussian { marginal, .. } => {
                // Δ vanishes where either marginal cdf is 0 or 1.
                let (lo, hi) = match marginal.effective_bound() {
                    Some(b) => (-b, b),
                    None => (f64::NEG_INFINITY, f64::INFINITY),
                };
                let (ua, ub, va, vb) = (ua.max(lo), ub.min(hi), va.max(lo), vb.min(hi));
                if ua >= ub || va >= vb {
                    return Ok((0.0, 0.0));
                }
                if !(ua.is_finite() && ub.is_finite() && va.is_finite() && vb.is_finite()) {
                    return Err(Error::Unsupported(
                        "quadrature over an unbounded range needs a light-tailed marginal".into(),
                    ));
                }
                if cells == 0 {
                    return domain("quadrature needs at least one cell");
                }
                let f = |u: f64, v: f64| self.delta(u, v);
                let coarse = midpoint_2d(&f, (ua, ub), (va, vb), cells);
                let fine = midpoint_2d(&f, (ua, ub), (va, vb), 2 * cells);
                let extrapolated = fine + (fine - coarse) / 3.0;
                Ok((extrapolated, (fine - coarse).abs() / 3.0))
            }
        }
    }

    /// `samples` independent draws of the pair, deterministic in `(seed, stream)`.
    pub fn sample_pairs(&self, samples: usize, seed: u64, stream: u64) -> Vec<(f64, f64)> {
        let mut rng = replica_rng(seed, stream);
        match self {
            PairLaw::Table(t) => {
                let mut cdf = Vec::with_capacity(t.p.len());
                let mut acc = CompensatedSum::new();
                for p in &t.p {
                    acc.add(*p);
                    cdf.push(acc.total());
                }
                let total = *cdf.last().unwrap();
                let ny = t.ys.len();
                (0..samples)
                    .map(|_| {
                        let u = rng.random::<f64>() * total;
                        let idx = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
                        (t.xs[idx / ny], t.ys[idx % ny])
                    })
                    .collect()
            }
            PairLaw::Gaussian { marginal, rho } => {
                let gt = crate::model::marginal::GaussianTransform::new(marginal);
                let s = (1.0 - rho * rho).max(0.0).sqrt();
                (0..samples)
                    .map(|_| {
                        let z1: f64 = rng.sample(StandardNormal);
                        let w: f64 = rng.sample(StandardNormal);
                        (gt.apply(z1), gt.apply(rho * z1 + s * w))
                    })
                    .collect()
            }
        }
    }
}

fn midpoint_2d(f: &dyn Fn(f64, f64) -> f64, (ua, ub): (f64, f64), (va, vb): (f64, f64), n: usize) -> f64 {
    let (hu, hv) = ((ub - ua) / n as f64, (vb - va) / n as f64);
    let mut acc = CompensatedSum::new();
    for a in 0..n {
        let u = ua + (a as f64 + 0.5) * hu;
        for b in 0..n {
            acc.add(f(u, vb - (b as f64 + 0.5) * hv));
        }
    }
    acc.total() * hu * hv
}

/// `Σ_{x ≤ u} p` cumulative over sorted values.
fn cumulative(values: &[f64], probs: &[f64], x: f64) -> f64 {
    compensated_sum(values.iter().zip(probs).take_while(|(v, _)| **v <= x).map(|(_, p)| *p))
}

fn table_delta(t: &PairTable, u: f64, v: f64) -> f64 {
    if t.independent {
        return 0.0;
    }
    let a = t.xs.partition_point(|x| *x <= u);
    let b = t.ys.partition_point(|y| *y <= v);
    if a == 0 || b == 0 {
        return 0.0;
    }
    let joint = compensated_sum((0..a).flat_map(|i| (0..b).map(move |j| (i, j))).map(|(i, j)| t.at(i, j)));
    let fx = cumulative(&t.xs, &t.row_marginal(), u);
    let fy = cumulative(&t.ys, &t.col_marginal(), v);
    joint - fx * fy
}

fn table_covariance(t: &PairTable, tr: &Transform) -> f64 {
    if t.independent {
        return 0.0;
    }
    let px = t.row_marginal();
    let py = t.col_marginal();
    let fx: Vec<f64> = t.xs.iter().map(|x| tr.apply(*x)).collect();
    let fy: Vec<f64> = t.ys.iter().map(|y| tr.apply(*y)).collect();
    let mx = compensated_sum(fx.iter().zip(&px).map(|(f, p)| f * p));
    let my = compensated_sum(fy.iter().zip(&py).map(|(f, p)| f * p));
    let ny = t.ys.len();
    compensated_sum(
        t.p.iter().enumerate().filter(|(_, p)| **p != 0.0).map(|(idx, p)| p * (fx[idx / ny] - mx) * (fy[idx % ny] - my)),
    )
}

/// Lengths of `[a_k, a_{k+1}) ∩ [lo, hi]` for consecutive support points.
fn cell_overlaps(points: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].max(lo), w[1].min(hi));
            if b > a { b - a } else { 0.0 }
        })
        .collect()
}

/// Exact `∫∫ Δ` over a rectangle: `Δ` is constant on the cells cut out by
/// the support points and vanishes outside `[min x, max x) × [min y, max y)`.
fn table_rectangle(t: &PairTable, (ua, ub): (f64, f64), (va, vb): (f64, f64)) -> f64 {
    if t.independent || ua >= ub || va >= vb {
        return 0.0;
    }
    let (nx, ny) = (t.xs.len(), t.ys.len());
    let du = cell_overlaps(&t.xs, ua, ub);
    let dv = cell_overlaps(&t.ys, va, vb);
    if du.iter().all(|d| *d == 0.0) || dv.iter().all(|d| *d == 0.0) {
        return 0.0;
    }
    // Cumulative joint and marginal cdfs at the support points.
    let mut joint = vec![0.0; nx * ny];
    for a in 0..nx {
        let mut row = CompensatedSum::new();
        for b in 0..ny {
            row.add(t.at(a, b));
            joint[a * ny + b] = row.total() + if a > 0 { joint[(a - 1) * ny + b] } else { 0.0 };
        }
    }
    let fx: Vec<f64> = (0..nx).map(|a| joint[a * ny + ny - 1]).collect();
    let fy: Vec<f64> = (0..ny).map(|b| joint[(nx - 1) * ny + b]).collect();
    let mut acc = CompensatedSum::new();
    for (a, wu) in du.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        for (b, wv) in dv.iter().enumerate().filter(|(_, w)| **w > 0.0) {
            acc.add(wu * wv * (joint[a * ny + b] - fx[a] * fy[b]));
        }
    }
    acc.total()
}

/// Sample covariance of the transformed pairs with its standard error.
pub fn sample_covariance(pairs: &[(f64, f64)], tr: &Transform) -> CovFunctionalResult {
    let n = pairs.len() as f64;
    let mx = compensated_sum(pairs.iter().map(|(x, _)| tr.apply(*x))) / n;
    let my = compensated_sum(pairs.iter().map(|(_, y)| tr.apply(*y))) / n;
    let prods: Vec<f64> = pairs.iter().map(|(x, y)| (tr.apply(*x) - mx) * (tr.apply(*y) - my)).collect();
    let mean_prod = compensated_sum(prods.iter().copied()) / n;
    let var_prod = compensated_sum(prods.iter().map(|q| (q - mean_prod) * (q - mean_prod))) / (n - 1.0);
    CovFunctionalResult {
        value: mean_prod * n / (n - 1.0),
        method: Method::MonteCarlo,
        error_bound: (var_prod / n).sqrt(),
    }
}

/// `Δ_{X_i, X_j}(u, v)` for a finite model, 0-based indices, by enumeration.
pub fn quadrant_deviation(model: &FiniteJointModel, i: usize, j: usize, u: f64, v: f64) -> Result<f64> {
    Ok(table_delta(&model.pair_table(i, j)?, u, v))
}

/// `G_{X_i, X_j}(L)` for a finite model.
pub fn g_functional(model: &FiniteJointModel, i: usize, j: usize, level: f64, eval: &Evaluation) -> Result<CovFunctionalResult> {
    PairLaw::from_finite(model, i, j)?.g(level, eval)
}

/// `H_{X_i, X_j}(L, K)` for a finite model.
pub fn h_functional(
    model: &FiniteJointModel,
    i: usize,
    j: usize,
    inner: f64,
    outer: f64,
    eval: &Evaluation,
) -> Result<CovFunctionalResult> {
    PairLaw::from_finite(model, i, j)?.h(inner, outer, eval)
}

/// True when every `Δ` of every pair is `≥ −tol` (PQD) on the atom grid,
/// which covers all arguments since `Δ` is constant between atoms.
pub fn is_pairwise_pqd(model: &FiniteJointModel, tol: f64) -> Result<bool> {
    pairwise_sign(model, |d| d >= -tol)
}

/// True when every `Δ ≤ tol` (NQD).
pub fn is_pairwise_nqd(model: &FiniteJointModel, tol: f64) -> Result<bool> {
    pairwise_sign(model, |d| d <= tol)
}

fn pairwise_sign(model: &FiniteJointModel, ok: impl Fn(f64) -> bool) -> Result<bool> {
    for i in 0..model.len() {
        for j in (i + 1)..model.len() {
            let t = model.pair_table(i, j)?;
            for &u in &t.xs {
                for &v in &t.ys {
                    if !ok(table_delta(&t, u, v)) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
