//! Gaussian-copula sequences: `X_i = F^{-1}(Φ(Z_i))` for a stationary
//! standard Gaussian sequence `Z` with a given lag correlation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bivariate::normal_quadrant_deviation;
use crate::error::{Error, Result};
use crate::model::finite::PairTable;
use crate::model::marginal::{gaussian_score, GaussianTransform, Marginal};
use crate::numeric::norm_quantile;
use crate::rng::replica_rng;

/// Correlations below this magnitude are treated as exact zeros when a
/// geometric correlation function is cut to a finite band.
const NEGLIGIBLE_CORRELATION: f64 = 1e-17;

/// Lag correlation `ρ(ℓ)` of the latent Gaussian sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationFn {
    Independent,
    /// `rho[ℓ − 1] = ρ(ℓ)` for `1 ≤ ℓ ≤ rho.len()`, zero beyond.
    Banded { rho: Vec<f64> },
    /// `ρ(ℓ) = φ^ℓ` with `−1 < φ ≤ 1`; `φ = 1` is the comonotone sequence.
    Geometric { phi: f64 },
}

/// Declared pairwise dependence sign, validated on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceSign {
    Pqd,
    Nqd,
    Independent,
    Indefinite,
}

/// Distinct correlations by lag, in a form suited to pair counting.
#[derive(Debug, Clone, PartialEq)]
pub enum LagProfile {
    /// `ρ(ℓ) = band[ℓ − 1]` up to the band width, zero beyond.
    Band(Vec<f64>),
    /// Every lag has the same correlation.
    Constant(f64),
}

fn default_window() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSequenceModel {
    pub marginal: Marginal,
    pub correlation: CorrelationFn,
    pub sign: DependenceSign,
    /// Largest window whose correlation matrix is checked for positive semidefiniteness.
    #[serde(default = "default_window")]
    pub psd_window: usize,
}

impl CopulaSequenceModel {
    pub fn new(marginal: Marginal, correlation: CorrelationFn, sign: DependenceSign) -> Result<Self> {
        let m = Self { marginal, correlation, sign, psd_window: default_window() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.marginal.validate()?;
        match &self.correlation {
            CorrelationFn::Independent => {}
            CorrelationFn::Banded { rho } => {
                if let Some(r) = rho.iter().find(|r| !(r.abs() <= 1.0)) {
                    return Err(Error::Model(format!("lag correlation {r} outside [-1, 1]")));
                }
            }
            CorrelationFn::Geometric { phi } => {
                if !(*phi > -1.0 && *phi <= 1.0) {
                    return Err(Error::Model(format!("geometric correlation needs -1 < phi <= 1, got {phi}")));
                }
            }
        }
        let lags: Vec<f64> = (1..self.psd_window.max(2)).map(|l| self.rho(l as u64)).collect();
        let ok = match self.sign {
            DependenceSign::Pqd => lags.iter().all(|r| *r >= 0.0),
            DependenceSign::Nqd => lags.iter().all(|r| *r <= 0.0),
            DependenceSign::Independent => lags.iter().all(|r| *r == 0.0),
            DependenceSign::Indefinite => true,
        };
        if !ok {
            return Err(Error::Model(format!(
                "declared sign {:?} is inconsistent with the correlation function",
                self.sign
            )));
        }
        check_toeplitz_psd(|l| self.rho(l as u64), self.psd_window.max(1))
    }

    /// `ρ(lag)`, with `ρ(0) = 1`.
    pub fn rho(&self, lag: u64) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        match &self.correlation {
            CorrelationFn::Independent => 0.0,
            CorrelationFn::Banded { rho } => rho.get((lag - 1) as usize).copied().unwrap_or(0.0),
            CorrelationFn::Geometric { phi } => {
                if lag > i32::MAX as u64 {
                    if *phi == 1.0 { 1.0 } else { 0.0 }
                } else {
                    phi.powi(lag as i32)
                }
            }
        }
    }

    pub fn lag_profile(&self) -> LagProfile {
        match &self.correlation {
            CorrelationFn::Independent => LagProfile::Band(vec![]),
            CorrelationFn::Banded { rho } => {
                let mut band = rho.clone();
                while band.last() == Some(&0.0) {
                    band.pop();
                }
                LagProfile::Band(band)
            }
            CorrelationFn::Geometric { phi } => {
                if *phi == 1.0 {
                    LagProfile::Constant(1.0)
                } else {
                    let mut band = Vec::new();
                    let mut r = *phi;
                    while r.abs() >= NEGLIGIBLE_CORRELATION {
                        band.push(r);
                        r *= phi;
                    }
                    LagProfile::Band(band)
                }
            }
        }
    }

    pub fn mean(&self) -> Result<f64> {
        self.marginal.mean()
    }

    /// Quadrant deviation of `(X_i, X_{i+lag})` at `(u, v)`.
    pub fn quadrant_deviation(&self, lag: u64, u: f64, v: f64) -> f64 {
        let rho = self.rho(lag);
        normal_quadrant_deviation(gaussian_score(&self.marginal, u), gaussian_score(&self.marginal, v), rho)
    }

    /// Exact joint pmf of a pair at correlation `rho` for finite marginals.
    pub fn pair_table(&self, rho: f64) -> Result<PairTable> {
        let atoms = self
            .marginal
            .atoms()
            .ok_or_else(|| Error::Unsupported("pair tables need a finite-support marginal".into()))?;
        Ok(gaussian_pair_table(&atoms, rho))
    }

    pub fn sampler(&self, len: usize) -> Result<SequenceSampler> {
        SequenceSampler::new(self, len)
    }

    /// Sample `X_1..X_len` for replica 0 of `seed`.
    pub fn sample_sequence(&self, len: usize, seed: u64) -> Result<Vec<f64>> {
        let s = self.sampler(len)?;
        let mut out = vec![0.0; len];
        s.sample(seed, 0, &mut out);
        Ok(out)
    }
}

/// Joint pmf of two variables with common finite marginal `atoms` coupled by
/// a Gaussian copula with correlation `rho`.
pub(crate) fn gaussian_pair_table(atoms: &[(f64, f64)], rho: f64) -> PairTable {
    let n = atoms.len();
    let probs: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    // Gaussian scores of the upper cumulative levels; the last is +∞.
    let mut acc = 0.0;
    let scores: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            acc += p;
            if i + 1 == n { f64::INFINITY } else { norm_quantile(acc.min(1.0)) }
        })
        .collect();
    // d[a][b] = Δ at the upper corner of cell (a, b); zero on the outer edges.
    let d = |a: isize, b: isize| -> f64 {
        if a < 0 || b < 0 {
            0.0
        } else {
            normal_quadrant_deviation(scores[a as usize], scores[b as usize], rho)
        }
    };
    let mut p = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let (ai, bi) = (a as isize, b as isize);
            let mixed = d(ai, bi) - d(ai - 1, bi) - d(ai, bi - 1) + d(ai - 1, bi - 1);
            p[a * n + b] = (probs[a] * probs[b] + mixed).max(0.0);
        }
    }
    let xs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    PairTable { ys: xs.clone(), xs, p, independent: rho == 0.0 }
}

/// Cholesky test of the Toeplitz matrix `[ρ(|i−j|)]` of size `n`.
pub(crate) fn check_toeplitz_psd(rho: impl Fn(usize) -> f64, n: usize) -> Result<()> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = rho(i - j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s < -1e-10 {
                    return Err(Error::Model(format!(
                        "correlation window of size {} is not positive semidefinite",
                        i + 1
                    )));
                }
                l[i * n + i] = s.max(0.0).sqrt();
            } else {
                let d = l[j * n + j];
                if d > 1e-12 {
                    l[i * n + j] = s / d;
                } else if s.abs() > 1e-8 {
                    return Err(Error::Model(format!(
                        "correlation window of size {} is not positive semidefinite",
                        i + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Latent {
    Independent,
    /// Banded lower Cholesky factor, row `i` holding `L[i][i−d]` at offset `d`.
    Banded { width: usize, factor: Vec<f64> },
    Ar1 { phi: f64 },
}

/// A sampler for sequences of fixed length; holds the precomputed factor.
#[derive(Debug, Clone)]
pub struct SequenceSampler {
    len: usize,
    latent: Latent,
    transform: GaussianTransform,
}

impl SequenceSampler {
    fn new(model: &CopulaSequenceModel, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Model("sequence length must be positive".into()));
        }
        let latent = match &model.correlation {
            CorrelationFn::Independent => Latent::Independent,
            CorrelationFn::Geometric { phi } => {
                if *phi == 0.0 { Latent::Independent } else { Latent::Ar1 { phi: *phi } }
            }
            CorrelationFn::Banded { .. } => match model.lag_profile() {
                LagProfile::Band(b) if b.is_empty() => Latent::Independent,
                LagProfile::Band(b) => banded_cholesky(&b, len)?,
                LagProfile::Constant(_) => unreachable!("banded correlation has a finite band"),
            },
        };
        Ok(Self { len, latent, transform: GaussianTransform::new(&model.marginal) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Fill `out` (length `len`) with replica `replica` of `seed`.
    pub fn sample(&self, seed: u64, replica: u64, out: &mut [f64]) {
        let mut rng = replica_rng(seed, replica);
        self.sample_with(&mut rng, out);
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.len, "output buffer length");
        for w in out.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        match &self.latent {
            Latent::Independent => {}
            Latent::Ar1 { phi } => {
                if *phi == 1.0 {
                    let z0 = out[0];
                    out.iter_mut().for_each(|z| *z = z0);
                } else {
                    let s = (1.0 - phi * phi).sqrt();
                    for i in 1..out.len() {
                        out[i] = phi * out[i - 1] + s * out[i];
                    }
                }
            }
            Latent::Banded { width, factor } => {
                let q = *width;
                // Z = L W computed from the end so W values are still available.
                for i in (0..out.len()).rev() {
                    let row = &factor[i * (q + 1)..(i + 1) * (q + 1)];
                    let mut z = 0.0;
                    for d in 0..=q.min(i) {
                        z += row[d] * out[i - d];
                    }
                    out[i] = z;
                }
            }
        }
        for x in out.iter_mut() {
            *x = self.transform.apply(*x);
        }
    }
}

fn banded_cholesky(band: &[f64], n: usize) -> Result<Latent> {
    let q = band.len();
    let w = q + 1;
    let a = |i: usize, j: usize| -> f64 {
        let d = i - j;
        if d == 0 { 1.0 } else if d <= q { band[d - 1] } else { 0.0 }
    };
    // factor[i*w + d] = L[i][i-d]
    let mut f = vec![0.0; n * w];
    for i in 0..n {
        let lo = i.saturating_sub(q);
        for j in lo..=i {
            let mut s = a(i, j);
            let klo = lo.max(j.saturating_sub(q));
            for k in klo..j {
                s -= f[i * w + (i - k)] * f[j * w + (j - k)];
            }
            if i == j {
                if s < -1e-10 {
                    return Err(Error::Model(format!(
                        "banded correlation is not positive semidefinite at size {}",
                        i + 1
                    )));
                }
                f[i * w] = s.max(0.0).sqrt();
            } else {
                let d = f[j * w];
                if d > 1e-12 {
                    f[i * w + (i - j)] = s / d;
                } else if s.abs() > 1e-8 {
                    return Err(Error::Model(format!(
                        "banded correlation is not positive semidefinite at size {}",
                        i + 1
                    )));
                }
            }
        }
    }
    Ok(Latent::Banded { width: q, factor: f })
}
