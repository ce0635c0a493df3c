//! Run configuration: one JSON document per run.

use std::path::Path;

use maxineq::model::{CopulaSequenceModel, CorrelationFn, DependenceSign, FiniteModelSpec, Marginal};
use maxineq::quadrant::Evaluation;
use maxineq::scheme::NormingScheme;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides the enumeration budget of every exact computation.
pub const BUDGET_ENV: &str = "MAXINEQ_ENUM_BUDGET";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub model: ModelConfig,
    pub scheme: NormingScheme,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub verify: Option<VerifyParams>,
    #[serde(default)]
    pub conditions: Option<ConditionParams>,
    #[serde(default)]
    pub experiment: Option<ExperimentParams>,
    #[serde(default)]
    pub oracle: Option<OracleParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Finite {
        spec: FiniteModelSpec,
    },
    Copula {
        marginal: Marginal,
        correlation: CorrelationFn,
        sign: DependenceSign,
        #[serde(default)]
        evaluation: Option<Evaluation>,
        #[serde(default, rename = "psdWindow")]
        psd_window: Option<usize>,
    },
}

impl ModelConfig {
    pub fn copula(&self) -> Result<Option<(CopulaSequenceModel, Evaluation)>, CliError> {
        let ModelConfig::Copula { marginal, correlation, sign, evaluation, psd_window } = self else {
            return Ok(None);
        };
        let mut model = CopulaSequenceModel::new(marginal.clone(), correlation.clone(), *sign)?;
        if let Some(w) = psd_window {
            model.psd_window = *w;
            model.validate()?;
        }
        let eval = evaluation.unwrap_or_else(|| default_evaluation(marginal));
        Ok(Some((model, eval)))
    }
}

/// Exact for finite supports, quadrature for the Gaussian, Monte Carlo for
/// Pareto tails.
pub fn default_evaluation(marginal: &Marginal) -> Evaluation {
    match marginal {
        Marginal::StandardGaussian => Evaluation::quadrature(),
        Marginal::SymmetricPareto { .. } => Evaluation::MonteCarlo { samples: 200_000, seed: 0 },
        _ => Evaluation::Exact,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VerifyParams {
    pub n: u32,
    pub epsilons: Vec<f64>,
    /// Defaults to the calibrated constant.
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicas() -> u64 {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConditionParams {
    /// Dominating law for (b'), (c), (d), (e); defaults to the common
    /// marginal of identically distributed models.
    #[serde(default)]
    pub envelope: Option<Marginal>,
    #[serde(default = "d_growth")]
    pub growth_max_n: u32,
    #[serde(default = "d_b")]
    pub condition_b_max_n: u32,
    #[serde(default = "d_series")]
    pub series_cutoff: u32,
    #[serde(default = "d_cov")]
    pub covariance_cutoff: u32,
    #[serde(default = "d_pairs")]
    pub corollary_cutoff: u32,
    #[serde(default = "d_pairs")]
    pub pqd_cutoff: u32,
    #[serde(default = "d_shells")]
    pub moment_shells: u32,
    #[serde(default = "d_len")]
    pub moment_max_length: u64,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
}

fn d_growth() -> u32 {
    200
}
fn d_b() -> u32 {
    40
}
fn d_series() -> u32 {
    200
}
fn d_cov() -> u32 {
    120
}
fn d_pairs() -> u32 {
    60
}
fn d_shells() -> u32 {
    4
}
fn d_len() -> u64 {
    32
}
fn d_tol() -> f64 {
    maxineq::slln::DEFAULT_TOLERANCE
}

impl Default for ConditionParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentParams {
    /// Defaults to the scheme's `p`.
    #[serde(default)]
    pub p: Option<f64>,
    pub checkpoints: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eps_ladder: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OracleParams {
    pub n: u32,
    pub epsilons: Vec<f64>,
    #[serde(default = "d_oracle_replicas")]
    pub replicas: u64,
    #[serde(default = "d_meta")]
    pub meta_replications: u64,
    #[serde(default)]
    pub seed: u64,
}

fn d_oracle_replicas() -> u64 {
    2_000
}
fn d_meta() -> u64 {
    100
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_epsilons(section: &str, eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() {
        return Err(bad(format!("{section}.epsilons must not be empty")));
    }
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(bad(format!("{section}.epsilons: {e} is not a positive number")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse and validate; serde messages carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks that need no computation.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(v) = self.schema_version {
            if v != SCHEMA_VERSION {
                return Err(bad(format!("schemaVersion {v} is not supported (expected {SCHEMA_VERSION})")));
            }
        }
        self.scheme.validate().map_err(|e| bad(format!("scheme: {e}")))?;
        if let Some(v) = &self.verify {
            check_epsilons("verify", &v.epsilons)?;
        }
        if let Some(o) = &self.oracle {
            check_epsilons("oracle", &o.epsilons)?;
            if o.meta_replications == 0 {
                return Err(bad("oracle.metaReplications must be positive"));
            }
        }
        if let Some(c) = &self.conditions {
            if !(c.tolerance > 0.0 && c.tolerance.is_finite()) {
                return Err(bad("conditions.tolerance must be positive"));
            }
            if c.moment_shells == 0 || c.moment_max_length == 0 {
                return Err(bad("conditions.momentShells and momentMaxLength must be positive"));
            }
        }
        if let Some(x) = &self.experiment {
            if x.seeds.is_empty() {
                return Err(bad("experiment.seeds must list at least one seed"));
            }
            if x.checkpoints.is_empty() || x.checkpoints[0] == 0 || x.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("experiment.checkpoints must be positive and strictly increasing"));
            }
            if let Some(p) = x.p {
                if !(1.0..2.0).contains(&p) {
                    return Err(bad(format!("experiment.p must lie in [1, 2), got {p}")));
                }
            }
            if x.eps_ladder.iter().any(|e| !(*e > 0.0)) {
                return Err(bad("experiment.epsLadder values must be positive"));
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> Result<u64, CliError> {
        if let Ok(v) = std::env::var(BUDGET_ENV) {
            return v.trim().parse().map_err(|_| bad(format!("{BUDGET_ENV}={v} is not a non-negative integer")));
        }
        Ok(self.budget.unwrap_or(maxineq::model::DEFAULT_ENUMERATION_BUDGET))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kind": "finite", "spec": {"kind": "iid", "marginal": {"kind": "two_point", "low": -1, "high": 1, "p_high": 0.5}, "length": 4}},
        "scheme": {"kind": "power", "p": 1.0, "alpha": 1.5, "r": 2}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert!(matches!(cfg.model, ModelConfig::Finite { .. }));
        assert!(cfg.verify.is_none());
    }

    #[test]
    fn bad_exponent_is_rejected() {
        let text = MINIMAL.replace("\"p\": 1.0", "\"p\": 2.5");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("p must lie"), "{err}");
    }

    #[test]
    fn unknown_fields_report_their_line() {
        let text = MINIMAL.replace("\"budget\"", "").replacen("{\n", "{\n        \"bogus\": 1,\n", 1);
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        v["experiment"] = serde_json::json!({"checkpoints": [10], "seeds": []});
        let err = RunConfig::parse(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("seeds"), "{err}");
    }
}
