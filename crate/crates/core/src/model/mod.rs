//! Dependence models: exactly enumerable finite joint laws, Gaussian-copula
//! sequences and stochastic-domination certificates.

pub mod copula;
pub mod domination;
pub mod finite;
pub mod marginal;

pub use copula::{CopulaSequenceModel, CorrelationFn, DependenceSign, LagProfile, SequenceSampler};
pub use domination::{check_domination, DominationCertificate, GridRatio};
pub use finite::{FiniteJointModel, FiniteModelSpec, PairTable, TableEntry, Window, DEFAULT_ENUMERATION_BUDGET};
pub use marginal::Marginal;

use serde::{Deserialize, Serialize};

/// Either kind of model, as read from a configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Finite { spec: FiniteModelSpec },
    Copula { model: CopulaSequenceModel },
}
