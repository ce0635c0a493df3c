//! Numerical workbench for maximal inequalities and strong laws of large
//! numbers for dependent sequences.
//!
//! The crate evaluates truncated covariance functionals, the four-term
//! maximal-inequality bound and the series conditions of the strong law on
//! concrete models: exactly on finite joint laws by enumeration, and by
//! quadrature or Monte Carlo on Gaussian-copula sequences.

pub mod bivariate;
pub mod blocks;
pub mod error;
pub mod maxineq;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod quadrant;
pub mod rng;
pub mod scheme;
pub mod sequence;
pub mod slln;
pub mod stats;
pub mod transform;

pub use error::{Error, Result};
