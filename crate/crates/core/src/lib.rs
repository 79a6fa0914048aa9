//! Ranking models for right-censored survival data.
//!
//! Three loss families are trained on the same MLP and compared by the
//! concordance index: Cox partial likelihood (Breslow or Efron ties),
//! pairwise ranking surrogates, and a Wasserstein-style CDF loss whose
//! censored targets are imputed from a Kaplan–Meier curve.

pub mod data;
pub mod error;
pub mod harness;
pub mod estimators;
pub mod losses;
pub mod metrics;
pub mod neural;
pub mod pipeline;

pub use data::{Dataset, SurvivalRecord, TimeGrid};
pub use error::{Error, Result};
