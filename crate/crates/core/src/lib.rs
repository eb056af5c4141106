//! User-guided Bayesian ensemble feature selection.
//!
//! Votes from an ensemble of elementary feature selectors are treated as
//! multinomial evidence about per-feature importances, combined with
//! user-supplied prior weights in a Dirichlet-type model, and the final
//! feature set is found by maximizing posterior utility under relaxed side
//! constraints with a genetic algorithm seeded by a probabilistic sampler.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: datasets, CSV ingestion, stratified splits, synthetic generators
//! - [`elementary`]: Fisher score, mRMR and CART selectors plus the ensemble loop
//! - [`prior`]: Dirichlet, generalized Dirichlet and hyperdirichlet posteriors
//! - [`constraints`]: relaxed admissibility and the joint admissibility product
//! - [`optimizer`]: utility/risk, initial sampler, GA, brute-force oracle, pipeline
//! - [`evaluation`]: feature F1, stability, redundancy rate, repeated-split runner
//! - [`cli`]: JSON configuration, reports and the `ubayfs` command line

pub mod cli;
pub mod constraints;
pub mod data;
pub mod elementary;
pub mod error;
pub mod evaluation;
pub mod feature_set;
pub mod optimizer;
pub mod prior;
pub mod rng;
mod stats;

pub use error::{Error, Result};
pub use feature_set::FeatureSet;
