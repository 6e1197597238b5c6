//! LM-in-the-loop wrapper feature selection.
//!
//! The engine evolves a pool of feature subsets: classical importance
//! methods seed the population, a language model acting through role-play
//! prompts proposes recombinations, an N-fold cross-validation harness
//! scores every proposal, and per-epoch filtration keeps the best U and
//! worst V subsets. An exhaustive enumeration oracle ranks every non-empty
//! subset so selections can be scored against ground truth.

pub mod baselines;
pub mod cli;
pub mod evolution;
pub mod lmops;
pub mod models;
pub mod oracle;
pub mod tabular;

mod error;
mod fset;
pub mod seeding;

pub use error::{Error, Result};
pub use fset::FeatureSet;

/// Rounds an accuracy fraction to a percentage with three decimals,
/// half-up. All reported percentages go through this.
pub fn percent(fraction: f64) -> f64 {
    ((fraction * 100.0 * 1000.0) + 0.5).floor() / 1000.0
}
