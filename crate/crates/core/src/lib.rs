//! Margin-based active learning for contextual linear optimization.
//!
//! A stream learner decides, one feature vector at a time, whether to pay for
//! the cost-vector label. The decision is driven by how close the current
//! model's prediction sits to a degenerate cost vector of the downstream
//! linear program: predictions deep inside a normal cone are trusted, those
//! near a boundary are labeled.
//!
//! Module map:
//! - [`polytope`]: vertex-represented feasible regions, the linear optimization
//!   oracle and the distance to degeneracy.
//! - [`losses`]: SPO, SPO+ and regression surrogates.
//! - [`hypothesis`]: affine predictors and the (sub)gradient ERM trainer.
//! - [`mbal`]: the stream learner and the supervised baseline.
//! - [`datagen`]: synthetic shortest-path and pricing worlds.
//! - [`metrics`]: excess risk, near-degeneracy estimates and ratio tables.

pub mod datagen;
pub mod error;
pub mod hypothesis;
pub mod losses;
pub mod mbal;
pub mod metrics;
pub mod polytope;
pub mod rng;

pub use error::{Error, Result};
