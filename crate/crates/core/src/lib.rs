//! Code discriminator pipeline.
//!
//! Mines textually similar same-problem code pairs, augments bug-fix pairs
//! with partially-fixed intermediate versions, trains a small hashed
//! bag-of-tokens encoder with a margin contrastive loss followed by a
//! sigmoid correctness head, and reranks candidate sets by predicted
//! correctness.

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evalrank;
pub mod model;
pub mod pairing;
pub mod synthetic;
pub mod textmetrics;
pub mod training;

pub use error::{Error, Result};
