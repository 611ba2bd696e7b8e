//! Task-flexible recommender experimentation.
//!
//! The crate is organized the way experiments flow:
//!
//! - [`corpus`] reads interaction files (base, sequential, impression and
//!   context formats) into an immutable [`corpus::Corpus`], prepares raw logs
//!   and caches built corpora.
//! - [`models`] holds the [`models::Scorer`] interface and the concrete
//!   scorers, each with a hand-written backward pass.
//! - [`losses`] and [`metrics`] are pure functions over scored lists.
//! - [`optim`] updates parameters and hosts the finite-difference gradient
//!   check.
//! - [`runners`] drive training and evaluation for the Top-k, CTR and
//!   impression task modes, including backbone re-ranking.
//! - [`harness`] repeats a run over several seeds and aggregates results.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod params;
pub mod real;
pub mod runners;

pub use error::{Error, Result};
