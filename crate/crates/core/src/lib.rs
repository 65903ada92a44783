//! Offline hierarchical imitation learning on grid pick-and-place tasks.
//!
//! The crate bundles a small MLP/Adam core ([`approximator`]), the GridPnP
//! task family ([`env`]), demonstration storage ([`demo`]), the option-aware
//! distribution-correction learner ([`godice`]), reference methods
//! ([`baselines`]) and the experiment front end ([`harness`]).

pub mod approximator;
pub mod baselines;
pub mod demo;
pub mod env;
pub mod error;
pub mod godice;
pub mod harness;
pub mod metrics;
pub mod rollout;
pub mod scoring;

pub use error::{Error, Result};
