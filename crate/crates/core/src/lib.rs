//! Estimation of drifting detector-error-model rates from syndrome data.

pub mod code_models;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod iterative;
pub mod noise;
pub mod oracles;
pub mod relative;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
