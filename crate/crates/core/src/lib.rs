//! Augmented ensemble MCMC for factorial hidden Markov models and
//! multimodal binary toy targets.
//!
//! Chains at decreasing inverse temperatures run a within-chain kernel
//! (single-site Gibbs, row-wise forward-filtering backward-sampling, or the
//! Hamming Ball sampler) and periodically exchange information through a
//! swap move, a Metropolis-Hastings one-point crossover, or the
//! auxiliary-variable crossover Gibbs move, which is always accepted.

pub mod diagnostics;
pub mod ensemble;
pub mod io;
pub mod error;
pub mod model;
pub mod samplers;
pub mod targets;
pub mod verify;

pub use error::{Error, Result};
