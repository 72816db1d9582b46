//! Concrete target densities.

pub mod fhmm;
pub mod toy;

pub use fhmm::{
    additive_gaussian_log_lik, fhmm_log_posterior, fhmm_log_prior, marginalized_gaussian_log_lik,
    AdditiveGaussianEmission, Emission, FhmmModel, MarginalizedDepthEmission, MarkovChainPrior,
};
pub use toy::{
    draw_alphas, enumerate_modes, toy_block_log_density, ToyBlockTarget, ALPHA_GRID,
    MAX_ENUMERATED_BLOCKS,
};
