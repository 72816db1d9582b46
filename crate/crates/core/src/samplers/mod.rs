//! Within-chain MCMC kernels.

mod ffbs;
mod gibbs;
mod hamming_ball;
mod lattice;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ffbs::{ffbs_row_conditional, ffbs_row_log_prob};
pub use gibbs::{flip_probability, single_site_gibbs_sweep};
pub use hamming_ball::{ball_size, hamming_ball_step, HammingBallSpace};

use crate::error::{Error, Result};
use crate::model::{InverseTemperature, LogDensityParts, TargetDensity};
use crate::targets::{FhmmModel, ToyBlockTarget};

/// Per-chain random stream.
pub type ChainRng = ChaCha8Rng;

/// Builds stream `stream` of the generator keyed by `seed`. Streams of one
/// seed are independent of each other.
pub fn chain_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    SingleSiteGibbs,
    RowGibbsFfbs,
    HammingBall { radius: usize },
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::SingleSiteGibbs => write!(f, "single-site gibbs"),
            SamplerKind::RowGibbsFfbs => write!(f, "row ffbs gibbs"),
            SamplerKind::HammingBall { radius } => write!(f, "hamming ball (r={radius})"),
        }
    }
}

/// A [`SamplerKind`] with any per-kind tables precomputed.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    SingleSite,
    RowFfbs,
    HammingBall(HammingBallSpace),
}

/// Targets that know how to run within-chain sweeps.
pub trait SweepTarget: TargetDensity {
    fn prepare_kernel(&self, kind: SamplerKind) -> Result<Kernel> {
        match kind {
            SamplerKind::SingleSiteGibbs => Ok(Kernel::SingleSite),
            other => Err(Error::IncompatibleSampler {
                sampler: other.to_string(),
                target: self.describe(),
            }),
        }
    }

    /// Applies one sweep in place and returns the new density parts.
    fn sweep(
        &self,
        kernel: &Kernel,
        state: &mut Self::State,
        cached: LogDensityParts,
        beta: InverseTemperature,
        rng: &mut ChainRng,
    ) -> Result<LogDensityParts> {
        match kernel {
            Kernel::SingleSite => {
                Ok(cached + single_site_gibbs_sweep(state, self, beta, rng))
            }
            _ => Err(Error::IncompatibleSampler {
                sampler: format!("{kernel:?}"),
                target: self.describe(),
            }),
        }
    }
}

impl SweepTarget for ToyBlockTarget {}

impl SweepTarget for FhmmModel {
    fn prepare_kernel(&self, kind: SamplerKind) -> Result<Kernel> {
        Ok(match kind {
            SamplerKind::SingleSiteGibbs => Kernel::SingleSite,
            SamplerKind::RowGibbsFfbs => Kernel::RowFfbs,
            SamplerKind::HammingBall { radius } => {
                Kernel::HammingBall(HammingBallSpace::for_model(self, radius)?)
            }
        })
    }

    fn sweep(
        &self,
        kernel: &Kernel,
        state: &mut Self::State,
        cached: LogDensityParts,
        beta: InverseTemperature,
        rng: &mut ChainRng,
    ) -> Result<LogDensityParts> {
        match kernel {
            Kernel::SingleSite => {
                let t = self.n_time();
                let free = (0..state.n_rows())
                    .filter(|&k| !self.is_fixed(k))
                    .flat_map(|k| k * t..(k + 1) * t);
                Ok(cached + gibbs::gibbs_sites(state, self, beta, rng, free))
            }
            Kernel::RowFfbs => {
                let mut parts = cached;
                for k in (0..self.n_rows()).filter(|&k| !self.is_fixed(k)) {
                    parts = ffbs_row_conditional(state, k, self, beta, rng)?;
                }
                Ok(parts)
            }
            Kernel::HammingBall(space) => space.step(state, self, beta, rng),
        }
    }
}

/// One chain's state with its cached density parts and its own RNG stream.
#[derive(Debug, Clone)]
pub struct ChainState<S> {
    pub state: S,
    pub cached: LogDensityParts,
    pub stream: u64,
    pub rng: ChainRng,
}

impl<S: crate::model::LatentState> ChainState<S> {
    pub fn new<T>(target: &T, state: S, seed: u64, stream: u64) -> Result<Self>
    where
        T: TargetDensity<State = S> + ?Sized,
    {
        target.check_state(&state)?;
        let cached = target.log_density_parts(&state);
        Ok(Self {
            state,
            cached,
            stream,
            rng: chain_rng(seed, stream),
        })
    }

    pub fn tempered(&self, beta: InverseTemperature) -> f64 {
        self.cached.at(beta)
    }
}

/// One full sweep of `kernel` on `chain`, updating its cached density.
pub fn chain_sweep<T: SweepTarget + ?Sized>(
    chain: &mut ChainState<T::State>,
    kernel: &Kernel,
    target: &T,
    beta: InverseTemperature,
) -> Result<()> {
    chain.cached = target.sweep(kernel, &mut chain.state, chain.cached, beta, &mut chain.rng)?;
    Ok(())
}
