use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::ensemble::weights::generic_candidates;
use crate::error::{Error, Result};
use crate::model::state::LatentState;

/// Inverse temperature `beta = 1 / T`.
///
/// Values in `[0, 1]` are accepted; `0` is the fully annealed limit used in
/// tests. A [`TemperatureLadder`] additionally requires `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub const ONE: Self = Self(1.0);

    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::arg(format!("inverse temperature {beta} outside [0, 1]")));
        }
        Ok(Self(beta))
    }

    pub fn from_temperature(temperature: f64) -> Result<Self> {
        if !(temperature >= 1.0) {
            return Err(Error::arg(format!("temperature {temperature} must be >= 1")));
        }
        Self::new(1.0 / temperature)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Inverse temperatures for an ensemble: first exactly 1, strictly
/// decreasing, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    betas: Vec<InverseTemperature>,
}

impl TemperatureLadder {
    pub fn new(betas: &[f64]) -> Result<Self> {
        let Some(&first) = betas.first() else {
            return Err(Error::config("temperature ladder is empty"));
        };
        if first != 1.0 {
            return Err(Error::config(format!(
                "first inverse temperature must be 1.0, got {first}"
            )));
        }
        for w in betas.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::config(format!(
                    "inverse temperatures must strictly decrease ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::config(format!("inverse temperature {b} must be > 0")));
        }
        Ok(Self {
            betas: betas
                .iter()
                .map(|&b| InverseTemperature::new(b))
                .collect::<Result<_>>()?,
        })
    }

    pub fn from_temperatures(temps: &[f64]) -> Result<Self> {
        let betas: Vec<f64> = temps.iter().map(|t| 1.0 / t).collect();
        Self::new(&betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn get(&self, idx: usize) -> InverseTemperature {
        self.betas[idx]
    }

    pub fn betas(&self) -> &[InverseTemperature] {
        &self.betas
    }
}

/// A log-density split as `untempered + beta * tempered`.
///
/// Generic targets put everything in `tempered`; FHMM posteriors keep the
/// prior in `untempered` and the emission log-likelihood in `tempered`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogDensityParts {
    pub untempered: f64,
    pub tempered: f64,
}

impl LogDensityParts {
    pub fn new(untempered: f64, tempered: f64) -> Self {
        Self {
            untempered,
            tempered,
        }
    }

    #[inline]
    pub fn at(self, beta: InverseTemperature) -> f64 {
        self.untempered + beta.0 * self.tempered
    }
}

impl Add for LogDensityParts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.untempered + rhs.untempered, self.tempered + rhs.tempered)
    }
}

impl Sub for LogDensityParts {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.untempered - rhs.untempered, self.tempered - rhs.tempered)
    }
}

/// Density parts of every crossover candidate built from an auxiliary pair
/// `(u, v)`.
///
/// Index `c < T` is the normal crossover at `t = c + 1`, whose first state is
/// `v[..t] ++ u[t..]` and second state `u[..t] ++ v[t..]`. The flipped
/// candidate at the same `t` is the same pair with the roles exchanged, so
/// only the `T` normal pairs are stored. All entries may be offset by one
/// arbitrary constant shared across both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverCandidates {
    pub first: Vec<LogDensityParts>,
    pub second: Vec<LogDensityParts>,
}

impl CrossoverCandidates {
    pub fn n_time(&self) -> usize {
        self.first.len()
    }

    /// Log-weights `log pi_i(z_i) + log pi_j(z_j)` for all `2T` candidates.
    pub fn log_weights(
        &self,
        beta_i: InverseTemperature,
        beta_j: InverseTemperature,
    ) -> Result<crate::model::LogWeightVector> {
        let normal = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| a.at(beta_i) + b.at(beta_j));
        let flipped = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| b.at(beta_i) + a.at(beta_j));
        crate::model::LogWeightVector::new(normal.chain(flipped).collect())
    }

    /// Parts of the states that candidate `c` hands to chain i and chain j.
    pub fn parts_of(&self, c: usize) -> (LogDensityParts, LogDensityParts) {
        let t = self.n_time();
        if c < t {
            (self.first[c], self.second[c])
        } else {
            (self.second[c - t], self.first[c - t])
        }
    }
}

/// An unnormalized log-density over binary latent states.
///
/// Implementations are immutable and shared read-only between chain workers.
pub trait TargetDensity: Send + Sync {
    type State: LatentState;

    /// Checks that `state` is dimensioned for this target.
    fn check_state(&self, state: &Self::State) -> Result<()>;

    fn log_density_parts(&self, state: &Self::State) -> LogDensityParts;

    fn log_density(&self, state: &Self::State) -> f64 {
        self.log_density_parts(state).at(InverseTemperature::ONE)
    }

    /// Change in density parts caused by flipping one site.
    fn flip_delta(&self, state: &Self::State, site: usize) -> LogDensityParts {
        let before = self.log_density_parts(state);
        let mut flipped = state.clone();
        flipped.flip_site(site);
        self.log_density_parts(&flipped) - before
    }

    /// Density parts of all crossover candidates of `(u, v)`. The default
    /// evaluates each candidate directly.
    fn crossover_candidates(
        &self,
        u: &Self::State,
        v: &Self::State,
    ) -> Result<CrossoverCandidates> {
        generic_candidates(self, u, v)
    }

    fn describe(&self) -> String;
}

/// Tempered log-density `log pi_beta(state)`.
pub fn tempered_log_density<T: TargetDensity + ?Sized>(
    target: &T,
    beta: InverseTemperature,
    state: &T::State,
) -> Result<f64> {
    target.check_state(state)?;
    Ok(target.log_density_parts(state).at(beta))
}
