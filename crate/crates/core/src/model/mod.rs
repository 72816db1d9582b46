//! Foundational types: binary states, temperatures, log-weights and the
//! target density interface.

mod density;
mod state;
mod weights;

pub use density::{
    tempered_log_density, CrossoverCandidates, InverseTemperature, LogDensityParts,
    TargetDensity, TemperatureLadder,
};
pub use state::{
    crossover_matrix, crossover_point, hamming_distance, BinaryMatrix, BinarySequence,
    LatentState,
};
pub use weights::{log_add_exp, log_sum_exp, LogWeightVector};
