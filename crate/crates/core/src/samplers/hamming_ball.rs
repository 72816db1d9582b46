use rand::Rng;

use super::lattice::ColumnLattice;
use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, InverseTemperature, LogDensityParts, TargetDensity};
use crate::targets::FhmmModel;

/// Number of K-bit columns within Hamming distance `radius` of a fixed column.
pub fn ball_size(k: usize, radius: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for m in 0..=radius.min(k) {
        if m > 0 {
            binom = binom * (k - m + 1) / m;
        }
        total += binom;
    }
    total
}

/// Flip masks of a Hamming ball, restricted to the rows a sampler may change.
///
/// Enumerated once per (free rows, radius) and reused by every step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HammingBallSpace {
    radius: usize,
    masks: Vec<u64>,
}

impl HammingBallSpace {
    pub fn new(n_rows: usize, free_mask: u64, radius: usize) -> Result<Self> {
        if radius == 0 || radius > n_rows {
            return Err(Error::arg(format!(
                "hamming ball radius {radius} outside 1..={n_rows}"
            )));
        }
        let free: Vec<u64> = (0..n_rows)
            .filter(|r| (free_mask >> r) & 1 == 1)
            .map(|r| 1u64 << r)
            .collect();
        let mut masks = Vec::new();
        for subset in 0u64..(1u64 << free.len()) {
            if subset.count_ones() as usize <= radius {
                let mask = free
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (subset >> i) & 1 == 1)
                    .fold(0u64, |acc, (_, b)| acc | b);
                masks.push(mask);
            }
        }
        // order by distance, then mask value
        masks.sort_by_key(|m| (m.count_ones(), *m));
        Ok(Self { radius, masks })
    }

    pub fn for_model(model: &FhmmModel, radius: usize) -> Result<Self> {
        Self::new(model.n_rows(), model.free_mask(), radius)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    /// Step 1: one auxiliary column drawn uniformly from the ball around each
    /// column of `x`.
    pub fn draw_auxiliary<R: Rng + ?Sized>(&self, x: &BinaryMatrix, rng: &mut R) -> Vec<u64> {
        x.column_masks()
            .into_iter()
            .map(|c| c ^ self.masks[rng.random_range(0..self.masks.len())])
            .collect()
    }

    fn lattice<'a>(
        &self,
        aux: &[u64],
        model: &'a FhmmModel,
        beta: InverseTemperature,
    ) -> ColumnLattice<'a> {
        ColumnLattice::build(model, beta, self.masks.len(), |t, m| aux[t] ^ self.masks[m])
    }

    /// Full Hamming Ball update: auxiliary draw, then exact FF-BS restricted
    /// to the balls around the auxiliary columns. Returns the density parts
    /// of the new state.
    pub fn step<R: Rng + ?Sized>(
        &self,
        x: &mut BinaryMatrix,
        model: &FhmmModel,
        beta: InverseTemperature,
        rng: &mut R,
    ) -> Result<LogDensityParts> {
        model.check_state(x)?;
        let aux = self.draw_auxiliary(x, rng);
        let lattice = self.lattice(&aux, model, beta);
        let path = lattice.sample(rng);
        for (t, &m) in path.iter().enumerate() {
            let col = lattice.state(t, m);
            debug_assert!((col ^ aux[t]).count_ones() as usize <= self.radius);
            x.set_column_bits(t, col);
        }
        Ok(lattice.path_parts(&path))
    }

    /// Log-probability that the restricted FF-BS given auxiliary columns
    /// `aux` returns the matrix with columns `cols`; `-inf` if some column
    /// lies outside its ball.
    pub fn restricted_log_prob(
        &self,
        aux: &[u64],
        cols: &[u64],
        model: &FhmmModel,
        beta: InverseTemperature,
    ) -> f64 {
        let mut path = Vec::with_capacity(cols.len());
        for (a, c) in aux.iter().zip(cols) {
            match self.masks.iter().position(|m| a ^ m == *c) {
                Some(i) => path.push(i),
                None => return f64::NEG_INFINITY,
            }
        }
        self.lattice(aux, model, beta).path_log_prob(&path)
    }
}

/// One Hamming Ball step with radius `radius`.
pub fn hamming_ball_step<R: Rng + ?Sized>(
    x: &mut BinaryMatrix,
    radius: usize,
    model: &FhmmModel,
    beta: InverseTemperature,
    rng: &mut R,
) -> Result<LogDensityParts> {
    HammingBallSpace::for_model(model, radius)?.step(x, model, beta, rng)
}
