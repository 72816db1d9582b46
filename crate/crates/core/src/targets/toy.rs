use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BinarySequence, LogDensityParts, TargetDensity};

/// Largest block count accepted by [`enumerate_modes`].
pub const MAX_ENUMERATED_BLOCKS: usize = 20;

/// Candidate values for the per-block peakedness parameter.
pub const ALPHA_GRID: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

/// Multimodal binary target: contiguous blocks, each with two modes at
/// all-ones and all-zeros, and density `alpha_j^min(d_ones, d_zeros)` per
/// block.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBlockTarget {
    len: usize,
    blocks: Vec<Range<usize>>,
    alphas: Vec<f64>,
    log_alphas: Vec<f64>,
    block_of: Vec<usize>,
}

impl ToyBlockTarget {
    /// Blocks given by their lengths, laid out left to right.
    pub fn new(block_lengths: &[usize], alphas: &[f64]) -> Result<Self> {
        if block_lengths.is_empty() {
            return Err(Error::arg("toy target needs at least one block"));
        }
        if block_lengths.len() != alphas.len() {
            return Err(Error::dim(format!(
                "{} blocks but {} alphas",
                block_lengths.len(),
                alphas.len()
            )));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::arg(format!("alpha {a} outside (0, 1)")));
        }
        if block_lengths.contains(&0) {
            return Err(Error::arg("toy blocks must be non-empty"));
        }
        let mut blocks = Vec::with_capacity(block_lengths.len());
        let mut block_of = Vec::new();
        let mut start = 0;
        for (j, &n) in block_lengths.iter().enumerate() {
            blocks.push(start..start + n);
            block_of.extend(std::iter::repeat_n(j, n));
            start += n;
        }
        Ok(Self {
            len: start,
            blocks,
            alphas: alphas.to_vec(),
            log_alphas: alphas.iter().map(|a| a.ln()).collect(),
            block_of,
        })
    }

    /// `n_blocks` contiguous blocks of equal length covering `len` sites.
    pub fn equal_blocks(len: usize, n_blocks: usize, alphas: &[f64]) -> Result<Self> {
        if n_blocks == 0 || !len.is_multiple_of(n_blocks) {
            return Err(Error::arg(format!(
                "length {len} is not divisible into {n_blocks} equal blocks"
            )));
        }
        Self::new(&vec![len / n_blocks; n_blocks], alphas)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Number of ones in each block.
    pub fn block_counts(&self, x: &BinarySequence) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|r| x.as_slice()[r.clone()].iter().map(|&b| b as usize).sum())
            .collect()
    }

    fn log_density_unchecked(&self, x: &BinarySequence) -> f64 {
        self.blocks
            .iter()
            .zip(&self.log_alphas)
            .map(|(r, la)| {
                let ones: usize = x.as_slice()[r.clone()].iter().map(|&b| b as usize).sum();
                let d = ones.min(r.len() - ones);
                d as f64 * la
            })
            .sum()
    }
}

/// Draws one alpha per block uniformly from [`ALPHA_GRID`].
pub fn draw_alphas<R: Rng + ?Sized>(n_blocks: usize, rng: &mut R) -> Vec<f64> {
    (0..n_blocks)
        .map(|_| ALPHA_GRID[rng.random_range(0..ALPHA_GRID.len())])
        .collect()
}

/// Unnormalized log-density of the block toy target.
pub fn toy_block_log_density(x: &BinarySequence, target: &ToyBlockTarget) -> Result<f64> {
    target.check_state(x)?;
    Ok(target.log_density_unchecked(x))
}

/// All `2^B` sequences with every block constant.
pub fn enumerate_modes(target: &ToyBlockTarget) -> Result<Vec<BinarySequence>> {
    let b = target.n_blocks();
    if b > MAX_ENUMERATED_BLOCKS {
        return Err(Error::Capacity(format!(
            "{b} blocks would give 2^{b} modes (limit 2^{MAX_ENUMERATED_BLOCKS})"
        )));
    }
    let modes = (0..1u32 << b)
        .map(|code| {
            let mut bits = vec![0u8; target.len];
            for (j, r) in target.blocks.iter().enumerate() {
                if (code >> (b - 1 - j)) & 1 == 1 {
                    bits[r.clone()].fill(1);
                }
            }
            BinarySequence::new(bits).expect("mode is a valid sequence")
        })
        .collect();
    Ok(modes)
}

impl TargetDensity for ToyBlockTarget {
    type State = BinarySequence;

    fn check_state(&self, state: &BinarySequence) -> Result<()> {
        if state.len() != self.len {
            return Err(Error::dim(format!(
                "sequence length {} but target length {}",
                state.len(),
                self.len
            )));
        }
        Ok(())
    }

    fn log_density_parts(&self, state: &BinarySequence) -> LogDensityParts {
        LogDensityParts::new(0.0, self.log_density_unchecked(state))
    }

    fn flip_delta(&self, state: &BinarySequence, site: usize) -> LogDensityParts {
        let j = self.block_of[site];
        let r = &self.blocks[j];
        let ones: usize = state.as_slice()[r.clone()].iter().map(|&b| b as usize).sum();
        let after = if state.get(site) == 1 { ones - 1 } else { ones + 1 };
        let n = r.len();
        let before_d = ones.min(n - ones) as f64;
        let after_d = after.min(n - after) as f64;
        LogDensityParts::new(0.0, (after_d - before_d) * self.log_alphas[j])
    }

    fn describe(&self) -> String {
        format!("toy block target (T={}, B={})", self.len, self.n_blocks())
    }
}
