//! Reference implementations written directly from the model definitions,
//! sharing no code with the library's density evaluation.

#![allow(dead_code)]

use fhmm_ensemble::model::{BinaryMatrix, BinarySequence};
use fhmm_ensemble::targets::{
    AdditiveGaussianEmission, Emission, FhmmModel, MarkovChainPrior, ToyBlockTarget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain-data FHMM parameters used to build both the library model and the
/// reference density.
#[derive(Clone, Debug)]
pub struct FhmmParams {
    pub init_one: Vec<f64>,
    /// `trans[k][a][b]` = P(x_{k,t+1} = b | x_{k,t} = a)
    pub trans: Vec<[[f64; 2]; 2]>,
    pub weights: Vec<f64>,
    pub depth: f64,
    pub sigma2: f64,
    pub y: Vec<f64>,
}

impl FhmmParams {
    pub fn random(k: usize, t: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trans = (0..k)
            .map(|_| {
                let a = rng.random_range(0.55..0.95);
                let b = rng.random_range(0.55..0.95);
                [[a, 1.0 - a], [1.0 - b, b]]
            })
            .collect();
        let init_one = (0..k).map(|_| rng.random_range(0.2..0.8)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let y = (0..t).map(|_| rng.random_range(-1.0..5.0)).collect();
        Self { init_one, trans, weights, depth: 4.0, sigma2: 1.0, y }
    }

    pub fn model(&self, fixed: Vec<usize>) -> FhmmModel {
        FhmmModel::new(
            MarkovChainPrior::new(self.init_one.clone(), self.trans.clone()).unwrap(),
            Emission::AdditiveGaussian(
                AdditiveGaussianEmission::new(self.weights.clone(), self.depth, self.sigma2).unwrap(),
            ),
            self.y.clone(),
            fixed,
        )
        .unwrap()
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn t(&self) -> usize {
        self.y.len()
    }

    /// `(log prior, log likelihood)` of `rows[k][t]`.
    pub fn log_parts(&self, rows: &[Vec<u8>]) -> (f64, f64) {
        let mut prior = 0.0;
        for (k, row) in rows.iter().enumerate() {
            let p1 = self.init_one[k];
            prior += if row[0] == 1 { p1.ln() } else { (1.0 - p1).ln() };
            for w in row.windows(2) {
                prior += self.trans[k][w[0] as usize][w[1] as usize].ln();
            }
        }
        let mut lik = 0.0;
        for (t, y) in self.y.iter().enumerate() {
            let mean: f64 = rows.iter().zip(&self.weights).map(|(r, w)| w * r[t] as f64).sum::<f64>() * self.depth;
            lik += -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln() - (y - mean).powi(2) / (2.0 * self.sigma2);
        }
        (prior, lik)
    }

    pub fn log_tempered(&self, rows: &[Vec<u8>], beta: f64) -> f64 {
        let (p, l) = self.log_parts(rows);
        p + beta * l
    }
}

pub fn rows_of(x: &BinaryMatrix) -> Vec<Vec<u8>> {
    (0..x.n_rows()).map(|k| x.row(k).to_vec()).collect()
}

pub fn matrix_of(rows: &[Vec<u8>]) -> BinaryMatrix {
    BinaryMatrix::from_rows(rows).unwrap()
}

/// All 0/1 vectors of length `n`, bit i of the index at position i.
pub fn all_bits(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n).map(|c| (0..n).map(|i| (c >> i & 1) as u8).collect()).collect()
}

/// All K x T matrices as row lists.
pub fn all_matrices(k: usize, t: usize) -> Vec<Vec<Vec<u8>>> {
    all_bits(k * t)
        .into_iter()
        .map(|bits| bits.chunks(t).map(<[u8]>::to_vec).collect())
        .collect()
}

/// Toy log-density from the block definition.
pub fn toy_log_density(x: &[u8], block_lengths: &[usize], alphas: &[f64]) -> f64 {
    let mut start = 0;
    let mut total = 0.0;
    for (len, a) in block_lengths.iter().zip(alphas) {
        let block = &x[start..start + len];
        let ones = block.iter().filter(|&&b| b == 1).count();
        let d = ones.min(len - ones);
        total += d as f64 * a.ln();
        start += len;
    }
    total
}

pub fn toy_target(block_lengths: &[usize], alphas: &[f64]) -> ToyBlockTarget {
    ToyBlockTarget::new(block_lengths, alphas).unwrap()
}

pub fn seq(bits: &[u8]) -> BinarySequence {
    BinarySequence::new(bits.to_vec()).unwrap()
}

/// Normalizes log-weights into probabilities.
pub fn softmax(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// One-point crossover on plain vectors: `(b[..t] ++ a[t..], a[..t] ++ b[t..])`.
pub fn cross(a: &[u8], b: &[u8], t: usize) -> (Vec<u8>, Vec<u8>) {
    let mut x = b[..t].to_vec();
    x.extend_from_slice(&a[t..]);
    let mut y = a[..t].to_vec();
    y.extend_from_slice(&b[t..]);
    (x, y)
}

/// Row-wise crossover of two matrices given as row lists.
pub fn cross_rows(a: &[Vec<u8>], b: &[Vec<u8>], t: usize) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    a.iter().zip(b).map(|(ra, rb)| cross(ra, rb, t)).unzip()
}
