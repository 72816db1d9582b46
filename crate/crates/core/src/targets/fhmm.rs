//! Factorial HMM posterior over a K×T binary latent matrix.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensemble::weights::fhmm_candidates;
use crate::error::{Error, Result};
use crate::model::{
    BinaryMatrix, CrossoverCandidates, InverseTemperature, LogDensityParts, TargetDensity,
};

/// Rows beyond this cannot be packed into a column mask.
pub const MAX_ROWS: usize = 64;

const PROB_TOL: f64 = 1e-12;

/// Independent two-state Markov chains, one per row of X.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainPrior {
    initial_one: Vec<f64>,
    transitions: Vec<[[f64; 2]; 2]>,
    log_initial: Vec<[f64; 2]>,
    log_transitions: Vec<[[f64; 2]; 2]>,
    homogeneous: bool,
}

impl MarkovChainPrior {
    /// `initial_one[k]` is `p(x_{k,1} = 1)`; `transitions[k][a][b]` is
    /// `p(x_{k,t} = b | x_{k,t-1} = a)`.
    pub fn new(initial_one: Vec<f64>, transitions: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let k = initial_one.len();
        if k == 0 || k > MAX_ROWS {
            return Err(Error::dim(format!("prior needs 1..={MAX_ROWS} rows, got {k}")));
        }
        if transitions.len() != k {
            return Err(Error::dim(format!(
                "{k} initial probabilities but {} transition matrices",
                transitions.len()
            )));
        }
        if let Some(p) = initial_one.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::arg(format!("initial probability {p} outside [0, 1]")));
        }
        for (row, m) in transitions.iter().enumerate() {
            for from in m {
                if from.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::arg(format!(
                        "row {row}: transition probability outside [0, 1]"
                    )));
                }
                if ((from[0] + from[1]) - 1.0).abs() > PROB_TOL {
                    return Err(Error::arg(format!(
                        "row {row}: transition row sums to {}",
                        from[0] + from[1]
                    )));
                }
            }
        }
        let log_initial = initial_one
            .iter()
            .map(|&p| [(1.0 - p).ln(), p.ln()])
            .collect::<Vec<_>>();
        let log_transitions = transitions
            .iter()
            .map(|m| [[m[0][0].ln(), m[0][1].ln()], [m[1][0].ln(), m[1][1].ln()]])
            .collect::<Vec<_>>();
        let homogeneous = initial_one.windows(2).all(|w| w[0] == w[1])
            && transitions.windows(2).all(|w| w[0] == w[1]);
        Ok(Self {
            initial_one,
            transitions,
            log_initial,
            log_transitions,
            homogeneous,
        })
    }

    /// Same chain on every row: `p(x_1 = 1) = initial_one`, staying in the
    /// current state with probability `self_transition`.
    pub fn symmetric(rows: usize, initial_one: f64, self_transition: f64) -> Result<Self> {
        let stay = self_transition;
        let m = [[stay, 1.0 - stay], [1.0 - stay, stay]];
        Self::new(vec![initial_one; rows], vec![m; rows])
    }

    pub fn n_rows(&self) -> usize {
        self.initial_one.len()
    }

    pub fn initial_one(&self) -> &[f64] {
        &self.initial_one
    }

    pub fn transitions(&self) -> &[[[f64; 2]; 2]] {
        &self.transitions
    }

    #[inline]
    pub fn log_initial(&self, row: usize, state: u8) -> f64 {
        self.log_initial[row][state as usize]
    }

    #[inline]
    pub fn log_transition(&self, row: usize, from: u8, to: u8) -> f64 {
        self.log_transitions[row][from as usize][to as usize]
    }

    /// `log p(x_1)` for a packed column.
    #[inline]
    pub fn log_initial_column(&self, col: u64) -> f64 {
        let k = self.n_rows();
        if self.homogeneous {
            let ones = col.count_ones() as f64;
            let zeros = k as f64 - ones;
            zeros * self.log_initial[0][0] + ones * self.log_initial[0][1]
        } else {
            (0..k)
                .map(|r| self.log_initial[r][((col >> r) & 1) as usize])
                .sum()
        }
    }

    /// `log p(x_t = to | x_{t-1} = from)` for packed columns, the product
    /// over rows of the per-row transitions.
    #[inline]
    pub fn log_transition_column(&self, from: u64, to: u64) -> f64 {
        let k = self.n_rows();
        if self.homogeneous {
            let all = row_mask(k);
            let n11 = (from & to).count_ones() as f64;
            let n10 = (from & !to & all).count_ones() as f64;
            let n01 = (!from & to & all).count_ones() as f64;
            let n00 = k as f64 - n11 - n10 - n01;
            let l = &self.log_transitions[0];
            n00 * l[0][0] + n01 * l[0][1] + n10 * l[1][0] + n11 * l[1][1]
        } else {
            (0..k)
                .map(|r| {
                    self.log_transitions[r][((from >> r) & 1) as usize][((to >> r) & 1) as usize]
                })
                .sum()
        }
    }
}

#[inline]
pub(crate) fn row_mask(rows: usize) -> u64 {
    if rows == 64 {
        u64::MAX
    } else {
        (1u64 << rows) - 1
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::arg("emission weights are empty"));
    }
    if let Some(x) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::arg(format!("emission weight {x} is negative")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::arg(format!("emission weights sum to {total}, expected 1")));
    }
    Ok(())
}

#[inline]
fn gaussian_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

/// `y_t ~ N(h * sum_k w_k x_{k,t}, sigma2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveGaussianEmission {
    weights: Vec<f64>,
    depth: f64,
    sigma2: f64,
}

impl AdditiveGaussianEmission {
    pub fn new(weights: Vec<f64>, depth: f64, sigma2: f64) -> Result<Self> {
        check_weights(&weights)?;
        if !(sigma2 > 0.0) || !depth.is_finite() {
            return Err(Error::arg(format!(
                "need finite depth and sigma2 > 0 (depth={depth}, sigma2={sigma2})"
            )));
        }
        Ok(Self {
            weights,
            depth,
            sigma2,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    #[inline]
    pub fn log_lik_mix(&self, y: f64, mix: f64) -> f64 {
        gaussian_log_pdf(y, self.depth * mix, self.sigma2)
    }
}

/// Additive Gaussian emission with the depth `h ~ N(mu_h, sigma2_h)`
/// integrated out: `y_t ~ N(mu_h * s, sigma2 + sigma2_h * s^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalizedDepthEmission {
    weights: Vec<f64>,
    mu_h: f64,
    sigma2_h: f64,
    sigma2: f64,
}

impl MarginalizedDepthEmission {
    pub fn new(weights: Vec<f64>, mu_h: f64, sigma2_h: f64, sigma2: f64) -> Result<Self> {
        check_weights(&weights)?;
        if !(sigma2 > 0.0) || !(sigma2_h >= 0.0) || !mu_h.is_finite() {
            return Err(Error::arg(format!(
                "need finite mu_h, sigma2_h >= 0 and sigma2 > 0 \
                 (mu_h={mu_h}, sigma2_h={sigma2_h}, sigma2={sigma2})"
            )));
        }
        Ok(Self {
            weights,
            mu_h,
            sigma2_h,
            sigma2,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mu_h(&self) -> f64 {
        self.mu_h
    }

    pub fn sigma2_h(&self) -> f64 {
        self.sigma2_h
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    #[inline]
    pub fn log_lik_mix(&self, y: f64, mix: f64) -> f64 {
        gaussian_log_pdf(y, self.mu_h * mix, self.sigma2 + self.sigma2_h * mix * mix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Emission {
    AdditiveGaussian(AdditiveGaussianEmission),
    MarginalizedDepth(MarginalizedDepthEmission),
}

impl Emission {
    pub fn weights(&self) -> &[f64] {
        match self {
            Emission::AdditiveGaussian(e) => e.weights(),
            Emission::MarginalizedDepth(e) => e.weights(),
        }
    }

    /// Log-likelihood of `y` given the mixture level `s = sum_k w_k x_k`.
    #[inline]
    pub fn log_lik_mix(&self, y: f64, mix: f64) -> f64 {
        match self {
            Emission::AdditiveGaussian(e) => e.log_lik_mix(y, mix),
            Emission::MarginalizedDepth(e) => e.log_lik_mix(y, mix),
        }
    }

    #[inline]
    pub fn mix_of_mask(&self, col: u64) -> f64 {
        let w = self.weights();
        let mut bits = col;
        let mut s = 0.0;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            s += w[k];
            bits &= bits - 1;
        }
        s
    }

    pub fn mix_of_column(&self, column: &[u8]) -> f64 {
        assert_eq!(column.len(), self.weights().len(), "column length must equal K");
        column
            .iter()
            .zip(self.weights())
            .filter(|(&x, _)| x == 1)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Gaussian log-density of `y_t` under the additive model.
pub fn additive_gaussian_log_lik(y_t: f64, x_t: &[u8], em: &AdditiveGaussianEmission) -> f64 {
    assert_eq!(x_t.len(), em.weights.len(), "column length must equal K");
    let mix: f64 = x_t
        .iter()
        .zip(&em.weights)
        .filter(|(&x, _)| x == 1)
        .map(|(_, w)| w)
        .sum();
    em.log_lik_mix(y_t, mix)
}

/// Gaussian log-density of `y_t` with the depth marginalized.
pub fn marginalized_gaussian_log_lik(
    y_t: f64,
    x_t: &[u8],
    em: &MarginalizedDepthEmission,
) -> f64 {
    assert_eq!(x_t.len(), em.weights.len(), "column length must equal K");
    let mix: f64 = x_t
        .iter()
        .zip(&em.weights)
        .filter(|(&x, _)| x == 1)
        .map(|(_, w)| w)
        .sum();
    em.log_lik_mix(y_t, mix)
}

/// `log p(X)` under independent per-row Markov chains.
pub fn fhmm_log_prior(x: &BinaryMatrix, prior: &MarkovChainPrior) -> Result<f64> {
    if x.n_rows() != prior.n_rows() {
        return Err(Error::dim(format!(
            "matrix has {} rows, prior has {}",
            x.n_rows(),
            prior.n_rows()
        )));
    }
    Ok(log_prior_unchecked(x, prior))
}

fn log_prior_unchecked(x: &BinaryMatrix, prior: &MarkovChainPrior) -> f64 {
    (0..x.n_rows())
        .map(|k| {
            let row = x.row(k);
            prior.log_initial(k, row[0])
                + row
                    .windows(2)
                    .map(|w| prior.log_transition(k, w[0], w[1]))
                    .sum::<f64>()
        })
        .sum()
}

/// FHMM posterior target: Markov prior over rows, emission over columns,
/// with optional rows pinned to constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FhmmModel {
    prior: MarkovChainPrior,
    emission: Emission,
    y: Vec<f64>,
    fixed_rows: Vec<usize>,
    fixed_mask: u64,
}

impl FhmmModel {
    pub fn new(
        prior: MarkovChainPrior,
        emission: Emission,
        y: Vec<f64>,
        fixed_rows: Vec<usize>,
    ) -> Result<Self> {
        let k = prior.n_rows();
        if emission.weights().len() != k {
            return Err(Error::dim(format!(
                "{} emission weights for {k} latent rows",
                emission.weights().len()
            )));
        }
        if y.is_empty() {
            return Err(Error::dim("observations are empty"));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::arg(format!("non-finite observation {v}")));
        }
        let mut fixed_mask = 0u64;
        for &r in &fixed_rows {
            if r >= k {
                return Err(Error::arg(format!("fixed row {r} outside 0..{k}")));
            }
            fixed_mask |= 1 << r;
        }
        let mut fixed_rows = fixed_rows;
        fixed_rows.sort_unstable();
        fixed_rows.dedup();
        Ok(Self {
            prior,
            emission,
            y,
            fixed_rows,
            fixed_mask,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.prior.n_rows()
    }

    pub fn n_time(&self) -> usize {
        self.y.len()
    }

    pub fn prior(&self) -> &MarkovChainPrior {
        &self.prior
    }

    pub fn emission(&self) -> &Emission {
        &self.emission
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    pub fn fixed_rows(&self) -> &[usize] {
        &self.fixed_rows
    }

    pub fn is_fixed(&self, row: usize) -> bool {
        (self.fixed_mask >> row) & 1 == 1
    }

    pub fn fixed_mask(&self) -> u64 {
        self.fixed_mask
    }

    /// Mask of rows the samplers may change.
    pub fn free_mask(&self) -> u64 {
        row_mask(self.n_rows()) & !self.fixed_mask
    }

    #[inline]
    pub fn log_lik_column(&self, t: usize, col: u64) -> f64 {
        self.emission
            .log_lik_mix(self.y[t], self.emission.mix_of_mask(col))
    }

    /// `sum_t log p(y_t | x_t)`.
    pub fn log_lik(&self, x: &BinaryMatrix) -> Result<f64> {
        self.check_state(x)?;
        Ok(self.log_lik_unchecked(x))
    }

    fn log_lik_unchecked(&self, x: &BinaryMatrix) -> f64 {
        (0..self.n_time())
            .map(|t| self.log_lik_column(t, x.column_bits(t)))
            .sum()
    }

    /// A state with every fixed row set to 1 and other rows 0.
    pub fn baseline_state(&self) -> BinaryMatrix {
        let mut x = BinaryMatrix::zeros(self.n_rows(), self.n_time());
        for &r in &self.fixed_rows {
            x.row_mut(r).fill(1);
        }
        x
    }
}

/// `log p(X) + beta * log p(y | X)`, unnormalized.
pub fn fhmm_log_posterior(
    x: &BinaryMatrix,
    model: &FhmmModel,
    beta: InverseTemperature,
) -> Result<f64> {
    model.check_state(x)?;
    Ok(model.log_density_parts(x).at(beta))
}

impl TargetDensity for FhmmModel {
    type State = BinaryMatrix;

    fn check_state(&self, x: &BinaryMatrix) -> Result<()> {
        if x.n_rows() != self.n_rows() || x.n_cols() != self.n_time() {
            return Err(Error::dim(format!(
                "state is {}x{}, model expects {}x{}",
                x.n_rows(),
                x.n_cols(),
                self.n_rows(),
                self.n_time()
            )));
        }
        if let Some(&r) = self.fixed_rows.iter().find(|&&r| x.row(r).contains(&0)) {
            return Err(Error::arg(format!("fixed row {r} is not constant 1")));
        }
        Ok(())
    }

    fn log_density_parts(&self, x: &BinaryMatrix) -> LogDensityParts {
        LogDensityParts::new(log_prior_unchecked(x, &self.prior), self.log_lik_unchecked(x))
    }

    fn flip_delta(&self, x: &BinaryMatrix, site: usize) -> LogDensityParts {
        let t_len = self.n_time();
        let (k, t) = (site / t_len, site % t_len);
        let old = x.get(k, t);
        let new = old ^ 1;
        let mut prior = if t == 0 {
            self.prior.log_initial(k, new) - self.prior.log_initial(k, old)
        } else {
            let prev = x.get(k, t - 1);
            self.prior.log_transition(k, prev, new) - self.prior.log_transition(k, prev, old)
        };
        if t + 1 < t_len {
            let next = x.get(k, t + 1);
            prior += self.prior.log_transition(k, new, next)
                - self.prior.log_transition(k, old, next);
        }
        let col = x.column_bits(t);
        let lik = self.log_lik_column(t, col ^ (1 << k)) - self.log_lik_column(t, col);
        LogDensityParts::new(prior, lik)
    }

    fn crossover_candidates(
        &self,
        u: &BinaryMatrix,
        v: &BinaryMatrix,
    ) -> Result<CrossoverCandidates> {
        fhmm_candidates(self, u, v)
    }

    fn describe(&self) -> String {
        format!("FHMM posterior (K={}, T={})", self.n_rows(), self.n_time())
    }
}
