use rand::Rng;

use crate::error::{Error, Result};

/// Numerically stable `log(sum(exp(xs)))`. Returns `-inf` for an empty slice
/// or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Unnormalized or normalized log-weights over a finite set of candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightVector {
    values: Vec<f64>,
}

impl LogWeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("weight vector is empty"));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::arg(format!("log-weight {i} is NaN")));
        }
        if values.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::arg("all log-weights are -inf"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Shifts the log-weights so that their exponentials sum to one.
    pub fn normalized(&self) -> Self {
        let lse = log_sum_exp(&self.values);
        Self {
            values: self.values.iter().map(|v| v - lse).collect(),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = self.values.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|p| p / total).collect()
    }

    /// Inverse-CDF draw of an index with probability proportional to
    /// `exp(value)`. Ties resolve to the lowest index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let probs = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                last_positive = i;
            }
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the accumulated total
        last_positive
    }
}
