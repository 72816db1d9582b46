//! Forward-filtering backward-sampling over a restricted set of column
//! states per time step.
//!
//! Both FHMM kernels reduce to this: the row-conditional update allows two
//! column states per step (row k off or on), the Hamming Ball update allows
//! every column within radius r of the auxiliary column.

use rand::Rng;

use crate::model::{InverseTemperature, LogDensityParts};
use crate::targets::FhmmModel;

pub(crate) struct ColumnLattice<'a> {
    model: &'a FhmmModel,
    width: usize,
    states: Vec<u64>,
    emissions: Vec<f64>,
    /// Forward messages, normalized per step in log-space.
    alpha: Vec<f64>,
}

impl<'a> ColumnLattice<'a> {
    /// `candidate(t, m)` gives the m-th allowed column state at step t.
    pub fn build(
        model: &'a FhmmModel,
        beta: InverseTemperature,
        width: usize,
        candidate: impl Fn(usize, usize) -> u64,
    ) -> Self {
        let n = model.n_time();
        let prior = model.prior();
        let b = beta.value();
        let mut states = Vec::with_capacity(n * width);
        let mut emissions = Vec::with_capacity(n * width);
        for t in 0..n {
            for m in 0..width {
                let z = candidate(t, m);
                states.push(z);
                emissions.push(model.log_lik_column(t, z));
            }
        }
        let mut alpha = vec![0.0; n * width];
        let mut scratch = vec![0.0; width];
        for m in 0..width {
            alpha[m] = prior.log_initial_column(states[m]) + b * emissions[m];
        }
        normalize_in_place(&mut alpha[..width]);
        for t in 1..n {
            let (done, rest) = alpha.split_at_mut(t * width);
            let prev = &done[(t - 1) * width..];
            let prev_states = &states[(t - 1) * width..t * width];
            let cur = &mut rest[..width];
            for m in 0..width {
                let z = states[t * width + m];
                for (s, (&a, &zp)) in scratch.iter_mut().zip(prev.iter().zip(prev_states)) {
                    *s = a + prior.log_transition_column(zp, z);
                }
                cur[m] = log_sum_exp_slice(&scratch) + b * emissions[t * width + m];
            }
            normalize_in_place(cur);
        }
        Self {
            model,
            width,
            states,
            emissions,
            alpha,
        }
    }

    fn n_time(&self) -> usize {
        self.states.len() / self.width
    }

    pub fn state(&self, t: usize, m: usize) -> u64 {
        self.states[t * self.width + m]
    }

    /// Backward pass: draws one index per step.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.n_time();
        let w = self.width;
        let prior = self.model.prior();
        let mut path = vec![0; n];
        let mut logits = vec![0.0; w];
        logits.copy_from_slice(&self.alpha[(n - 1) * w..]);
        path[n - 1] = draw_from_logits(&logits, rng);
        for t in (0..n - 1).rev() {
            let next = self.state(t + 1, path[t + 1]);
            for m in 0..w {
                logits[m] =
                    self.alpha[t * w + m] + prior.log_transition_column(self.state(t, m), next);
            }
            path[t] = draw_from_logits(&logits, rng);
        }
        path
    }

    /// Log-probability that [`Self::sample`] returns `path`.
    pub fn path_log_prob(&self, path: &[usize]) -> f64 {
        let n = self.n_time();
        let w = self.width;
        let prior = self.model.prior();
        let mut logits = vec![0.0; w];
        let mut total = self.alpha[(n - 1) * w + path[n - 1]];
        for t in (0..n - 1).rev() {
            let next = self.state(t + 1, path[t + 1]);
            for m in 0..w {
                logits[m] =
                    self.alpha[t * w + m] + prior.log_transition_column(self.state(t, m), next);
            }
            total += logits[path[t]] - log_sum_exp_slice(&logits);
        }
        total
    }

    /// Density parts of the matrix whose columns follow `path`.
    pub fn path_parts(&self, path: &[usize]) -> LogDensityParts {
        let prior = self.model.prior();
        let mut untempered = prior.log_initial_column(self.state(0, path[0]));
        let mut tempered = self.emissions[path[0]];
        for t in 1..path.len() {
            untempered +=
                prior.log_transition_column(self.state(t - 1, path[t - 1]), self.state(t, path[t]));
            tempered += self.emissions[t * self.width + path[t]];
        }
        LogDensityParts::new(untempered, tempered)
    }

    /// Finite, normalized messages at every step.
    #[cfg(test)]
    pub fn messages_are_finite(&self) -> bool {
        self.alpha
            .chunks(self.width)
            .all(|c| c.iter().all(|a| !a.is_nan() && *a != f64::INFINITY) && {
                let lse = log_sum_exp_slice(c);
                lse.abs() < 1e-9
            })
    }
}

#[inline]
fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[inline]
fn normalize_in_place(xs: &mut [f64]) {
    let lse = log_sum_exp_slice(xs);
    for x in xs {
        *x -= lse;
    }
}

fn draw_from_logits<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, l) in logits.iter().enumerate() {
        let p = (l - max).exp();
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}
