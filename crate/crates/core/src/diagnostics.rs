//! Post-processing of completed runs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::ensemble::ExchangeRecord;
use crate::error::{Error, Result};
use crate::model::{BinarySequence, LatentState};
use crate::targets::ToyBlockTarget;

/// Recorded output of one ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStore<S> {
    pub betas: Vec<f64>,
    pub seed: u64,
    pub config_hash: Option<String>,
    /// Iterations at which `log_posterior` rows were recorded.
    pub iterations: Vec<usize>,
    /// `log_posterior[n][c]`: tempered log-density of chain `c` at `iterations[n]`.
    pub log_posterior: Vec<Vec<f64>>,
    /// Thinned chain-0 states with their iteration numbers.
    pub states: Vec<(usize, S)>,
    pub exchanges: Vec<ExchangeRecord>,
}

impl<S: LatentState> TraceStore<S> {
    pub fn new(betas: Vec<f64>, seed: u64) -> Self {
        Self {
            betas,
            seed,
            config_hash: None,
            iterations: Vec::new(),
            log_posterior: Vec::new(),
            states: Vec::new(),
            exchanges: Vec::new(),
        }
    }

    pub fn n_chains(&self) -> usize {
        self.betas.len()
    }

    /// Panics if `iteration` does not exceed the previous one or the row
    /// length differs from the number of chains.
    pub fn push_log_posteriors(&mut self, iteration: usize, values: Vec<f64>) {
        assert!(self.iterations.last().is_none_or(|&last| iteration > last));
        assert_eq!(values.len(), self.betas.len());
        self.iterations.push(iteration);
        self.log_posterior.push(values);
    }

    /// Panics if `iteration` does not exceed the previous one or the state
    /// shape differs from earlier states.
    pub fn push_state(&mut self, iteration: usize, state: S) {
        if let Some((last, first)) = self.states.last().map(|(i, _)| *i).zip(self.states.first()) {
            assert!(iteration > last);
            assert_eq!(state.n_sites(), first.1.n_sites());
        }
        self.states.push((iteration, state));
    }

    /// Log-posterior series of one chain.
    pub fn chain_series(&self, chain: usize) -> Vec<f64> {
        self.log_posterior.iter().map(|row| row[chain]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockMode {
    /// All ones.
    Mode1,
    /// All zeros.
    Mode2,
}

/// Nearest-mode label of every block of a toy-target state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeLabel(pub Vec<BlockMode>);

impl ModeLabel {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Labels each block by its nearer mode. An exact tie keeps the block's
/// label from `previous`, or `Mode2` without one.
pub fn mode_label(
    x: &BinarySequence,
    target: &ToyBlockTarget,
    previous: Option<&ModeLabel>,
) -> Result<ModeLabel> {
    if x.len() != target.len() {
        return Err(Error::dim(format!(
            "state length {} does not match target length {}",
            x.len(),
            target.len()
        )));
    }
    if let Some(p) = previous {
        if p.len() != target.n_blocks() {
            return Err(Error::dim("previous label has the wrong block count"));
        }
    }
    let labels = target
        .blocks()
        .iter()
        .zip(target.block_counts(x))
        .enumerate()
        .map(|(j, (block, ones))| {
            let zeros = block.len() - ones;
            // distance to mode1 is the number of zeros
            match zeros.cmp(&ones) {
                std::cmp::Ordering::Less => BlockMode::Mode1,
                std::cmp::Ordering::Greater => BlockMode::Mode2,
                std::cmp::Ordering::Equal => previous.map_or(BlockMode::Mode2, |p| p.0[j]),
            }
        })
        .collect();
    Ok(ModeLabel(labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeJumpCounts {
    pub iterations: Vec<usize>,
    /// Number of recorded iterations so far whose label differs from the
    /// previous recorded label.
    pub cumulative: Vec<usize>,
    /// Distinct nearest-mode labels seen over the trace.
    pub distinct_labels: usize,
    /// Distinct exact modes hit over the trace.
    pub distinct_exact_modes: usize,
}

impl ModeJumpCounts {
    pub fn total(&self) -> usize {
        self.cumulative.last().copied().unwrap_or(0)
    }
}

fn is_exact_mode(x: &BinarySequence, target: &ToyBlockTarget) -> bool {
    target
        .blocks()
        .iter()
        .zip(target.block_counts(x))
        .all(|(b, ones)| ones == 0 || ones == b.len())
}

/// Mode jumps over the recorded chain-0 states.
pub fn count_mode_jumps(
    trace: &TraceStore<BinarySequence>,
    target: &ToyBlockTarget,
) -> Result<ModeJumpCounts> {
    let mut iterations = Vec::with_capacity(trace.states.len());
    let mut cumulative = Vec::with_capacity(trace.states.len());
    let mut labels = HashSet::new();
    let mut exact = HashSet::new();
    let mut previous: Option<ModeLabel> = None;
    let mut jumps = 0;
    for (it, x) in &trace.states {
        let label = mode_label(x, target, previous.as_ref())?;
        if previous.as_ref().is_some_and(|p| *p != label) {
            jumps += 1;
        }
        if is_exact_mode(x, target) {
            exact.insert(x.clone());
        }
        labels.insert(label.clone());
        previous = Some(label);
        iterations.push(*it);
        cumulative.push(jumps);
    }
    Ok(ModeJumpCounts {
        iterations,
        cumulative,
        distinct_labels: labels.len(),
        distinct_exact_modes: exact.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagStats {
    pub lag: usize,
    /// Iteration `n` of each pair `(n, n + lag)`.
    pub iterations: Vec<usize>,
    /// Hamming distance of each pair divided by the number of sites.
    pub values: Vec<f64>,
}

/// Normalized Hamming distances between recorded states `lag` iterations
/// apart, for every lag in `lags`. Pairs are matched on iteration numbers,
/// so with thinning only lags that are multiples of the thinning produce
/// values.
pub fn hamming_lag_stats<S: LatentState>(trace: &TraceStore<S>, lags: &[usize]) -> Vec<LagStats> {
    let its: Vec<usize> = trace.states.iter().map(|(i, _)| *i).collect();
    lags.iter()
        .map(|&lag| {
            let mut iterations = Vec::new();
            let mut values = Vec::new();
            for (a, (n, x)) in trace.states.iter().enumerate() {
                let Some(target_it) = n.checked_add(lag) else { continue };
                if let Ok(b) = its[a..].binary_search(&target_it) {
                    let y = &trace.states[a + b].1;
                    let d = x.hamming(y).expect("recorded states share one shape");
                    iterations.push(*n);
                    values.push(d as f64 / x.n_sites() as f64);
                }
            }
            LagStats { lag, iterations, values }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub chain: usize,
    pub beta: f64,
    pub series: Vec<f64>,
    pub running_max: Vec<f64>,
}

pub fn running_max(series: &[f64]) -> Vec<f64> {
    series
        .iter()
        .scan(f64::NEG_INFINITY, |m, &x| {
            *m = m.max(x);
            Some(*m)
        })
        .collect()
}

pub fn log_posterior_summary<S: LatentState>(trace: &TraceStore<S>) -> Vec<ChainSummary> {
    (0..trace.n_chains())
        .map(|c| {
            let series = trace.chain_series(c);
            let running_max = running_max(&series);
            ChainSummary {
                chain: c,
                beta: trace.betas[c],
                series,
                running_max,
            }
        })
        .collect()
}

/// Median of a non-empty sample; mean of the two middle values for even
/// sizes. `None` for an empty sample.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
