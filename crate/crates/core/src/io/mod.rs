//! Experiment runner: builds targets from a resolved config, runs every
//! repeat and writes CSV output.

mod config;
mod data;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{
    generate_toy_config, repeat_seed, EnsembleConfig, ExperimentConfig, ExperimentKind,
    ModelConfig, SamplerConfig, SamplerName,
};
pub use data::{
    generate_sim_data, generate_sim_data_with, load_counts, sim_ground_truth, synthetic_counts,
    Observations, SimSpec,
};

use crate::diagnostics::{count_mode_jumps, hamming_lag_stats, log_posterior_summary, TraceStore};
use crate::ensemble::pt_run;
use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, BinarySequence, LatentState};
use crate::targets::{
    AdditiveGaussianEmission, Emission, FhmmModel, MarginalizedDepthEmission, MarkovChainPrior,
    ToyBlockTarget,
};

/// Lags of the Hamming statistic written for FHMM experiments.
pub const HAMMING_LAGS: [usize; 3] = [1, 10, 50];

/// A target together with the state every chain starts from.
pub enum Problem {
    Toy(Arc<ToyBlockTarget>, BinarySequence),
    Fhmm(Arc<FhmmModel>, BinaryMatrix),
}

fn get<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::config(format!("model.{key} is not set")))
}

/// Builds the target and initial state of a resolved config. Toy runs
/// start at the all-ones mode, simulation runs at the generating matrix,
/// data runs with every free row off.
pub fn build_problem(config: &ExperimentConfig) -> Result<Problem> {
    let m = &config.model;
    match config.experiment {
        ExperimentKind::Toy => {
            let len = get(&m.length, "length")?;
            let target =
                ToyBlockTarget::equal_blocks(len, get(&m.n_blocks, "n_blocks")?, &get(&m.alphas, "alphas")?)?;
            Ok(Problem::Toy(Arc::new(target), BinarySequence::ones(len)))
        }
        ExperimentKind::FhmmSim => {
            let spec = SimSpec {
                n_blocks: get(&m.n_blocks, "n_blocks")?,
                block_length: get(&m.block_length, "block_length")?,
                weights: get(&m.weights, "weights")?,
                depth: get(&m.depth, "depth")?,
                sigma2: get(&m.sigma2, "sigma2")?,
            };
            if get(&m.n_rows, "n_rows")? != 3 {
                return Err(Error::config("fhmm-sim uses three latent rows"));
            }
            let (obs, truth) = generate_sim_data_with(&spec, config.seed)?;
            let prior = MarkovChainPrior::symmetric(
                3,
                get(&m.initial_one, "initial_one")?,
                get(&m.self_transition, "self_transition")?,
            )?;
            let emission =
                Emission::AdditiveGaussian(AdditiveGaussianEmission::new(spec.weights, spec.depth, spec.sigma2)?);
            let model = FhmmModel::new(prior, emission, obs.y, get(&m.fixed_rows, "fixed_rows")?)?;
            Ok(Problem::Fhmm(Arc::new(model), truth))
        }
        ExperimentKind::FhmmData => {
            let k = get(&m.n_rows, "n_rows")?;
            let prior = MarkovChainPrior::symmetric(
                k,
                get(&m.initial_one, "initial_one")?,
                get(&m.self_transition, "self_transition")?,
            )?;
            let weights = get(&m.weights, "weights")?;
            let fixed = get(&m.fixed_rows, "fixed_rows")?;
            let (mu_h, sigma_h, sigma2) = (get(&m.mu_h, "mu_h")?, get(&m.sigma_h, "sigma_h")?, get(&m.sigma2, "sigma2")?);
            let y = match &m.counts {
                Some(path) => load_counts(path)?.y,
                None => {
                    let n = get(&m.n_time, "n_time")?;
                    synthetic_counts(&prior, &fixed, &weights, n, mu_h, sigma_h, sigma2, config.seed)?.0.y
                }
            };
            let emission = Emission::MarginalizedDepth(MarginalizedDepthEmission::new(
                weights,
                mu_h,
                sigma_h * sigma_h,
                sigma2,
            )?);
            let model = FhmmModel::new(prior, emission, y, fixed)?;
            let init = model.baseline_state();
            Ok(Problem::Fhmm(Arc::new(model), init))
        }
    }
}

/// Summary of one finished repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatReport {
    pub index: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub final_log_posterior_max: f64,
    pub exchanges_accepted: usize,
    pub exchanges_attempted: usize,
    /// Toy runs only: distinct nearest-mode labels of chain 0.
    pub distinct_modes: Option<usize>,
}

/// Runs every repeat of a resolved config and writes
/// `<output_dir>/config.json` plus one `repeat_NNN` directory per repeat.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RepeatReport>> {
    let config = config.resolve()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let snapshot = out.join("config.json");
    fs::write(&snapshot, config.to_json()? + "\n").map_err(|e| Error::io(&snapshot, e))?;
    let problem = build_problem(&config)?;
    let hash = config.config_hash()?;
    (0..config.repeats)
        .into_par_iter()
        .map(|index| {
            let seed = repeat_seed(config.seed, index);
            let dir = out.join(format!("repeat_{index:03}"));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let settings = config.pt_settings(seed)?;
            let burn_in = config.ensemble.burn_in.unwrap_or(0);
            let (summary, distinct_modes) = match &problem {
                Problem::Toy(target, init) => {
                    let mut trace = pt_run(target.clone(), init.clone(), &settings)?;
                    trace.config_hash = Some(hash.clone());
                    let jumps = count_mode_jumps(&trace, target)?;
                    let mut rows = Vec::new();
                    for (it, c) in jumps.iterations.iter().zip(&jumps.cumulative) {
                        rows.push(DiagRow::count("cumulative_mode_jumps", None, *it, *c));
                    }
                    let last = jumps.iterations.last().copied().unwrap_or(0);
                    rows.push(DiagRow::count("distinct_mode_labels", None, last, jumps.distinct_labels));
                    rows.push(DiagRow::count("distinct_exact_modes", None, last, jumps.distinct_exact_modes));
                    write_run(&dir, &trace, rows)?;
                    (summarize(&trace), Some(jumps.distinct_labels))
                }
                Problem::Fhmm(model, init) => {
                    let mut trace = pt_run(model.clone(), init.clone(), &settings)?;
                    trace.config_hash = Some(hash.clone());
                    let rows = fhmm_diagnostics(&trace, burn_in);
                    write_run(&dir, &trace, rows)?;
                    (summarize(&trace), None)
                }
            };
            Ok(RepeatReport {
                index,
                seed,
                dir,
                final_log_posterior_max: summary.0,
                exchanges_accepted: summary.1,
                exchanges_attempted: summary.2,
                distinct_modes,
            })
        })
        .collect()
}

fn summarize<S: LatentState>(trace: &TraceStore<S>) -> (f64, usize, usize) {
    let max = log_posterior_summary(trace)
        .first()
        .and_then(|s| s.running_max.last().copied())
        .unwrap_or(f64::NEG_INFINITY);
    let accepted = trace.exchanges.iter().filter(|r| r.accepted).count();
    (max, accepted, trace.exchanges.len())
}

/// Lagged Hamming distances over states recorded at or after `burn_in`.
pub fn fhmm_diagnostics(trace: &TraceStore<BinaryMatrix>, burn_in: usize) -> Vec<DiagRow> {
    let mut kept = trace.clone();
    kept.states.retain(|(it, _)| *it >= burn_in);
    hamming_lag_stats(&kept, &HAMMING_LAGS)
        .into_iter()
        .flat_map(|s| {
            let lag = s.lag;
            s.iterations
                .into_iter()
                .zip(s.values)
                .map(move |(it, v)| DiagRow::float("hamming_lag", Some(lag), it, v))
        })
        .collect()
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub statistic: &'static str,
    pub lag_or_block: Option<usize>,
    pub iteration: usize,
    pub value: String,
}

impl DiagRow {
    fn count(statistic: &'static str, key: Option<usize>, iteration: usize, value: usize) -> Self {
        Self { statistic, lag_or_block: key, iteration, value: value.to_string() }
    }

    fn float(statistic: &'static str, key: Option<usize>, iteration: usize, value: f64) -> Self {
        Self { statistic, lag_or_block: key, iteration, value: fmt_float(value) }
    }
}

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `trace.csv`, `states.csv`, `exchanges.csv` and `diagnostics.csv`
/// into `dir`. The running maximum of the chain-0 log-posterior is always
/// appended to the diagnostics.
pub fn write_run<S: LatentState>(dir: &Path, trace: &TraceStore<S>, mut diagnostics: Vec<DiagRow>) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e| Error::io(path.clone(), e)
    };

    let path = dir.join("trace.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "iteration,chain,beta,log_posterior")?;
        for (it, row) in trace.iterations.iter().zip(&trace.log_posterior) {
            for (c, (lp, beta)) in row.iter().zip(&trace.betas).enumerate() {
                writeln!(w, "{it},{c},{},{}", fmt_float(*beta), fmt_float(*lp))?;
            }
        }
        w.flush()
    })();
    body.map_err(io(&path))?;

    let path = dir.join("states.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "iteration,row,bitstring")?;
        for (it, s) in &trace.states {
            for (r, bits) in s.row_strings().iter().enumerate() {
                writeln!(w, "{it},{r},{bits}")?;
            }
        }
        w.flush()
    })();
    body.map_err(io(&path))?;

    let path = dir.join("exchanges.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "iteration,pair_i,pair_j,kind,accepted,t0")?;
        for r in &trace.exchanges {
            let t0 = r.chosen_index.map(|c| c.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{t0}", r.iteration, r.pair.0, r.pair.1, r.kind, r.accepted)?;
        }
        w.flush()
    })();
    body.map_err(io(&path))?;

    if let Some(s) = log_posterior_summary(trace).first() {
        for (it, m) in trace.iterations.iter().zip(&s.running_max) {
            diagnostics.push(DiagRow::float("running_max_log_posterior", Some(0), *it, *m));
        }
    }
    let path = dir.join("diagnostics.csv");
    let mut w = create(&path)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "statistic,lag_or_block,iteration,value")?;
        for d in &diagnostics {
            let key = d.lag_or_block.map(|k| k.to_string()).unwrap_or_default();
            writeln!(w, "{},{key},{},{}", d.statistic, d.iteration, d.value)?;
        }
        w.flush()
    })();
    body.map_err(io(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.output_dir = dir.to_path_buf();
        c.repeats = 2;
        c.ensemble.n_iterations = Some(60);
        if kind == ExperimentKind::FhmmData {
            c.model.n_time = Some(30);
            c.ensemble.burn_in = Some(10);
            c.ensemble.thin = Some(1);
        }
        if kind == ExperimentKind::FhmmSim {
            c.model.n_blocks = Some(4);
            c.model.block_length = Some(5);
        }
        c
    }

    #[test]
    fn writes_all_files_deterministically() {
        for kind in [ExperimentKind::Toy, ExperimentKind::FhmmSim, ExperimentKind::FhmmData] {
            let a = tempfile::tempdir().unwrap();
            let b = tempfile::tempdir().unwrap();
            let ra = run_experiment(&small(kind, a.path())).unwrap();
            let mut cb = small(kind, b.path());
            cb.ensemble.parallel = Some(true);
            run_experiment(&cb).unwrap();
            assert_eq!(ra.len(), 2);
            for rep in ["repeat_000", "repeat_001"] {
                for f in ["trace.csv", "states.csv", "exchanges.csv", "diagnostics.csv"] {
                    let x = fs::read(a.path().join(rep).join(f)).unwrap();
                    let y = fs::read(b.path().join(rep).join(f)).unwrap();
                    assert!(x == y, "{kind} {rep}/{f} differs");
                }
            }
            let trace = fs::read_to_string(a.path().join("repeat_000/trace.csv")).unwrap();
            assert_eq!(trace.lines().count(), 1 + 61 * 2);
            let snapshot = ExperimentConfig::load(&a.path().join("config.json")).unwrap();
            assert_eq!(snapshot, small(kind, a.path()).resolve().unwrap());
        }
    }

    #[test]
    fn no_exchange_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(ExperimentKind::Toy, dir.path());
        c.ensemble.exchange = Some(crate::ensemble::ExchangeKind::None);
        run_experiment(&c).unwrap();
        let text = fs::read_to_string(dir.path().join("repeat_001/exchanges.csv")).unwrap();
        assert_eq!(text, "iteration,pair_i,pair_j,kind,accepted,t0\n");
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.5), "-2.5000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }
}
