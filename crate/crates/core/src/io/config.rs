//! Experiment configuration: TOML or JSON input, defaults per experiment,
//! command-line overrides and a JSON snapshot of the resolved settings.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{ExchangeKind, PtSettings};
use crate::error::{Error, Result};
use crate::samplers::{chain_rng, SamplerKind};
use crate::targets::{draw_alphas, ALPHA_GRID};

/// Stream used to draw toy alphas from the master seed.
const ALPHA_STREAM: u64 = 0xA1FA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Toy,
    FhmmSim,
    FhmmData,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Toy => "toy",
            ExperimentKind::FhmmSim => "fhmm-sim",
            ExperimentKind::FhmmData => "fhmm-data",
        }
    }

    fn model_keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Toy => &["length", "n_blocks", "alphas"],
            ExperimentKind::FhmmSim => &[
                "n_rows",
                "n_blocks",
                "block_length",
                "weights",
                "depth",
                "sigma2",
                "self_transition",
                "initial_one",
                "fixed_rows",
            ],
            ExperimentKind::FhmmData => &[
                "n_rows",
                "n_time",
                "weights",
                "mu_h",
                "sigma_h",
                "sigma2",
                "self_transition",
                "initial_one",
                "fixed_rows",
                "counts",
            ],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Target parameters. Which keys apply depends on the experiment; unset
/// keys take the experiment's defaults on [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_time: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_transition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_one: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rows: Option<Vec<usize>>,
    /// Tab-separated counts file; synthetic counts are generated when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerName {
    SingleSiteGibbs,
    RowFfbs,
    HammingBall,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SamplerName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
}

impl SamplerConfig {
    pub fn sampler_kind(&self) -> Result<SamplerKind> {
        match (self.kind, self.radius) {
            (Some(SamplerName::SingleSiteGibbs), None) => Ok(SamplerKind::SingleSiteGibbs),
            (Some(SamplerName::RowFfbs), None) => Ok(SamplerKind::RowGibbsFfbs),
            (Some(SamplerName::HammingBall), Some(radius)) => Ok(SamplerKind::HammingBall { radius }),
            (Some(SamplerName::HammingBall), None) => {
                Err(Error::config("sampler.radius is required for hamming-ball"))
            }
            (Some(_), Some(_)) => Err(Error::config("sampler.radius only applies to hamming-ball")),
            (None, _) => Err(Error::config("sampler.kind is not set")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    /// Iterations excluded from the lagged Hamming statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_repeats() -> usize {
    1
}

fn fill<T>(slot: &mut Option<T>, value: impl FnOnce() -> T) {
    if slot.is_none() {
        *slot = Some(value());
    }
}

impl ExperimentConfig {
    /// A config with every section empty; [`Self::resolve`] fills it in.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            output_dir: default_output_dir(),
            repeats: default_repeats(),
            model: ModelConfig::default(),
            sampler: SamplerConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies an override `key=value` or `section.key=value`. The value is
    /// read as JSON when it parses, else as a string.
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{assignment}' is not key=value")))?;
        let value: Value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        let mut node = &mut doc;
        for (i, key) in keys.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::config(format!("'{path}' does not name a config key")))?;
            if i + 1 == keys.len() {
                obj.insert(key.to_string(), value);
                break;
            }
            node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
        *self = serde_json::from_value(doc)
            .map_err(|e| Error::config(format!("override '{assignment}': {e}")))?;
        Ok(())
    }

    /// Fills every unset key with the experiment's default and validates
    /// the result. Resolving a resolved config returns it unchanged.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        let m = &mut c.model;
        match c.experiment {
            ExperimentKind::Toy => {
                fill(&mut m.length, || 50);
                fill(&mut m.n_blocks, || 10);
                let n_blocks = m.n_blocks.unwrap_or_default();
                let seed = c.seed;
                fill(&mut m.alphas, || draw_alphas(n_blocks, &mut chain_rng(seed, ALPHA_STREAM)));
                fill(&mut c.sampler.kind, || SamplerName::SingleSiteGibbs);
            }
            ExperimentKind::FhmmSim => {
                fill(&mut m.n_rows, || 3);
                fill(&mut m.n_blocks, || 20);
                fill(&mut m.block_length, || 16);
                fill(&mut m.weights, || vec![0.21, 0.31, 0.48]);
                fill(&mut m.depth, || 15.0);
                fill(&mut m.sigma2, || 1.0);
                fill(&mut m.self_transition, || 0.85);
                fill(&mut m.initial_one, || 0.5);
                fill(&mut m.fixed_rows, Vec::new);
                fill(&mut c.sampler.kind, || SamplerName::RowFfbs);
            }
            ExperimentKind::FhmmData => {
                fill(&mut m.n_rows, || 6);
                fill(&mut m.weights, || vec![0.075, 0.125, 0.15, 0.175, 0.2, 0.275]);
                fill(&mut m.mu_h, || 180.0);
                fill(&mut m.sigma_h, || 30.0);
                fill(&mut m.sigma2, || 100.0);
                fill(&mut m.self_transition, || 0.995);
                fill(&mut m.initial_one, || 0.5);
                fill(&mut m.fixed_rows, || vec![0]);
                if m.counts.is_none() {
                    fill(&mut m.n_time, || 1000);
                }
                fill(&mut c.sampler.kind, || SamplerName::HammingBall);
                if c.sampler.kind == Some(SamplerName::HammingBall) {
                    fill(&mut c.sampler.radius, || 3);
                }
            }
        }
        let e = &mut c.ensemble;
        let data = c.experiment == ExperimentKind::FhmmData;
        fill(&mut e.betas, || vec![1.0, 0.2]);
        let n = e.betas.as_ref().map_or(0, Vec::len);
        fill(&mut e.n_chains, || n);
        fill(&mut e.exchange, || ExchangeKind::AugmentedCrossover);
        fill(&mut e.exchange_period, || 10);
        fill(&mut e.n_iterations, || if data { 20_000 } else { 10_000 });
        fill(&mut e.thin, || if data { 10 } else { 1 });
        fill(&mut e.burn_in, || if data { 10_000 } else { 0 });
        fill(&mut e.parallel, || false);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("repeats must be >= 1"));
        }
        let used = serde_json::to_value(&self.model)?;
        let allowed = self.experiment.model_keys();
        if let Some(key) = used.as_object().into_iter().flatten().map(|(k, _)| k).find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::config(format!(
                "model.{key} does not apply to experiment '{}'",
                self.experiment
            )));
        }
        let m = &self.model;
        match self.experiment {
            ExperimentKind::Toy => {
                let (len, b) = (m.length.unwrap_or(0), m.n_blocks.unwrap_or(0));
                if b == 0 || len % b != 0 {
                    return Err(Error::config(format!(
                        "length {len} cannot be split into {b} equal blocks"
                    )));
                }
                let alphas = m.alphas.as_deref().unwrap_or_default();
                if alphas.len() != b {
                    return Err(Error::config(format!("{} alphas for {b} blocks", alphas.len())));
                }
                if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                    return Err(Error::config(format!(
                        "alphas must lie in (0, 1); the usual grid is {ALPHA_GRID:?}"
                    )));
                }
            }
            ExperimentKind::FhmmSim | ExperimentKind::FhmmData => {
                let k = m.n_rows.unwrap_or(0);
                if m.weights.as_ref().map_or(0, Vec::len) != k {
                    return Err(Error::config(format!("model.weights must have {k} entries")));
                }
                if let Some(path) = &m.counts {
                    if !path.is_file() {
                        return Err(Error::config(format!(
                            "counts file {} does not exist",
                            path.display()
                        )));
                    }
                    if m.n_time.is_some() {
                        return Err(Error::config("model.n_time conflicts with model.counts"));
                    }
                }
            }
        }
        self.sampler.sampler_kind()?;
        let e = &self.ensemble;
        if e.n_chains != e.betas.as_ref().map(Vec::len) {
            return Err(Error::config("ensemble.n_chains must equal the number of betas"));
        }
        if e.thin == Some(0) || e.exchange_period == Some(0) {
            return Err(Error::config("ensemble.thin and ensemble.exchange_period must be >= 1"));
        }
        self.pt_settings(0)?.validate()?;
        Ok(())
    }

    /// Run settings for one repeat. Call on a resolved config.
    pub fn pt_settings(&self, seed: u64) -> Result<PtSettings> {
        let e = &self.ensemble;
        let missing = |k: &str| Error::config(format!("ensemble.{k} is not set"));
        Ok(PtSettings {
            sampler: self.sampler.sampler_kind()?,
            betas: e.betas.clone().ok_or_else(|| missing("betas"))?,
            exchange: e.exchange.ok_or_else(|| missing("exchange"))?,
            exchange_period: e.exchange_period.ok_or_else(|| missing("exchange_period"))?,
            n_iterations: e.n_iterations.ok_or_else(|| missing("n_iterations"))?,
            thin: e.thin.ok_or_else(|| missing("thin"))?,
            seed,
            parallel: e.parallel.unwrap_or(false),
        })
    }

    /// FNV-1a hash of the JSON snapshot, as 16 hex digits.
    pub fn config_hash(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        let hash = text.bytes().fold(0xcbf29ce484222325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x100000001b3)
        });
        Ok(format!("{hash:016x}"))
    }
}

/// Toy experiment with `n_blocks` equal blocks over 50 sites and alphas
/// drawn from the grid with `seed`.
pub fn generate_toy_config(n_blocks: usize, seed: u64) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::new(ExperimentKind::Toy);
    c.seed = seed;
    c.model.n_blocks = Some(n_blocks);
    c.resolve()
}

/// Seed of repeat `index`: SplitMix64 output for `seed + index`.
pub fn repeat_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(index as u64).wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
