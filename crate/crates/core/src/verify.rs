//! Exact checks on enumerable instances: every kernel is applied to its
//! stationary distribution by full enumeration and the result compared
//! with the distribution itself.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{candidate_pair, crossover_log_weights_fhmm, crossover_log_weights_generic, ExchangeKind};
use crate::error::{Error, Result};
use crate::model::{
    BinaryMatrix, BinarySequence, InverseTemperature, LatentState, LogWeightVector, TargetDensity,
};
use crate::samplers::{ffbs_row_log_prob, flip_probability, HammingBallSpace};
use crate::targets::{AdditiveGaussianEmission, Emission, FhmmModel, MarkovChainPrior, ToyBlockTarget};

/// Largest number of sites accepted for enumeration.
pub const MAX_ENUMERATED_SITES: usize = 16;

/// All states of a finite space, indexed by their site bits.
pub struct StateSpace<S> {
    states: Vec<S>,
    index: HashMap<u64, usize>,
}

fn code<S: LatentState>(s: &S) -> u64 {
    (0..s.n_sites()).fold(0, |acc, i| acc | (s.site(i) as u64) << i)
}

impl<S: LatentState> StateSpace<S> {
    pub fn new(states: Vec<S>) -> Result<Self> {
        if let Some(s) = states.first() {
            if s.n_sites() > MAX_ENUMERATED_SITES {
                return Err(Error::Capacity(format!(
                    "{} sites exceed the enumeration limit {MAX_ENUMERATED_SITES}",
                    s.n_sites()
                )));
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (code(s), i)).collect();
        Ok(Self { states, index })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn index_of(&self, s: &S) -> usize {
        self.index[&code(s)]
    }

    /// Normalized tempered density over the space.
    pub fn distribution<T>(&self, target: &T, beta: InverseTemperature) -> Result<Vec<f64>>
    where
        T: TargetDensity<State = S> + ?Sized,
    {
        let logs = self
            .states
            .iter()
            .map(|s| target.log_density_parts(s).at(beta))
            .collect();
        Ok(LogWeightVector::new(logs)?.probabilities())
    }
}

pub fn toy_space(len: usize) -> Result<StateSpace<BinarySequence>> {
    if len > MAX_ENUMERATED_SITES {
        return Err(Error::Capacity(format!("length {len} is too long to enumerate")));
    }
    let states = (0..1u32 << len)
        .map(|c| BinarySequence::new((0..len).map(|i| (c >> i & 1) as u8).collect()).unwrap())
        .collect();
    StateSpace::new(states)
}

/// Every matrix of the model's shape with the fixed rows switched on.
pub fn fhmm_space(model: &FhmmModel) -> Result<StateSpace<BinaryMatrix>> {
    let (k, t) = (model.n_rows(), model.n_time());
    if k * t > MAX_ENUMERATED_SITES {
        return Err(Error::Capacity(format!("{k}x{t} matrices are too many to enumerate")));
    }
    let mut states = Vec::new();
    for c in 0..1u32 << (k * t) {
        let mut x = BinaryMatrix::zeros(k, t);
        for i in 0..k * t {
            x.set(i / t, i % t, c >> i & 1 == 1);
        }
        if model.check_state(&x).is_ok() {
            states.push(x);
        }
    }
    StateSpace::new(states)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |pi Q - pi|` for the exchange kernel `kind` on the product target
/// `pi_i(x_i) pi_j(x_j)` over `space x space`.
pub fn exchange_invariance_error<T>(
    target: &T,
    space: &StateSpace<T::State>,
    beta_i: InverseTemperature,
    beta_j: InverseTemperature,
    kind: ExchangeKind,
) -> Result<f64>
where
    T: TargetDensity + ?Sized,
{
    let n = space.len();
    let pi = space.distribution(target, beta_i)?;
    let pj = space.distribution(target, beta_j)?;
    let log_i: Vec<f64> = space.states().iter().map(|s| target.log_density_parts(s).at(beta_i)).collect();
    let log_j: Vec<f64> = space.states().iter().map(|s| target.log_density_parts(s).at(beta_j)).collect();
    let mut joint = vec![0.0; n * n];
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            joint[a * n + b] = pi[a] * pj[b];
        }
    }
    let states = space.states();
    let len = states[0].n_time();
    for a in 0..n {
        for b in 0..n {
            let mass = joint[a * n + b];
            let (xa, xb) = (&states[a], &states[b]);
            match kind {
                ExchangeKind::None => out[a * n + b] += mass,
                ExchangeKind::Swap => {
                    let acc = (log_i[b] + log_j[a] - log_i[a] - log_j[b]).exp().min(1.0);
                    out[b * n + a] += mass * acc;
                    out[a * n + b] += mass * (1.0 - acc);
                }
                ExchangeKind::RandomCrossover => {
                    for t in 1..=len {
                        let (zi, zj) = xa.crossover(xb, t)?;
                        let (ci, cj) = (space.index_of(&zi), space.index_of(&zj));
                        let acc = (log_i[ci] + log_j[cj] - log_i[a] - log_j[b]).exp().min(1.0);
                        let m = mass / len as f64;
                        out[ci * n + cj] += m * acc;
                        out[a * n + b] += m * (1.0 - acc);
                    }
                }
                ExchangeKind::AugmentedCrossover => {
                    for t in 1..=len {
                        for normal in [true, false] {
                            let (p, q) = xa.crossover(xb, t)?;
                            let (u, v) = if normal { (p, q) } else { (q, p) };
                            let w = target.crossover_candidates(&u, &v)?.log_weights(beta_i, beta_j)?;
                            for (c, prob) in w.probabilities().into_iter().enumerate() {
                                let (zi, zj) = candidate_pair(&u, &v, c)?;
                                out[space.index_of(&zi) * n + space.index_of(&zj)] +=
                                    mass * prob / (2 * len) as f64;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(max_abs_diff(&out, &joint))
}

/// Pushes `dist` through one single-site Gibbs update of each site in
/// `sites`, in order.
fn apply_site_updates<T>(
    target: &T,
    space: &StateSpace<T::State>,
    beta: InverseTemperature,
    sites: &[usize],
    dist: Vec<f64>,
) -> Vec<f64>
where
    T: TargetDensity + ?Sized,
{
    let mut dist = dist;
    for &site in sites {
        let mut next = vec![0.0; dist.len()];
        for (a, x) in space.states().iter().enumerate() {
            let p1 = flip_probability(target.flip_delta(x, site).at(beta));
            let mut y = x.clone();
            y.flip_site(site);
            next[space.index_of(&y)] += dist[a] * p1;
            next[a] += dist[a] * (1.0 - p1);
        }
        dist = next;
    }
    dist
}

/// `max |pi P - pi|` for one systematic single-site Gibbs sweep of the toy
/// target.
pub fn toy_gibbs_invariance_error(target: &ToyBlockTarget, beta: InverseTemperature) -> Result<f64> {
    let space = toy_space(target.len())?;
    let pi = space.distribution(target, beta)?;
    let sites: Vec<usize> = (0..target.len()).collect();
    Ok(max_abs_diff(&apply_site_updates(target, &space, beta, &sites, pi.clone()), &pi))
}

/// Which FHMM sweep kernel to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FhmmKernelCheck {
    SingleSite,
    RowFfbs,
    HammingBall { radius: usize },
}

/// `max |pi P - pi|` for one sweep of an FHMM kernel.
pub fn fhmm_kernel_invariance_error(
    model: &FhmmModel,
    beta: InverseTemperature,
    kernel: FhmmKernelCheck,
) -> Result<f64> {
    let space = fhmm_space(model)?;
    let pi = space.distribution(model, beta)?;
    let (k, t) = (model.n_rows(), model.n_time());
    let free_rows: Vec<usize> = (0..k).filter(|&r| !model.is_fixed(r)).collect();
    let out = match kernel {
        FhmmKernelCheck::SingleSite => {
            let sites: Vec<usize> = free_rows.iter().flat_map(|&r| r * t..(r + 1) * t).collect();
            apply_site_updates(model, &space, beta, &sites, pi.clone())
        }
        FhmmKernelCheck::RowFfbs => {
            let rows = toy_space(t)?;
            let mut dist = pi.clone();
            for &r in &free_rows {
                let mut next = vec![0.0; dist.len()];
                for (a, x) in space.states().iter().enumerate() {
                    for row in rows.states() {
                        let lp = ffbs_row_log_prob(x, r, row.as_slice(), model, beta)?;
                        let mut y = x.clone();
                        y.row_mut(r).copy_from_slice(row.as_slice());
                        next[space.index_of(&y)] += dist[a] * lp.exp();
                    }
                }
                dist = next;
            }
            dist
        }
        FhmmKernelCheck::HammingBall { radius } => {
            let ball = HammingBallSpace::for_model(model, radius)?;
            let m = ball.size();
            let combos = m.pow(t as u32);
            let pick = |mut idx: usize| -> Vec<u64> {
                (0..t)
                    .map(|_| {
                        let mask = ball.masks()[idx % m];
                        idx /= m;
                        mask
                    })
                    .collect()
            };
            let mut next = vec![0.0; pi.len()];
            for (a, x) in space.states().iter().enumerate() {
                let cols = x.column_masks();
                for ai in 0..combos {
                    let aux: Vec<u64> = pick(ai).iter().zip(&cols).map(|(d, c)| c ^ d).collect();
                    for oi in 0..combos {
                        let new_cols: Vec<u64> = pick(oi).iter().zip(&aux).map(|(d, c)| c ^ d).collect();
                        let lp = ball.restricted_log_prob(&aux, &new_cols, model, beta);
                        if lp > f64::NEG_INFINITY {
                            let y = BinaryMatrix::from_columns(k, &new_cols)?;
                            next[space.index_of(&y)] += pi[a] * lp.exp() / combos as f64;
                        }
                    }
                }
            }
            next
        }
    };
    Ok(max_abs_diff(&out, &pi))
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, value: Result<f64>, tol: f64) -> CheckResult {
    match value {
        Ok(v) => CheckResult {
            name: name.to_string(),
            passed: v < tol,
            detail: format!("max error {v:.3e} (tolerance {tol:.0e})"),
        },
        Err(e) => CheckResult {
            name: name.to_string(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn small_fhmm(k: usize, t: usize, fixed: Vec<usize>, seed: u64) -> Result<FhmmModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trans = (0..k)
        .map(|_| {
            let a = rng.random_range(0.6..0.95);
            let b = rng.random_range(0.6..0.95);
            [[a, 1.0 - a], [1.0 - b, b]]
        })
        .collect();
    let initial = (0..k).map(|_| rng.random_range(0.2..0.8)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let y = (0..t).map(|_| rng.random_range(-1.0..6.0)).collect();
    FhmmModel::new(
        MarkovChainPrior::new(initial, trans)?,
        Emission::AdditiveGaussian(AdditiveGaussianEmission::new(weights, 5.0, 1.0)?),
        y,
        fixed,
    )
}

/// Largest normalized log-weight difference between the FHMM recursion and
/// direct evaluation over `n_cases` random instances.
pub fn recursion_equivalence_error(n_cases: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..n_cases {
        let k = rng.random_range(1..=4);
        let t = rng.random_range(1..=12);
        let model = small_fhmm(k, t, vec![], seed.wrapping_add(case as u64))?;
        let mut random_matrix = || {
            let mut x = BinaryMatrix::zeros(k, t);
            for r in 0..k {
                for c in 0..t {
                    x.set(r, c, rng.random_bool(0.5));
                }
            }
            x
        };
        let (u, v) = (random_matrix(), random_matrix());
        let bi = InverseTemperature::new(rng.random_range(0.0..=1.0))?;
        let bj = InverseTemperature::new(rng.random_range(0.0..=1.0))?;
        let fast = crossover_log_weights_fhmm(&u, &v, &model, bi, bj)?;
        let slow = crossover_log_weights_generic(&u, &v, &model, bi, bj)?;
        worst = worst.max(max_abs_diff(fast.as_slice(), slow.as_slice()));
    }
    Ok(worst)
}

/// The self-check suite behind the `check` command.
pub fn run_checks() -> Vec<CheckResult> {
    let tol = 1e-8;
    let b1 = InverseTemperature::ONE;
    let b2 = InverseTemperature::new(0.2).expect("valid beta");
    let mut out = Vec::new();

    let toy = ToyBlockTarget::equal_blocks(6, 2, &[0.03, 0.05]).expect("valid toy");
    let toy_space = toy_space(6).expect("small space");
    for kind in [ExchangeKind::AugmentedCrossover, ExchangeKind::Swap, ExchangeKind::RandomCrossover] {
        out.push(check(
            &format!("toy T=6 B=2: {kind} preserves product target"),
            exchange_invariance_error(&toy, &toy_space, b1, b2, kind),
            tol,
        ));
    }
    out.push(check(
        "toy T=6 B=2: single-site gibbs sweep preserves target",
        toy_gibbs_invariance_error(&toy, b2),
        tol,
    ));

    match small_fhmm(2, 4, vec![], 11).and_then(|m| fhmm_space(&m).map(|s| (m, s))) {
        Ok((model, space)) => {
            for kind in [ExchangeKind::AugmentedCrossover, ExchangeKind::Swap, ExchangeKind::RandomCrossover] {
                out.push(check(
                    &format!("fhmm K=2 T=4: {kind} preserves product target"),
                    exchange_invariance_error(&model, &space, b1, b2, kind),
                    tol,
                ));
            }
            for kernel in [FhmmKernelCheck::SingleSite, FhmmKernelCheck::RowFfbs] {
                out.push(check(
                    &format!("fhmm K=2 T=4: {kernel:?} sweep preserves target"),
                    fhmm_kernel_invariance_error(&model, b2, kernel),
                    tol,
                ));
            }
        }
        Err(e) => out.push(CheckResult {
            name: "fhmm K=2 T=4 setup".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }
    for radius in [1, 2] {
        out.push(check(
            &format!("fhmm K=2 T=3: hamming ball r={radius} preserves target"),
            small_fhmm(2, 3, vec![], 5)
                .and_then(|m| fhmm_kernel_invariance_error(&m, b2, FhmmKernelCheck::HammingBall { radius })),
            tol,
        ));
    }
    out.push(check(
        "fhmm K=3 T=3 one fixed row: row ffbs preserves target",
        small_fhmm(3, 3, vec![1], 8).and_then(|m| fhmm_kernel_invariance_error(&m, b1, FhmmKernelCheck::RowFfbs)),
        tol,
    ));
    out.push(check(
        "fhmm recursion matches direct candidate weights (100 instances)",
        recursion_equivalence_error(100, 2024),
        tol,
    ));
    out
}
