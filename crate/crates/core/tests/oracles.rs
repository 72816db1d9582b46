//! Library densities and kernels checked against reference computations
//! written from the model definitions.

mod common;

use std::sync::Arc;

use common::*;
use fhmm_ensemble::ensemble::{
    candidate_pair, crossover_log_weights_fhmm, crossover_log_weights_generic, pt_run,
    ExchangeKind, PtSettings,
};
use fhmm_ensemble::model::{BinaryMatrix, InverseTemperature, LatentState, TargetDensity};
use fhmm_ensemble::samplers::SamplerKind;
use fhmm_ensemble::targets::{fhmm_log_prior, MarginalizedDepthEmission, MarkovChainPrior};
use fhmm_ensemble::verify::{exchange_invariance_error, fhmm_space, toy_space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn beta(b: f64) -> InverseTemperature {
    InverseTemperature::new(b).unwrap()
}

#[test]
fn markov_prior_sums_to_one() {
    for seed in 0..3 {
        let p = FhmmParams::random(2, 4, seed);
        let prior = MarkovChainPrior::new(p.init_one.clone(), p.trans.clone()).unwrap();
        let total: f64 = all_matrices(2, 4)
            .iter()
            .map(|rows| fhmm_log_prior(&matrix_of(rows), &prior).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");
    }
}

#[test]
fn marginalized_likelihood_matches_quadrature() {
    let (mu_h, sigma_h, sigma2) = (180.0_f64, 30.0_f64, 100.0_f64);
    let em = MarginalizedDepthEmission::new(vec![0.3, 0.7], mu_h, sigma_h * sigma_h, sigma2).unwrap();
    let normal = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    for (y, mix) in [(54.0, 0.3), (120.0, 0.7), (175.0, 1.0), (3.0, 0.0), (-20.0, 0.3)] {
        // Simpson's rule over +-12 sd of the depth.
        let (lo, hi, n) = (mu_h - 12.0 * sigma_h, mu_h + 12.0 * sigma_h, 20_000);
        let step = (hi - lo) / n as f64;
        let f = |h: f64| normal(y, h * mix, sigma2) * normal(h, mu_h, sigma_h * sigma_h);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            acc += f(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let expected = (acc * step / 3.0).ln();
        let got = em.log_lik_mix(y, mix);
        assert!((got - expected).abs() < 1e-8, "y {y} mix {mix}: {got} vs {expected}");
    }
}

#[test]
fn toy_density_matches_block_definition() {
    let lengths = [3, 5, 2, 6];
    let alphas = [0.01, 0.05, 0.03, 0.02];
    let target = toy_target(&lengths, &alphas);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let bits: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
        let got = target.log_density(&seq(&bits));
        let expected = toy_log_density(&bits, &lengths, &alphas);
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(target.log_density_parts(&seq(&bits)).untempered, 0.0);
    }
}

#[test]
fn fhmm_density_parts_match_reference() {
    for (seed, fixed) in [(0, vec![]), (1, vec![1]), (2, vec![0, 2])] {
        let p = FhmmParams::random(3, 3, seed);
        let model = p.model(fixed.clone());
        for rows in all_matrices(3, 3) {
            let (prior, lik) = p.log_parts(&rows);
            let parts = model.log_density_parts(&matrix_of(&rows));
            assert!((parts.untempered - prior).abs() < 1e-10);
            assert!((parts.tempered - lik).abs() < 1e-10);
            for b in [0.0, 0.37, 1.0] {
                assert!((parts.at(beta(b)) - p.log_tempered(&rows, b)).abs() < 1e-10);
            }
        }
    }
}

/// Candidate weights computed by hand from the crossover definition.
fn reference_candidate_probs(p: &FhmmParams, u: &[Vec<u8>], v: &[Vec<u8>], bi: f64, bj: f64) -> Vec<f64> {
    let t_len = p.t();
    let mut normal = Vec::new();
    let mut flipped = Vec::new();
    for t in 1..=t_len {
        let (a, b) = cross_rows(u, v, t);
        normal.push(p.log_tempered(&a, bi) + p.log_tempered(&b, bj));
        flipped.push(p.log_tempered(&b, bi) + p.log_tempered(&a, bj));
    }
    normal.extend(flipped);
    softmax(&normal)
}

#[test]
fn crossover_weights_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..40 {
        let k = rng.random_range(1..=4);
        let t = rng.random_range(1..=10);
        let p = FhmmParams::random(k, t, 100 + case);
        let model = p.model(vec![]);
        let mut draw = || -> Vec<Vec<u8>> {
            (0..k).map(|_| (0..t).map(|_| rng.random_range(0..2)).collect()).collect()
        };
        let (u, v) = (draw(), draw());
        let (bi, bj) = (1.0, 0.25);
        let expected = reference_candidate_probs(&p, &u, &v, bi, bj);
        for got in [
            crossover_log_weights_fhmm(&matrix_of(&u), &matrix_of(&v), &model, beta(bi), beta(bj)).unwrap(),
            crossover_log_weights_generic(&matrix_of(&u), &matrix_of(&v), &model, beta(bi), beta(bj)).unwrap(),
        ] {
            for (g, e) in got.probabilities().iter().zip(&expected) {
                assert!((g - e).abs() < 1e-10, "case {case}: {g} vs {e}");
            }
        }
    }
}

/// The auxiliary pair drawn from `(xi, xj)` at cut `t` with coin `flip`.
fn auxiliary<S: LatentState>(xi: &S, xj: &S, t: usize, flip: bool) -> (S, S) {
    let (a, b) = xi.crossover(xj, t).unwrap();
    if flip {
        (b, a)
    } else {
        (a, b)
    }
}

#[test]
fn anchor_candidate_reproduces_current_pair() {
    for n in 1..=6 {
        let states: Vec<_> = all_bits(n).into_iter().map(|b| seq(&b)).collect();
        for xi in &states {
            for xj in &states {
                for t in 1..=n {
                    let (u, v) = auxiliary(xi, xj, t, false);
                    assert_eq!(candidate_pair(&u, &v, t - 1).unwrap(), (xi.clone(), xj.clone()));
                    let (u, v) = auxiliary(xi, xj, t, true);
                    assert_eq!(candidate_pair(&u, &v, n + t - 1).unwrap(), (xi.clone(), xj.clone()));
                }
            }
        }
    }
}

#[test]
fn every_candidate_can_return_to_its_auxiliary_pair() {
    let n = 4;
    let states: Vec<_> = all_bits(n).into_iter().map(|b| seq(&b)).collect();
    for xi in &states {
        for xj in &states {
            for t in 1..=n {
                for flip in [false, true] {
                    let (u, v) = auxiliary(xi, xj, t, flip);
                    for c in 0..2 * n {
                        let (zi, zj) = candidate_pair(&u, &v, c).unwrap();
                        let back = (1..=n)
                            .flat_map(|s| [false, true].map(|f| (s, f)))
                            .any(|(s, f)| auxiliary(&zi, &zj, s, f) == (u.clone(), v.clone()));
                        assert!(back, "candidate {c} of {xi:?},{xj:?} cannot reach its auxiliary pair");
                    }
                }
            }
        }
    }
}

#[test]
fn candidate_index_out_of_range_is_rejected() {
    let u = seq(&[0, 1, 1]);
    assert!(candidate_pair(&u, &u, 6).is_err());
}

#[test]
fn exchange_kernels_preserve_toy_product_target() {
    let target = toy_target(&[2, 3], &[0.2, 0.4]);
    let space = toy_space(5).unwrap();
    for kind in [ExchangeKind::Swap, ExchangeKind::RandomCrossover, ExchangeKind::AugmentedCrossover] {
        let err = exchange_invariance_error(&target, &space, beta(1.0), beta(0.3), kind).unwrap();
        assert!(err < 1e-12, "{kind}: {err}");
    }
}

#[test]
fn exchange_kernels_preserve_fhmm_product_target() {
    let p = FhmmParams::random(2, 3, 4);
    let model = p.model(vec![]);
    let space = fhmm_space(&model).unwrap();
    for kind in [ExchangeKind::Swap, ExchangeKind::RandomCrossover, ExchangeKind::AugmentedCrossover] {
        let err = exchange_invariance_error(&model, &space, beta(1.0), beta(0.1), kind).unwrap();
        assert!(err < 1e-12, "{kind}: {err}");
    }
}

fn fhmm_settings(seed: u64, exchange: ExchangeKind) -> PtSettings {
    PtSettings {
        sampler: SamplerKind::RowGibbsFfbs,
        betas: vec![1.0, 0.5, 0.2],
        exchange,
        exchange_period: 2,
        n_iterations: 60,
        thin: 3,
        seed,
        parallel: false,
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let p = FhmmParams::random(3, 12, 7);
    let model = Arc::new(p.model(vec![]));
    let init = BinaryMatrix::zeros(3, 12);
    for kind in [ExchangeKind::Swap, ExchangeKind::RandomCrossover, ExchangeKind::AugmentedCrossover] {
        let a = pt_run(model.clone(), init.clone(), &fhmm_settings(5, kind)).unwrap();
        let b = pt_run(model.clone(), init.clone(), &fhmm_settings(5, kind)).unwrap();
        let c = pt_run(model.clone(), init.clone(), &fhmm_settings(6, kind)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.log_posterior, b.log_posterior);
        assert_eq!(a.exchanges, b.exchanges);
        assert_ne!(a.states, c.states);
    }
}

#[test]
fn recorded_log_posteriors_match_reference() {
    let p = FhmmParams::random(2, 8, 3);
    let model = Arc::new(p.model(vec![]));
    let trace = pt_run(model, BinaryMatrix::zeros(2, 8), &fhmm_settings(1, ExchangeKind::AugmentedCrossover)).unwrap();
    let series = trace.chain_series(0);
    for (it, x) in &trace.states {
        let pos = trace.iterations.iter().position(|i| i == it).unwrap();
        assert!((series[pos] - p.log_tempered(&rows_of(x), 1.0)).abs() < 1e-9);
    }
}
