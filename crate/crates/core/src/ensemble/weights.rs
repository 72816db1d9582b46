//! Candidate weights for the augmented crossover move.

use crate::error::{Error, Result};
use crate::model::{
    BinaryMatrix, CrossoverCandidates, InverseTemperature, LatentState, LogDensityParts,
    LogWeightVector, TargetDensity,
};
use crate::targets::FhmmModel;

/// Evaluates every crossover candidate of `(u, v)` directly. Cost is `T`
/// full density evaluations.
pub fn generic_candidates<T: TargetDensity + ?Sized>(
    target: &T,
    u: &T::State,
    v: &T::State,
) -> Result<CrossoverCandidates> {
    target.check_state(u)?;
    target.check_state(v)?;
    let n = u.n_time();
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for t in 1..=n {
        let (a, b) = u.crossover(v, t)?;
        first.push(target.log_density_parts(&a));
        second.push(target.log_density_parts(&b));
    }
    Ok(CrossoverCandidates { first, second })
}

/// Recursive O(KT) candidate parts for the FHMM posterior.
///
/// Moving the cut from `t-1` to `t` changes only column `t`, so each side's
/// density is updated by the change in emission at `t` and in the two
/// transitions touching column `t`. The first cut uses the initial
/// distribution in place of the left transition; the last has no right
/// transition. Entries are relative to the density of `u`.
pub fn fhmm_candidates(
    model: &FhmmModel,
    u: &BinaryMatrix,
    v: &BinaryMatrix,
) -> Result<CrossoverCandidates> {
    model.check_state(u)?;
    model.check_state(v)?;
    let n = model.n_time();
    let uc = u.column_masks();
    let vc = v.column_masks();
    let eu: Vec<f64> = (0..n).map(|t| model.log_lik_column(t, uc[t])).collect();
    let ev: Vec<f64> = (0..n).map(|t| model.log_lik_column(t, vc[t])).collect();

    // first side walks from u to v, second side from v to u
    let first = cut_recursion(model, &uc, &vc, &eu, &ev);
    let second = cut_recursion(model, &vc, &uc, &ev, &eu);
    // second side is relative to v; rebase onto u using first[T] = v
    let offset = first[n - 1];
    let second = second.into_iter().map(|p| p + offset).collect();
    Ok(CrossoverCandidates { first, second })
}

/// Cumulative density change of `to[..t] ++ from[t..]` relative to `from`,
/// for `t = 1..=T`.
fn cut_recursion(
    model: &FhmmModel,
    from: &[u64],
    to: &[u64],
    e_from: &[f64],
    e_to: &[f64],
) -> Vec<LogDensityParts> {
    let prior = model.prior();
    let n = from.len();
    let mut acc = LogDensityParts::default();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let mut dp = if t == 0 {
            prior.log_initial_column(to[0]) - prior.log_initial_column(from[0])
        } else {
            prior.log_transition_column(to[t - 1], to[t])
                - prior.log_transition_column(to[t - 1], from[t])
        };
        if t + 1 < n {
            dp += prior.log_transition_column(to[t], from[t + 1])
                - prior.log_transition_column(from[t], from[t + 1]);
        }
        acc = acc + LogDensityParts::new(dp, e_to[t] - e_from[t]);
        out.push(acc);
    }
    out
}

/// Normalized log-weights of all `2T` candidates by direct evaluation.
pub fn crossover_log_weights_generic<T: TargetDensity + ?Sized>(
    u: &T::State,
    v: &T::State,
    target: &T,
    beta_i: InverseTemperature,
    beta_j: InverseTemperature,
) -> Result<LogWeightVector> {
    if u.n_sites() != v.n_sites() || u.n_time() != v.n_time() {
        return Err(Error::dim("auxiliary states differ in shape"));
    }
    Ok(generic_candidates(target, u, v)?
        .log_weights(beta_i, beta_j)?
        .normalized())
}

/// Normalized log-weights of all `2T` candidates via the FHMM recursion.
pub fn crossover_log_weights_fhmm(
    u: &BinaryMatrix,
    v: &BinaryMatrix,
    model: &FhmmModel,
    beta_i: InverseTemperature,
    beta_j: InverseTemperature,
) -> Result<LogWeightVector> {
    Ok(fhmm_candidates(model, u, v)?
        .log_weights(beta_i, beta_j)?
        .normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{
        AdditiveGaussianEmission, Emission, MarginalizedDepthEmission, MarkovChainPrior,
        ToyBlockTarget,
    };
    use crate::model::BinarySequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, k: usize, t: usize, fixed: &[usize]) -> BinaryMatrix {
        let mut m = BinaryMatrix::zeros(k, t);
        for r in 0..k {
            for c in 0..t {
                m.set(r, c, fixed.contains(&r) || rng.random_bool(0.5));
            }
        }
        m
    }

    fn random_model(rng: &mut ChaCha8Rng, k: usize, t: usize, marginal: bool) -> FhmmModel {
        let initial: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
        let trans = (0..k)
            .map(|_| {
                let a = rng.random_range(0.05..0.95);
                let b = rng.random_range(0.05..0.95);
                [[a, 1.0 - a], [1.0 - b, b]]
            })
            .collect();
        let prior = MarkovChainPrior::new(initial, trans).unwrap();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let emission = if marginal {
            Emission::MarginalizedDepth(MarginalizedDepthEmission::new(w, 20.0, 9.0, 1.5).unwrap())
        } else {
            Emission::AdditiveGaussian(AdditiveGaussianEmission::new(w, 15.0, 1.0).unwrap())
        };
        let y = (0..t).map(|_| rng.random_range(-2.0..17.0)).collect();
        FhmmModel::new(prior, emission, y, vec![]).unwrap()
    }

    fn max_abs_diff(a: &LogWeightVector, b: &LogWeightVector) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fast_path_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..60 {
            let k = rng.random_range(1..=4);
            let t = rng.random_range(1..=12);
            let model = random_model(&mut rng, k, t, case % 2 == 1);
            let u = random_matrix(&mut rng, k, t, &[]);
            let v = random_matrix(&mut rng, k, t, &[]);
            let bi = InverseTemperature::new(rng.random_range(0.0..=1.0)).unwrap();
            let bj = InverseTemperature::new(rng.random_range(0.0..=1.0)).unwrap();
            let fast = crossover_log_weights_fhmm(&u, &v, &model, bi, bj).unwrap();
            let slow = crossover_log_weights_generic(&u, &v, &model, bi, bj).unwrap();
            assert!(max_abs_diff(&fast, &slow) < 1e-8, "case {case}");
        }
    }

    #[test]
    fn identical_auxiliaries_give_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = random_model(&mut rng, 3, 9, false);
        let u = random_matrix(&mut rng, 3, 9, &[]);
        let beta = InverseTemperature::new(0.2).unwrap();
        let w = crossover_log_weights_fhmm(&u, &u, &model, InverseTemperature::ONE, beta).unwrap();
        let uniform = -(18.0f64).ln();
        assert!(w.as_slice().iter().all(|x| (x - uniform).abs() < 1e-12));

        let toy = ToyBlockTarget::new(&[3, 3], &[0.02, 0.04]).unwrap();
        let s = BinarySequence::parse("110001").unwrap();
        let w = crossover_log_weights_generic(&s, &s, &toy, InverseTemperature::ONE, beta).unwrap();
        let uniform = -(12.0f64).ln();
        assert!(w.as_slice().iter().all(|x| (x - uniform).abs() < 1e-12));
    }

    #[test]
    fn flat_target_gives_uniform_weights() {
        // a single block of length 1 has density 1 everywhere
        let toy = ToyBlockTarget::new(&[1, 1, 1, 1], &[0.03; 4]).unwrap();
        let u = BinarySequence::parse("1100").unwrap();
        let v = BinarySequence::parse("0101").unwrap();
        let w = crossover_log_weights_generic(
            &u,
            &v,
            &toy,
            InverseTemperature::ONE,
            InverseTemperature::new(0.2).unwrap(),
        )
        .unwrap();
        assert!(w.as_slice().iter().all(|x| (x + (8.0f64).ln()).abs() < 1e-12));
    }

    #[test]
    fn zero_temperature_weights_follow_prior_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let zero = InverseTemperature::new(0.0).unwrap();
        for _ in 0..10 {
            let model = random_model(&mut rng, 3, 7, false);
            let u = random_matrix(&mut rng, 3, 7, &[]);
            let v = random_matrix(&mut rng, 3, 7, &[]);
            let fast = crossover_log_weights_fhmm(&u, &v, &model, zero, zero).unwrap();
            let mut direct = Vec::new();
            for flipped in [false, true] {
                for t in 1..=7 {
                    let (a, b) = u.crossover(&v, t).unwrap();
                    let (zi, zj) = if flipped { (b, a) } else { (a, b) };
                    direct.push(
                        crate::targets::fhmm_log_prior(&zi, model.prior()).unwrap()
                            + crate::targets::fhmm_log_prior(&zj, model.prior()).unwrap(),
                    );
                }
            }
            let direct = LogWeightVector::new(direct).unwrap().normalized();
            assert!(max_abs_diff(&fast, &direct) < 1e-10);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = random_model(&mut rng, 2, 4, false);
        let u = random_matrix(&mut rng, 2, 4, &[]);
        let v = random_matrix(&mut rng, 2, 5, &[]);
        let b = InverseTemperature::ONE;
        assert!(crossover_log_weights_fhmm(&u, &v, &model, b, b).is_err());
    }
}
