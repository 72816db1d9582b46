use rand::Rng;

use crate::model::{InverseTemperature, LatentState, LogDensityParts, TargetDensity};

/// One systematic-scan sweep of single-site Gibbs updates over every site.
///
/// Each bit is redrawn from its exact tempered full conditional. Returns the
/// accumulated change in density parts.
pub fn single_site_gibbs_sweep<T, R>(
    x: &mut T::State,
    target: &T,
    beta: InverseTemperature,
    rng: &mut R,
) -> LogDensityParts
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    let n = x.n_sites();
    gibbs_sites(x, target, beta, rng, 0..n)
}

pub(crate) fn gibbs_sites<T, R>(
    x: &mut T::State,
    target: &T,
    beta: InverseTemperature,
    rng: &mut R,
    sites: impl IntoIterator<Item = usize>,
) -> LogDensityParts
where
    T: TargetDensity + ?Sized,
    R: Rng + ?Sized,
{
    let mut total = LogDensityParts::default();
    for site in sites {
        let delta = target.flip_delta(x, site);
        let u: f64 = rng.random();
        if u < flip_probability(delta.at(beta)) {
            x.flip_site(site);
            total = total + delta;
        }
    }
    total
}

/// `exp(d) / (1 + exp(d))` for a log-density change `d` caused by a flip.
#[inline]
pub fn flip_probability(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0 / (1.0 + (-delta).exp())
    } else {
        let e = delta.exp();
        e / (1.0 + e)
    }
}
