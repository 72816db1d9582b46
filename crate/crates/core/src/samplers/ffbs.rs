use rand::Rng;

use super::lattice::ColumnLattice;
use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, InverseTemperature, LogDensityParts, TargetDensity};
use crate::targets::FhmmModel;

fn check_row(x: &BinaryMatrix, row: usize, model: &FhmmModel) -> Result<()> {
    model.check_state(x)?;
    if row >= model.n_rows() {
        return Err(Error::arg(format!(
            "row {row} outside 0..{}",
            model.n_rows()
        )));
    }
    if model.is_fixed(row) {
        return Err(Error::arg(format!("row {row} is fixed")));
    }
    Ok(())
}

fn row_lattice<'a>(
    x: &BinaryMatrix,
    row: usize,
    model: &'a FhmmModel,
    beta: InverseTemperature,
) -> ColumnLattice<'a> {
    let bit = 1u64 << row;
    let rest: Vec<u64> = x.column_masks().into_iter().map(|c| c & !bit).collect();
    ColumnLattice::build(model, beta, 2, |t, s| rest[t] | if s == 1 { bit } else { 0 })
}

/// Replaces row `row` of `x` with an exact draw from its tempered conditional
/// `p(x_row | X_-row, y)`, leaving other rows untouched.
///
/// Returns the density parts of the updated matrix.
pub fn ffbs_row_conditional<R: Rng + ?Sized>(
    x: &mut BinaryMatrix,
    row: usize,
    model: &FhmmModel,
    beta: InverseTemperature,
    rng: &mut R,
) -> Result<LogDensityParts> {
    check_row(x, row, model)?;
    let lattice = row_lattice(x, row, model, beta);
    let path = lattice.sample(rng);
    for (t, &s) in path.iter().enumerate() {
        x.set(row, t, s == 1);
    }
    Ok(lattice.path_parts(&path))
}

/// Log-probability that [`ffbs_row_conditional`] replaces row `row` of `x`
/// by `new_row`.
pub fn ffbs_row_log_prob(
    x: &BinaryMatrix,
    row: usize,
    new_row: &[u8],
    model: &FhmmModel,
    beta: InverseTemperature,
) -> Result<f64> {
    check_row(x, row, model)?;
    if new_row.len() != model.n_time() {
        return Err(Error::dim("replacement row has the wrong length"));
    }
    let path: Vec<usize> = new_row.iter().map(|&b| b as usize).collect();
    Ok(row_lattice(x, row, model, beta).path_log_prob(&path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{AdditiveGaussianEmission, Emission, MarkovChainPrior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(k: usize, y: Vec<f64>, sigma2: f64, fixed: Vec<usize>) -> FhmmModel {
        let w = vec![1.0 / k as f64; k];
        FhmmModel::new(
            MarkovChainPrior::symmetric(k, 0.5, 0.9).unwrap(),
            Emission::AdditiveGaussian(AdditiveGaussianEmission::new(w, 10.0, sigma2).unwrap()),
            y,
            fixed,
        )
        .unwrap()
    }

    #[test]
    fn rejects_fixed_and_out_of_range_rows() {
        let m = model(2, vec![1.0, 2.0], 1.0, vec![1]);
        let mut x = m.baseline_state();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ffbs_row_conditional(&mut x, 1, &m, InverseTemperature::ONE, &mut rng).is_err());
        assert!(ffbs_row_conditional(&mut x, 2, &m, InverseTemperature::ONE, &mut rng).is_err());
        assert!(ffbs_row_conditional(&mut x, 0, &m, InverseTemperature::ONE, &mut rng).is_ok());
    }

    #[test]
    fn sharp_likelihood_recovers_generating_row() {
        let truth = [1u8, 1, 0, 0, 1, 0, 1, 1, 1, 0];
        let y: Vec<f64> = truth.iter().map(|&b| 10.0 * b as f64).collect();
        let m = model(1, y, 1e-3, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut x = BinaryMatrix::zeros(1, truth.len());
        for _ in 0..50 {
            ffbs_row_conditional(&mut x, 0, &m, InverseTemperature::ONE, &mut rng).unwrap();
            assert_eq!(x.row(0), &truth);
        }
    }

    #[test]
    fn zero_temperature_follows_prior_transitions() {
        let m = model(1, vec![3.0; 40], 1.0, vec![]);
        let zero = InverseTemperature::new(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut x = BinaryMatrix::zeros(1, 40);
        let (mut stay, mut total) = (0usize, 0usize);
        for _ in 0..2000 {
            ffbs_row_conditional(&mut x, 0, &m, zero, &mut rng).unwrap();
            for w in x.row(0).windows(2) {
                stay += (w[0] == w[1]) as usize;
                total += 1;
            }
        }
        let freq = stay as f64 / total as f64;
        // transitions within a path are correlated only through the chain
        let se = (0.9 * 0.1 / total as f64).sqrt();
        assert!((freq - 0.9).abs() < 4.0 * se, "{freq}");
    }

    #[test]
    fn path_probabilities_sum_to_one_and_returned_parts_are_fresh() {
        let m = model(2, vec![4.9, 0.2, 10.3, 5.5], 2.0, vec![]);
        let x = BinaryMatrix::from_rows(&[vec![1, 0, 1, 0], vec![0, 0, 1, 1]]).unwrap();
        let beta = InverseTemperature::new(0.3).unwrap();
        let total: f64 = (0..16u8)
            .map(|code| {
                let row: Vec<u8> = (0..4).map(|t| (code >> t) & 1).collect();
                ffbs_row_log_prob(&x, 1, &row, &m, beta).unwrap().exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut y = x.clone();
        let parts = ffbs_row_conditional(&mut y, 0, &m, beta, &mut rng).unwrap();
        let fresh = m.log_density_parts(&y);
        assert!((parts.untempered - fresh.untempered).abs() < 1e-9);
        assert!((parts.tempered - fresh.tempered).abs() < 1e-9);
        assert_eq!(y.row(1), x.row(1));
    }

    #[test]
    fn messages_stay_finite_on_extreme_data() {
        let y = vec![1e4, -1e4, 0.0, 5e3];
        let m = model(3, y, 1e-2, vec![]);
        let x = BinaryMatrix::zeros(3, 4);
        let lattice = row_lattice(&x, 1, &m, InverseTemperature::ONE);
        assert!(lattice.messages_are_finite());
    }
}
