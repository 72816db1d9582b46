//! Observation files and synthetic data.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::BinaryMatrix;
use crate::samplers::chain_rng;
use crate::targets::MarkovChainPrior;

/// Stream used for data generation, kept apart from sampler streams.
const DATA_STREAM: u64 = 0xDA7A;

/// A track of observations with optional locus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub y: Vec<f64>,
    /// `(chromosome, position)` per observation, when read from a file.
    pub loci: Option<Vec<(String, u64)>>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Reads a tab-separated file with header `chromosome position count`.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_counts(path: &Path) -> Result<Observations> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

    let Some((header_line, header)) = lines.next() else {
        return Err(Error::NoObservations(path.to_path_buf()));
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    if columns != ["chromosome", "position", "count"] {
        return Err(parse_err(
            header_line,
            format!("expected header 'chromosome\\tposition\\tcount', found '{header}'"),
        ));
    }

    let mut y = Vec::new();
    let mut loci = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(n, format!("expected 3 fields, found {}", fields.len())));
        }
        let position: u64 = fields[1]
            .parse()
            .map_err(|_| parse_err(n, format!("invalid position '{}'", fields[1])))?;
        let count: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(n, format!("invalid count '{}'", fields[2])))?;
        if !count.is_finite() {
            return Err(parse_err(n, format!("non-finite count '{}'", fields[2])));
        }
        loci.push((fields[0].to_string(), position));
        y.push(count);
    }
    if y.is_empty() {
        return Err(Error::NoObservations(path.to_path_buf()));
    }
    Ok(Observations { y, loci: Some(loci) })
}

/// Parameters of the simulated FHMM data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n_blocks: usize,
    pub block_length: usize,
    pub weights: Vec<f64>,
    pub depth: f64,
    pub sigma2: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n_blocks: 20,
            block_length: 16,
            weights: vec![0.21, 0.31, 0.48],
            depth: 15.0,
            sigma2: 1.0,
        }
    }
}

/// Three-row latent matrix of `n_blocks` alternating column blocks,
/// `(1, 1, 0)` first and `(0, 0, 0)` second.
pub fn sim_ground_truth(n_blocks: usize, block_length: usize) -> BinaryMatrix {
    let mut x = BinaryMatrix::zeros(3, n_blocks * block_length);
    for b in (0..n_blocks).step_by(2) {
        for t in b * block_length..(b + 1) * block_length {
            x.set_column_bits(t, 0b011);
        }
    }
    x
}

/// Simulated observations `y_t ~ N(depth * sum_k w_k x_kt, sigma2)` and
/// the generating matrix.
pub fn generate_sim_data_with(spec: &SimSpec, seed: u64) -> Result<(Observations, BinaryMatrix)> {
    if spec.weights.len() != 3 {
        return Err(Error::dim("simulated data uses three latent rows"));
    }
    if spec.n_blocks == 0 || spec.block_length == 0 {
        return Err(Error::arg("simulated data needs at least one non-empty block"));
    }
    let x = sim_ground_truth(spec.n_blocks, spec.block_length);
    let noise = Normal::new(0.0, spec.sigma2.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = chain_rng(seed, DATA_STREAM);
    let y = (0..x.n_cols())
        .map(|t| {
            let mix: f64 = (0..3).map(|k| spec.weights[k] * x.get(k, t) as f64).sum();
            spec.depth * mix + noise.sample(&mut rng)
        })
        .collect();
    Ok((Observations { y, loci: None }, x))
}

pub fn generate_sim_data(seed: u64) -> Result<(Observations, BinaryMatrix)> {
    generate_sim_data_with(&SimSpec::default(), seed)
}

/// Counts drawn from the depth-marginalized model with a latent matrix
/// simulated from `prior`; rows in `fixed_rows` are all ones.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_counts(
    prior: &MarkovChainPrior,
    fixed_rows: &[usize],
    weights: &[f64],
    n_time: usize,
    mu_h: f64,
    sigma_h: f64,
    sigma2: f64,
    seed: u64,
) -> Result<(Observations, BinaryMatrix)> {
    let k = prior.n_rows();
    if weights.len() != k {
        return Err(Error::dim(format!("{} weights for {k} rows", weights.len())));
    }
    if n_time == 0 {
        return Err(Error::arg("synthetic track needs n_time >= 1"));
    }
    let mut rng = chain_rng(seed, DATA_STREAM);
    let mut x = BinaryMatrix::zeros(k, n_time);
    for r in 0..k {
        if fixed_rows.contains(&r) {
            x.row_mut(r).fill(1);
            continue;
        }
        let mut s = rng.random_bool(prior.initial_one()[r]);
        for t in 0..n_time {
            if t > 0 {
                let stay = prior.transitions()[r][s as usize][s as usize];
                if !rng.random_bool(stay) {
                    s = !s;
                }
            }
            x.set(r, t, s);
        }
    }
    let depth = Normal::new(mu_h, sigma_h).map_err(|e| Error::arg(e.to_string()))?;
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
    let h = depth.sample(&mut rng);
    let y = (0..n_time)
        .map(|t| {
            let mix: f64 = (0..k).map(|r| weights[r] * x.get(r, t) as f64).sum();
            h * mix + noise.sample(&mut rng)
        })
        .collect();
    Ok((Observations { y, loci: None }, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_counts() {
        let f = write_tmp("chromosome\tposition\tcount\nchr1\t100\t12\nchr1\t200\t15.5\nchr2\t50\t9\n");
        let obs = load_counts(f.path()).unwrap();
        assert_eq!(obs.y, vec![12.0, 15.5, 9.0]);
        assert_eq!(obs.loci.unwrap()[2], ("chr2".to_string(), 50));
    }

    #[test]
    fn empty_data_section() {
        let f = write_tmp("chromosome\tposition\tcount\n");
        let err = load_counts(f.path()).unwrap_err();
        assert!(err.to_string().ends_with("no observations"));
    }

    #[test]
    fn bad_value_cites_line() {
        let mut text = String::from("chromosome\tposition\tcount\n");
        for i in 0..5 {
            text.push_str(&format!("chr1\t{i}\t10\n"));
        }
        text.push_str("chr1\t6\tabc\n");
        let err = load_counts(write_tmp(&text).path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");

        let err = load_counts(write_tmp("chromosome\tposition\tcount\nchr1\t1\tNaN\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = load_counts(write_tmp("chrom\tpos\tcount\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn simulated_truth_pattern() {
        let (obs, x) = generate_sim_data(5).unwrap();
        assert_eq!(x.n_cols(), 320);
        assert_eq!(obs.len(), 320);
        for t in 0..320 {
            let expected = if (t / 16) % 2 == 0 { 0b011 } else { 0 };
            assert_eq!(x.column_bits(t), expected);
        }
        assert_eq!(generate_sim_data(5).unwrap().0, obs);
        assert_ne!(generate_sim_data(6).unwrap().0, obs);
    }

    #[test]
    fn synthetic_counts_respect_fixed_rows() {
        let prior = MarkovChainPrior::symmetric(3, 0.5, 0.99).unwrap();
        let (obs, x) = synthetic_counts(&prior, &[0], &[0.2, 0.3, 0.5], 200, 180.0, 30.0, 100.0, 1).unwrap();
        assert_eq!(obs.len(), 200);
        assert_eq!(x.row(0), &[1; 200][..]);
    }
}
