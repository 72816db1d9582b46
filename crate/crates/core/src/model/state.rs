//! Binary latent states and the one-point crossover primitive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary latent state the ensemble can operate on.
///
/// States expose a time axis of length `n_time()` (the axis crossovers cut
/// along) and a flat list of `n_sites()` individually flippable entries.
pub trait LatentState: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn n_time(&self) -> usize;

    fn n_sites(&self) -> usize;

    fn site(&self, idx: usize) -> u8;

    fn flip_site(&mut self, idx: usize);

    /// One-point crossover at `t` (1-based). The first result takes the
    /// prefix of `other` and the suffix of `self`.
    fn crossover(&self, other: &Self, t: usize) -> Result<(Self, Self)>;

    fn hamming(&self, other: &Self) -> Result<usize>;

    /// One bitstring per row, for trace output.
    fn row_strings(&self) -> Vec<String>;
}

/// A length-T vector of {0,1}.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinarySequence {
    bits: Vec<u8>,
}

impl BinarySequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::dim("binary sequence must have length >= 1"));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::arg(format!(
                "entry {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "binary sequence must have length >= 1");
        Self { bits: vec![0; len] }
    }

    pub fn ones(len: usize) -> Self {
        assert!(len > 0, "binary sequence must have length >= 1");
        Self { bits: vec![1; len] }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::arg(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.bits[idx]
    }

    pub fn set(&mut self, idx: usize, bit: bool) {
        self.bits[idx] = bit as u8;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| (b'0' + b) as char).collect()
    }
}

impl fmt::Debug for BinarySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinarySequence({})", self.to_bitstring())
    }
}

/// Hamming distance between two equal-length sequences.
pub fn hamming_distance(a: &BinarySequence, b: &BinarySequence) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "hamming distance of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

/// One-point crossover at `t`: returns `(y[..t] ++ x[t..], x[..t] ++ y[t..])`.
///
/// Applying it again to the result at the same `t` recovers `(x, y)`.
pub fn crossover_point(
    x: &BinarySequence,
    y: &BinarySequence,
    t: usize,
) -> Result<(BinarySequence, BinarySequence)> {
    if x.len() != y.len() {
        return Err(Error::dim(format!(
            "crossover of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    check_cut(t, x.len())?;
    let mut u = y.bits[..t].to_vec();
    u.extend_from_slice(&x.bits[t..]);
    let mut v = x.bits[..t].to_vec();
    v.extend_from_slice(&y.bits[t..]);
    Ok((BinarySequence { bits: u }, BinarySequence { bits: v }))
}

fn check_cut(t: usize, len: usize) -> Result<()> {
    if t == 0 || t > len {
        return Err(Error::arg(format!(
            "crossover point {t} outside 1..={len}"
        )));
    }
    Ok(())
}

impl LatentState for BinarySequence {
    fn n_time(&self) -> usize {
        self.len()
    }

    fn n_sites(&self) -> usize {
        self.len()
    }

    fn site(&self, idx: usize) -> u8 {
        self.bits[idx]
    }

    fn flip_site(&mut self, idx: usize) {
        self.bits[idx] ^= 1;
    }

    fn crossover(&self, other: &Self, t: usize) -> Result<(Self, Self)> {
        crossover_point(self, other, t)
    }

    fn hamming(&self, other: &Self) -> Result<usize> {
        hamming_distance(self, other)
    }

    fn row_strings(&self) -> Vec<String> {
        vec![self.to_bitstring()]
    }
}

/// A K×T binary matrix stored row-major, one byte per entry.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be >= 1");
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::dim("matrix needs at least one row"));
        }
        let t = rows[0].len();
        if t == 0 {
            return Err(Error::dim("matrix needs at least one column"));
        }
        let mut data = Vec::with_capacity(k * t);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != t {
                return Err(Error::dim(format!(
                    "row {i} has length {}, expected {t}",
                    row.len()
                )));
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::arg(format!("row {i} has a non-binary entry")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: k,
            cols: t,
            data,
        })
    }

    /// Builds a matrix from per-column bit masks (bit k = row k).
    pub fn from_columns(rows: usize, columns: &[u64]) -> Result<Self> {
        if rows == 0 || rows > 64 || columns.is_empty() {
            return Err(Error::dim("column masks need 1..=64 rows and >= 1 column"));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (t, &c) in columns.iter().enumerate() {
            m.set_column_bits(t, c);
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, t: usize) -> u8 {
        self.data[k * self.cols + t]
    }

    pub fn set(&mut self, k: usize, t: usize, bit: bool) {
        self.data[k * self.cols + t] = bit as u8;
    }

    pub fn row(&self, k: usize) -> &[u8] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [u8] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn column(&self, t: usize) -> Vec<u8> {
        (0..self.rows).map(|k| self.get(k, t)).collect()
    }

    /// Column `t` packed into a mask, bit k set iff entry (k, t) is 1.
    /// Only valid for K <= 64.
    pub fn column_bits(&self, t: usize) -> u64 {
        debug_assert!(self.rows <= 64);
        (0..self.rows).fold(0u64, |acc, k| acc | ((self.get(k, t) as u64) << k))
    }

    pub fn set_column_bits(&mut self, t: usize, bits: u64) {
        for k in 0..self.rows {
            self.set(k, t, (bits >> k) & 1 == 1);
        }
    }

    pub fn column_masks(&self) -> Vec<u64> {
        (0..self.cols).map(|t| self.column_bits(t)).collect()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "matrix shapes {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryMatrix[{}]", self.row_strings().join(","))
    }
}

/// Row-wise one-point crossover: every row is cut at the same `t`, so the
/// first result is `(b[:, ..t], a[:, t..])`.
pub fn crossover_matrix(
    a: &BinaryMatrix,
    b: &BinaryMatrix,
    t: usize,
) -> Result<(BinaryMatrix, BinaryMatrix)> {
    a.check_same_shape(b)?;
    check_cut(t, a.cols)?;
    let mut first = a.clone();
    let mut second = b.clone();
    for k in 0..a.rows {
        first.row_mut(k)[..t].copy_from_slice(&b.row(k)[..t]);
        second.row_mut(k)[..t].copy_from_slice(&a.row(k)[..t]);
    }
    Ok((first, second))
}

impl LatentState for BinaryMatrix {
    fn n_time(&self) -> usize {
        self.cols
    }

    fn n_sites(&self) -> usize {
        self.data.len()
    }

    fn site(&self, idx: usize) -> u8 {
        self.data[idx]
    }

    fn flip_site(&mut self, idx: usize) {
        self.data[idx] ^= 1;
    }

    fn crossover(&self, other: &Self, t: usize) -> Result<(Self, Self)> {
        crossover_matrix(self, other, t)
    }

    fn hamming(&self, other: &Self) -> Result<usize> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(x, y)| x != y)
            .count())
    }

    fn row_strings(&self) -> Vec<String> {
        (0..self.rows)
            .map(|k| self.row(k).iter().map(|&b| (b'0' + b) as char).collect())
            .collect()
    }
}
