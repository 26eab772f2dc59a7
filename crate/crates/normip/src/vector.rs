//! Dense/sparse vectors and their on-disk formats.
//!
//! Dense vectors are plain `Vec<f64>`. On disk they are either CSV (every
//! cell is one value, read row-major) or a little-endian binary blob: an
//! 8-byte `u64` length followed by that many `f64`s.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with sorted, unique indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), got: values.len() });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("sparse indices must be strictly increasing".into()));
        }
        if let Some(&i) = indices.last() {
            if i >= dim {
                return Err(Error::InvalidParameter(format!("index {i} out of range for dim {dim}")));
            }
        }
        Ok(SparseVector { dim, indices, values })
    }

    /// Build from unsorted `(index, value)` pairs; repeated indices are summed.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut indices: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, x) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += x;
            } else {
                indices.push(i);
                values.push(x);
            }
        }
        SparseVector::new(dim, indices, values)
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, indices: vec![], values: vec![] }
    }

    pub fn from_dense(v: &[f64]) -> Self {
        let (indices, values) = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).unzip();
        SparseVector { dim: v.len(), indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, x)| x * w[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, x) in self.iter() {
            out[i] = x;
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|x| *x *= c);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn scaled(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn is_binary(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin") | Some("f64"))
}

/// Read a dense vector; `.bin`/`.f64` files are binary, everything else CSV.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    if is_binary(path) {
        decode_binary(&fs::read(path)?)
    } else {
        parse_csv_vector(&fs::read_to_string(path)?)
    }
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    if is_binary(path) {
        fs::write(path, encode_binary(v))?;
    } else {
        let mut f = fs::File::create(path)?;
        for x in v {
            // `{:?}` prints the shortest string that round-trips.
            writeln!(f, "{x:?}")?;
        }
    }
    Ok(())
}

pub fn parse_csv_vector(text: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        for cell in rec?.iter() {
            if cell.is_empty() {
                continue;
            }
            let x: f64 = cell.parse().map_err(|_| Error::Parse(format!("not a number: {cell:?}")))?;
            out.push(x);
        }
    }
    Ok(out)
}

pub fn encode_binary(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * v.len());
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < 8 {
        return Err(Error::Parse("binary vector shorter than its header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != 8 * n {
        return Err(Error::Parse(format!("binary vector header says {n} values, body has {} bytes", body.len())));
    }
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
