//! Data model for Monte Carlo output and CSV/TSV ingestion.
//!
//! A [`ChainMatrix`] holds the transformed draws `Y_t = g(X_t)` in simulation
//! order, one row per retained draw. Burn-in, if any, is discarded by the
//! caller before construction.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// An ordered `n x p` matrix of draws, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

/// A length-`p` vector of component means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVector(pub Vec<f64>);

impl MeanVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for MeanVector {
    fn from(v: Vec<f64>) -> Self {
        MeanVector(v)
    }
}

impl ChainMatrix {
    /// Builds a chain from row-major data, validating shape and finiteness.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if p == 0 {
            return Err(Error::Domain("chain dimension p must be at least 1".into()));
        }
        if data.len() != n * p {
            return Err(Error::Domain(format!(
                "expected {} values for a {n}x{p} chain, got {}",
                n * p,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / p,
                message: format!("non-finite value in column {}", pos % p),
            });
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Parse {
                    row: i,
                    message: format!("expected {p} columns, found {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.p..(t + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.p)
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(i).step_by(self.p).copied()
    }

    /// Copy of the first `rows` draws.
    pub fn prefix(&self, rows: usize) -> Result<ChainMatrix> {
        let rows = rows.min(self.n);
        Self::new(rows, self.p, self.data[..rows * self.p].to_vec())
    }

    /// Appends draws produced by a sampler. `rows` must be a whole number of
    /// `p`-length rows of finite values.
    pub fn append_rows(&mut self, rows: &[f64]) -> Result<()> {
        if rows.len() % self.p != 0 {
            return Err(Error::Domain(format!(
                "appended length {} is not a multiple of p = {}",
                rows.len(),
                self.p
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: self.n + pos / self.p,
                message: "non-finite value".into(),
            });
        }
        self.data.extend_from_slice(rows);
        self.n += rows.len() / self.p;
        Ok(())
    }

    /// Applies `Y_t -> M Y_t` to every row.
    pub fn transform(&self, m: &Matrix) -> Result<ChainMatrix> {
        if m.cols() != self.p {
            return Err(Error::Domain("transform width does not match p".into()));
        }
        let mut data = Vec::with_capacity(self.n * m.rows());
        for r in self.rows() {
            data.extend(m.mul_vec(r));
        }
        Self::new(self.n, m.rows(), data)
    }

    /// Keeps the given columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<ChainMatrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p) {
            return Err(Error::Domain(format!("column {bad} out of range for p = {}", self.p)));
        }
        let mut data = Vec::with_capacity(self.n * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Self::new(self.n, cols.len(), data)
    }
}

/// Delimiter of a chain file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainFormat {
    Csv,
    Tsv,
}

impl ChainFormat {
    fn delimiter(self) -> char {
        match self {
            ChainFormat::Csv => ',',
            ChainFormat::Tsv => '\t',
        }
    }

    /// `.tsv`/`.tab` select TSV, anything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => ChainFormat::Tsv,
            _ => ChainFormat::Csv,
        }
    }
}

/// Reads a rectangular numeric table. The first line is treated as a header
/// iff one of its fields does not parse as a number. Error row indices count
/// data rows from zero.
pub fn load_chain<R: BufRead>(source: R, format: ChainFormat) -> Result<ChainMatrix> {
    let delim = format.delimiter();
    let mut data = Vec::new();
    let mut p: Option<usize> = None;
    let mut n = 0usize;
    for (line_no, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(delim).map(str::trim).collect();
        let parsed: Vec<std::result::Result<f64, _>> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        if line_no == 0 && parsed.iter().any(|r| r.is_err()) {
            continue;
        }
        let width = *p.get_or_insert(fields.len());
        if fields.len() != width {
            return Err(Error::Parse {
                row: n,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        for (col, (field, value)) in fields.iter().zip(parsed).enumerate() {
            match value {
                Ok(v) if v.is_finite() => data.push(v),
                Ok(_) => {
                    return Err(Error::Parse {
                        row: n,
                        message: format!("value {field:?} in column {col} is not a finite double"),
                    })
                }
                Err(_) => {
                    return Err(Error::Parse {
                        row: n,
                        message: format!("cannot parse {field:?} in column {col} as a number"),
                    })
                }
            }
        }
        n += 1;
    }
    match p {
        Some(p) if n > 0 => ChainMatrix::new(n, p, data),
        _ => Err(Error::EmptyInput),
    }
}

/// Writes a chain as delimited text without a header.
pub fn write_chain<W: std::io::Write>(chain: &ChainMatrix, mut out: W, format: ChainFormat) -> Result<()> {
    let delim = format.delimiter().to_string();
    for r in chain.rows() {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(&delim))?;
    }
    Ok(())
}

/// Arithmetic mean of each column, the Monte Carlo estimate `θ_n`.
pub fn column_means(chain: &ChainMatrix) -> MeanVector {
    let mut sums = vec![0.0; chain.p()];
    for r in chain.rows() {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let n = chain.n() as f64;
    MeanVector(sums.into_iter().map(|s| s / n).collect())
}
