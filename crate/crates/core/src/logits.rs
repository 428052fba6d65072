//! Logits and probability matrices.
//!
//! A [`LogitsMatrix`] is an `N x V` row-major block of pre-softmax scores,
//! one row per token position. Rows at index `>= valid_rows` are padding and
//! are held at exactly zero, so a short sequence can share a projection pair
//! sized for the longest one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsMatrix {
    rows: usize,
    cols: usize,
    valid_rows: usize,
    data: Vec<f64>,
}

impl LogitsMatrix {
    /// Builds a matrix from row-major data, checking every invariant.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, valid_rows: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(UdsError::Shape(format!("empty logits matrix {rows}x{cols}")));
        }
        if valid_rows == 0 || valid_rows > rows {
            return Err(UdsError::Shape(format!(
                "valid_rows {valid_rows} outside [1, {rows}]"
            )));
        }
        if data.len() != rows * cols {
            return Err(UdsError::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(UdsError::NonFinite {
                row: pos / cols,
                col: pos % cols,
                value: data[pos],
            });
        }
        if let Some(pos) = data[valid_rows * cols..].iter().position(|&v| v != 0.0) {
            let pos = pos + valid_rows * cols;
            return Err(UdsError::Shape(format!(
                "padding row {} holds nonzero value {}",
                pos / cols,
                data[pos]
            )));
        }
        Ok(Self {
            rows,
            cols,
            valid_rows,
            data,
        })
    }

    /// A fully valid matrix (no padding rows).
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, data, rows)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(UdsError::Shape("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_dense(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_dense(rows, cols, vec![0.0; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn valid_rows(&self) -> usize {
        self.valid_rows
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Zero-pads to `rows` positions, keeping `valid_rows`.
    pub fn pad_to(&self, rows: usize) -> Result<Self> {
        if rows < self.rows {
            return Err(UdsError::Shape(format!(
                "cannot pad {} rows down to {rows}",
                self.rows
            )));
        }
        let mut data = self.data.clone();
        data.resize(rows * self.cols, 0.0);
        Self::new(rows, self.cols, data, self.valid_rows)
    }

    /// Keeps only the valid rows whose mask entry is `true`.
    ///
    /// Used for response-only scoring. The mask covers the valid rows; an
    /// all-false mask is rejected since the result would be empty.
    pub fn select_rows(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.valid_rows {
            return Err(UdsError::DimensionMismatch {
                expected: format!("mask of length {}", self.valid_rows),
                actual: format!("length {}", mask.len()),
            });
        }
        let data: Vec<f64> = mask
            .iter()
            .enumerate()
            .filter(|(_, &keep)| keep)
            .flat_map(|(r, _)| self.row(r).iter().copied())
            .collect();
        let n = data.len() / self.cols;
        if n == 0 {
            return Err(UdsError::Shape("position mask selects no rows".into()));
        }
        Self::from_dense(n, self.cols, data)
    }

    /// `a * self + b * other`, same shape required.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(
            self.rows,
            self.cols,
            data,
            self.valid_rows.max(other.valid_rows),
        )
    }

    /// Column-major flattening, `u = vec(L)`, index `v * N + n`.
    pub fn vec_col_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for n in 0..self.rows {
            for v in 0..self.cols {
                out[v * self.rows + n] = self.data[n * self.cols + v];
            }
        }
        out
    }

    /// The valid sub-block as an nalgebra matrix.
    pub fn valid_block(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            self.valid_rows,
            self.cols,
            &self.data[..self.valid_rows * self.cols],
        )
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Row-wise softmax of a [`LogitsMatrix`].
///
/// Padding rows carry the uniform distribution; `valid_rows` marks where the
/// meaningful rows end.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    valid_rows: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn valid_rows(&self) -> usize {
        self.valid_rows
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Wraps externally computed probabilities. Rows must be nonnegative and
    /// the valid ones must sum to one within `1e-6`.
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>, valid_rows: usize) -> Result<Self> {
        if data.len() != rows * cols || valid_rows == 0 || valid_rows > rows {
            return Err(UdsError::Shape(format!(
                "bad probability matrix {rows}x{cols} with {} values",
                data.len()
            )));
        }
        for r in 0..valid_rows {
            let row = &data[r * cols..(r + 1) * cols];
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(UdsError::Shape(format!("row {r} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(UdsError::Shape(format!("row {r} sums to {s}")));
            }
        }
        Ok(Self {
            rows,
            cols,
            valid_rows,
            data,
        })
    }
}

/// Numerically stable softmax of one row, written into `out`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Applies softmax to each valid row (max-subtracted). Padding rows become
/// uniform.
pub fn softmax_rows(logits: &LogitsMatrix) -> Result<ProbMatrix> {
    // LogitsMatrix construction already rejects non-finite entries, but the
    // check is repeated so the error names the position even if the data was
    // deserialized without validation.
    if let Some(pos) = logits.data.iter().position(|v| !v.is_finite()) {
        return Err(UdsError::NonFinite {
            row: pos / logits.cols,
            col: pos % logits.cols,
            value: logits.data[pos],
        });
    }
    let (rows, cols) = (logits.rows, logits.cols);
    let mut data = vec![1.0 / cols as f64; rows * cols];
    for r in 0..logits.valid_rows {
        softmax_into(logits.row(r), &mut data[r * cols..(r + 1) * cols]);
    }
    Ok(ProbMatrix {
        rows,
        cols,
        valid_rows: logits.valid_rows,
        data,
    })
}
