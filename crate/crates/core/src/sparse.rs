//! Compressed sparse row storage and the products used by the solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Rows shorter than this total nonzero count are multiplied serially.
const PARALLEL_NNZ: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("row offsets must start at 0, be monotone, and end at nnz")]
    BadOffsets,
    #[error("column index {col} out of range for {n_cols} columns")]
    ColumnOutOfRange { col: usize, n_cols: usize },
    #[error("row {row} has unsorted or duplicate column indices")]
    UnsortedRow { row: usize },
    #[error("index and value arrays differ in length")]
    LengthMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if indices.len() != values.len() {
            return Err(SparseError::LengthMismatch);
        }
        if offsets.len() != n_rows + 1
            || offsets[0] != 0
            || offsets[n_rows] != indices.len()
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(SparseError::BadOffsets);
        }
        for r in 0..n_rows {
            let row = &indices[offsets[r]..offsets[r + 1]];
            if let Some(&col) = row.iter().find(|&&c| c >= n_cols) {
                return Err(SparseError::ColumnOutOfRange { col, n_cols });
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::UnsortedRow { row: r });
            }
        }
        Ok(Self { n_rows, n_cols, offsets, indices, values })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self, SparseError> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if r >= n_rows {
                return Err(SparseError::BadOffsets);
            }
            if last == Some((r, c)) {
                let l = values.len() - 1;
                values[l] = values[l] + v;
                continue;
            }
            indices.push(c);
            values.push(v);
            offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        Self::new(n_rows, n_cols, offsets, indices, values)
    }

    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().filter(|(_, v)| **v != T::zero()).map(move |(c, &v)| (r, c, v)))
            .collect();
        Self::from_triplets(rows.len(), n_cols, &triplets).expect("dense input is well formed")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (r, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                indices[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, offsets, indices, values }
    }

    /// `out = self * x`. Each output entry is reduced serially in storage
    /// order, so the result does not depend on the number of worker threads.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        let row_dot = |r: usize| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).fold(T::zero(), |acc, (&c, &v)| acc + v * x[c])
        };
        if self.nnz() >= PARALLEL_NNZ {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
        } else {
            out.iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn row_abs_max(&self) -> Vec<T> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().fold(T::zero(), |m, v| m.max(v.abs()))).collect()
    }

    pub fn col_abs_max(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            out[c] = out[c].max(v.abs());
        }
        out
    }

    /// `self <- diag(row) * self * diag(col)`.
    pub fn scale(&mut self, row: &[T], col: &[T]) {
        for (r, &rs) in row.iter().enumerate().take(self.n_rows) {
            for k in self.offsets[r]..self.offsets[r + 1] {
                self.values[k] = self.values[k] * rs * col[self.indices[k]];
            }
        }
    }
}
