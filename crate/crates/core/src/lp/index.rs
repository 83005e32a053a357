use serde::{Deserialize, Serialize};

use super::BuildError;

/// Row-major flattening of grid-path multi-indices; the last coordinate
/// (last time, last asset) varies fastest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl IndexMap {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut strides = vec![1usize; dims.len()];
        for r in (0..dims.len().saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * dims[r + 1];
        }
        Self { dims, strides }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Number of multi-indices.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self, idx: &[usize]) -> Result<usize, BuildError> {
        if idx.len() != self.dims.len() {
            return Err(BuildError::DimensionMismatch { expected: self.dims.len(), found: idx.len() });
        }
        let mut flat = 0;
        for (r, (&i, &n)) in idx.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(BuildError::OutOfRange { axis: r, index: i, size: n });
            }
            flat += i * self.strides[r];
        }
        Ok(flat)
    }

    pub fn unflatten_into(&self, mut flat: usize, idx: &mut [usize]) {
        debug_assert!(flat < self.len());
        for (r, slot) in idx.iter_mut().enumerate() {
            *slot = flat / self.strides[r];
            flat %= self.strides[r];
        }
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        self.unflatten_into(flat, &mut idx);
        idx
    }

    /// Number of distinct prefixes of length `k`.
    pub fn prefix_count(&self, k: usize) -> usize {
        self.dims[..k].iter().product()
    }

    /// Number of multi-indices sharing one prefix of length `k`; such indices
    /// occupy a contiguous flat range.
    pub fn block_len(&self, k: usize) -> usize {
        self.dims[k..].iter().product()
    }
}
