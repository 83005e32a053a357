//! Path-dependent payoffs and their cost tensors over the product grid.

mod autocall;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autocall::{worst_of_autocall, AutocallSpec, Discounting, KnockOut};

use crate::lp::IndexMap;
use crate::marginals::MarginalSystem;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("path has {found} entries, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("path prices must be positive and finite")]
    NonPositivePrice,
    #[error("invalid autocall specification: {0}")]
    InvalidSpec(String),
    #[error("cost is not finite at flat index {index}")]
    NonFiniteCost { index: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Lower bound: minimize the expected cost, dual is a subhedge.
    #[default]
    Min,
    /// Upper bound: maximize the expected cost, dual is a superhedge.
    Max,
}

impl Direction {
    /// `+1` for minimization, `-1` for maximization.
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Direction::Min => T::one(),
            Direction::Max => -T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }
}

/// Payoff values on every grid path, stored raw (never negated) in flat
/// index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTensor<T> {
    pub values: Vec<T>,
    pub index_map: IndexMap,
    pub direction: Direction,
}

impl<T: Scalar> CostTensor<T> {
    pub fn new(values: Vec<T>, index_map: IndexMap, direction: Direction) -> Result<Self, PayoffError> {
        if values.len() != index_map.len() {
            return Err(PayoffError::ShapeMismatch { expected: index_map.len(), found: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(PayoffError::NonFiniteCost { index });
        }
        Ok(Self { values, index_map, direction })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }
}

/// Writes the grid path of multi-index `idx` into `path` (time-major,
/// asset-minor).
pub fn path_at<T: Scalar>(system: &MarginalSystem<T>, idx: &[usize], path: &mut [T]) {
    for ((slot, &i), grid) in path.iter_mut().zip(idx).zip(system.flat_grids()) {
        *slot = grid.support()[i];
    }
}

/// Evaluates `f` on every grid path. The tensor is partitioned into index
/// ranges evaluated in parallel; each value is written once.
pub fn build_cost_tensor<T, F>(
    system: &MarginalSystem<T>,
    f: F,
    direction: Direction,
) -> Result<CostTensor<T>, PayoffError>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    let map = IndexMap::new(system.dims());
    let rank = map.rank();
    let mut values = vec![T::zero(); map.len()];
    const CHUNK: usize = 4096;
    values.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut idx = vec![0usize; rank];
        let mut path = vec![T::zero(); rank];
        for (k, v) in chunk.iter_mut().enumerate() {
            map.unflatten_into(c * CHUNK + k, &mut idx);
            path_at(system, &idx, &mut path);
            *v = f(&path);
        }
    });
    CostTensor::new(values, map, direction)
}

/// Cost tensor of the worst-of autocallable; the system's times must be the
/// observation dates and its asset count must match the spec.
pub fn autocall_cost_tensor<T: Scalar>(
    system: &MarginalSystem<T>,
    spec: &AutocallSpec<T>,
    direction: Direction,
) -> Result<CostTensor<T>, PayoffError> {
    spec.validate()?;
    let expected = spec.n_observations() * spec.d;
    if system.n_times() * system.n_assets() != expected || system.n_assets() != spec.d {
        return Err(PayoffError::ShapeMismatch { expected, found: system.n_times() * system.n_assets() });
    }
    if system.flat_grids().any(|g| g.min() <= T::zero()) {
        return Err(PayoffError::NonPositivePrice);
    }
    build_cost_tensor(system, |p| autocall::evaluate(p, spec), direction)
}
