//! Sparse LP assembly of the discrete multimarginal martingale transport
//! problem, exact and relaxed.
//!
//! Column `j` is the mass of the grid path `unflatten(j)`. Rows come in a
//! fixed order: all marginal rows (time-major, asset-minor, grid node
//! fastest), then martingale rows (time, asset, history cell in flatten
//! order; in relaxed mode each cell contributes an upper/lower pair).
//! Conditional expectations are linearized by multiplying through by the
//! cell mass, so zero-mass cells give vacuous rows.

mod index;
mod triplet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use index::IndexMap;
pub use triplet::{read_triplet, write_triplet, TripletError};

use crate::marginals::MarginalSystem;
use crate::payoff::{CostTensor, Direction};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, SparseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range on axis {axis} of size {size}")]
    OutOfRange { axis: usize, index: usize, size: usize },
    #[error("marginal system is not in convex order")]
    Infeasible,
    #[error("negative martingale tolerance for (t={t}, k={k})")]
    NegativeDelta { t: usize, k: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> char {
        match self {
            Sense::Eq => 'E',
            Sense::Le => 'L',
            Sense::Ge => 'G',
        }
    }
}

/// Provenance of a row, used to map duals back onto hedging positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    /// Marginal constraint of grid node `node` of `mu_{t,i}`.
    Marginal {
        t: usize,
        i: usize,
        node: usize,
    },
    MartingaleEq {
        t: usize,
        k: usize,
        cell: usize,
    },
    MartingaleUb {
        t: usize,
        k: usize,
        cell: usize,
    },
    MartingaleLb {
        t: usize,
        k: usize,
        cell: usize,
    },
    /// Row of an LP not assembled from a marginal system.
    Other,
}

impl RowTag {
    pub fn kind(&self) -> &'static str {
        match self {
            RowTag::Marginal { .. } => "marginal",
            RowTag::MartingaleEq { .. } => "martingale_eq",
            RowTag::MartingaleUb { .. } => "martingale_ub",
            RowTag::MartingaleLb { .. } => "martingale_lb",
            RowTag::Other => "other",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Relaxed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaOverride<T> {
    pub t: usize,
    pub k: usize,
    pub value: T,
}

/// Martingale tolerances for relaxed mode. Unless overridden, the tolerance
/// for `(t, k)` is the largest node spacing of `mu_{t+1,k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaPolicy<T> {
    #[serde(default)]
    pub overrides: Vec<DeltaOverride<T>>,
    /// Multiplies every default tolerance.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl<T> Default for DeltaPolicy<T> {
    fn default() -> Self {
        Self { overrides: Vec::new(), scale: 1.0 }
    }
}

impl<T: Scalar> DeltaPolicy<T> {
    pub fn scaled(scale: f64) -> Self {
        Self { overrides: Vec::new(), scale }
    }

    pub fn delta(&self, system: &MarginalSystem<T>, t: usize, k: usize) -> T {
        self.overrides
            .iter()
            .find(|o| o.t == t && o.k == k)
            .map(|o| o.value)
            .unwrap_or_else(|| system.grid(t + 1, k).max_spacing() * T::lit(self.scale))
    }
}

/// Standard-form LP: minimize `objective . x` subject to `matrix x (sense) rhs`
/// row by row and `x >= 0`. Maximization problems are stored negated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub matrix: CsrMatrix<T>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<T>,
    pub row_meta: Vec<RowTag>,
    /// Column flattening convention.
    pub index_map: IndexMap,
    pub direction: Direction,
    /// Martingale tolerance per `(t, k)` in relaxed mode, time-major.
    #[serde(default)]
    pub deltas: Vec<T>,
    pub mode: Mode,
}

impl<T: Scalar> LinearProgram<T> {
    /// Generic LP with untagged rows.
    pub fn new(objective: Vec<T>, matrix: CsrMatrix<T>, senses: Vec<Sense>, rhs: Vec<T>) -> Result<Self, BuildError> {
        let n = matrix.n_cols();
        let m = matrix.n_rows();
        if objective.len() != n {
            return Err(BuildError::DimensionMismatch { expected: n, found: objective.len() });
        }
        if senses.len() != m || rhs.len() != m {
            return Err(BuildError::DimensionMismatch { expected: m, found: senses.len().min(rhs.len()) });
        }
        Ok(Self {
            objective,
            matrix,
            senses,
            rhs,
            row_meta: vec![RowTag::Other; m],
            index_map: IndexMap::new(vec![n]),
            direction: Direction::Min,
            deltas: Vec::new(),
            mode: Mode::Exact,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Objective value in the user's direction for a canonical value.
    pub fn user_objective(&self, canonical: T) -> T {
        self.direction.sign::<T>() * canonical
    }

    /// The raw cost (un-negated objective).
    pub fn cost(&self) -> Vec<T> {
        let s = self.direction.sign::<T>();
        self.objective.iter().map(|&c| s * c).collect()
    }

    pub fn n_marginal_rows(&self) -> usize {
        self.row_meta.iter().filter(|t| matches!(t, RowTag::Marginal { .. })).count()
    }

    pub fn delta(&self, t: usize, k: usize) -> T {
        let d = self.n_assets();
        self.deltas.get(t * d + k).copied().unwrap_or_else(T::zero)
    }

    /// Asset count recovered from the row metadata.
    pub fn n_assets(&self) -> usize {
        self.row_meta
            .iter()
            .filter_map(|t| match t {
                RowTag::Marginal { i, .. } => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(1)
    }
}

/// Row and nonzero counts of an assembly, computed without assembling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n_vars: usize,
    pub marginal_rows: usize,
    pub martingale_rows: usize,
    pub nnz: usize,
}

pub fn shape(dims: &[usize], n_assets: usize, mode: Mode) -> Shape {
    let map = IndexMap::new(dims.to_vec());
    let n_vars = map.len();
    let n_times = dims.len() / n_assets;
    let per_pair = if mode == Mode::Relaxed { 2 } else { 1 };
    let mut martingale_rows = 0;
    for t in 0..n_times.saturating_sub(1) {
        martingale_rows += per_pair * n_assets * map.prefix_count((t + 1) * n_assets);
    }
    let families = per_pair * n_assets * n_times.saturating_sub(1);
    Shape { n_vars, marginal_rows: dims.iter().sum(), martingale_rows, nnz: n_vars * dims.len() + n_vars * families }
}

pub fn build<T: Scalar>(
    system: &MarginalSystem<T>,
    cost: &CostTensor<T>,
    mode: Mode,
    delta_policy: &DeltaPolicy<T>,
) -> Result<LinearProgram<T>, BuildError> {
    let dims = system.dims();
    let map = IndexMap::new(dims.clone());
    if cost.index_map.dims() != dims.as_slice() || cost.values.len() != map.len() {
        return Err(BuildError::DimensionMismatch { expected: map.len(), found: cost.values.len() });
    }
    if system.is_feasible() == Some(false) {
        return Err(BuildError::Infeasible);
    }
    let d = system.n_assets();
    let n_times = system.n_times();
    let n_vars = map.len();
    let rank = dims.len();
    let grids: Vec<_> = system.flat_grids().collect();
    let expected = shape(&dims, d, mode);

    let mut offsets = Vec::with_capacity(expected.marginal_rows + expected.martingale_rows + 1);
    let mut indices = Vec::with_capacity(expected.nnz);
    let mut values: Vec<T> = Vec::with_capacity(expected.nnz);
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    let mut row_meta = Vec::new();
    offsets.push(0);

    // Marginal rows: column j lies in row (p, idx[p]) for every coordinate p.
    // Each such row holds n_vars / dims[p] columns; fill in ascending column
    // order so rows come out sorted.
    let row_base: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &n| {
            let b = *acc;
            *acc += n;
            Some(b)
        })
        .collect();
    let marginal_nnz = n_vars * rank;
    let mut cursor: Vec<usize> = Vec::with_capacity(expected.marginal_rows);
    for (p, &n) in dims.iter().enumerate() {
        let per_row = n_vars / n;
        let (t, i) = (p / d, p % d);
        for node in 0..n {
            cursor.push(offsets[offsets.len() - 1]);
            offsets.push(offsets[offsets.len() - 1] + per_row);
            senses.push(Sense::Eq);
            rhs.push(grids[p].weights()[node]);
            row_meta.push(RowTag::Marginal { t, i, node });
        }
    }
    indices.resize(marginal_nnz, 0);
    values.resize(marginal_nnz, T::one());
    let mut idx = vec![0usize; rank];
    for j in 0..n_vars {
        for p in 0..rank {
            let row = row_base[p] + idx[p];
            indices[cursor[row]] = j;
            cursor[row] += 1;
        }
        // odometer increment, last coordinate fastest
        for p in (0..rank).rev() {
            idx[p] += 1;
            if idx[p] < dims[p] {
                break;
            }
            idx[p] = 0;
        }
    }

    let mut deltas = Vec::new();
    for t in 0..n_times.saturating_sub(1) {
        for k in 0..d {
            let delta = match mode {
                Mode::Exact => T::zero(),
                Mode::Relaxed => {
                    let v = delta_policy.delta(system, t, k);
                    if v < T::zero() {
                        return Err(BuildError::NegativeDelta { t, k });
                    }
                    v
                }
            };
            deltas.push(delta);
        }
    }
    if mode == Mode::Relaxed {
        // Tolerances for the last time are unused but keep the (t, k) layout.
        deltas.extend(std::iter::repeat_n(T::zero(), d));
    }

    let half = T::lit(0.5);
    for t in 0..n_times.saturating_sub(1) {
        let prefix = (t + 1) * d;
        let block = map.block_len(prefix);
        for k in 0..d {
            let (from, to) = (t * d + k, (t + 1) * d + k);
            let (from_stride, to_stride) = (map.strides()[from], map.strides()[to]);
            let (from_support, to_support) = (grids[from].support(), grids[to].support());
            let half_delta = deltas[t * d + k] * half;
            for cell in 0..map.prefix_count(prefix) {
                let cols = cell * block..(cell + 1) * block;
                let x_now = from_support[(cols.start / from_stride) % dims[from]];
                let increment = |j: usize| to_support[(j / to_stride) % dims[to]] - x_now;
                let mut push_row = |shift: T, sense: Sense, tag: RowTag| {
                    for j in cols.clone() {
                        indices.push(j);
                        values.push(increment(j) + shift);
                    }
                    offsets.push(indices.len());
                    senses.push(sense);
                    rhs.push(T::zero());
                    row_meta.push(tag);
                };
                match mode {
                    Mode::Exact => push_row(T::zero(), Sense::Eq, RowTag::MartingaleEq { t, k, cell }),
                    Mode::Relaxed => {
                        push_row(-half_delta, Sense::Le, RowTag::MartingaleUb { t, k, cell });
                        push_row(half_delta, Sense::Ge, RowTag::MartingaleLb { t, k, cell });
                    }
                }
            }
        }
    }

    let n_rows = senses.len();
    let matrix = CsrMatrix::new(n_rows, n_vars, offsets, indices, values)?;
    let sign = cost.direction.sign::<T>();
    Ok(LinearProgram {
        objective: cost.values.iter().map(|&c| sign * c).collect(),
        matrix,
        senses,
        rhs,
        row_meta,
        index_map: map,
        direction: cost.direction,
        deltas,
        mode,
    })
}
