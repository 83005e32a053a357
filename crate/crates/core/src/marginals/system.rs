use serde::{Deserialize, Serialize};

use super::order::{check_convex_order_with, irreducible_domain_with, OrderTolerance, PairReport};
use super::{MarginalError, MarginalGrid};
use crate::scalar::Scalar;

/// Validation outcome for a whole system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemValidation<T> {
    /// `pairs[i][t]` compares `mu_{t,i}` with `mu_{t+1,i}`.
    pub pairs: Vec<Vec<PairReport<T>>>,
    /// All consecutive pairs are in convex order, so the martingale
    /// transport set is nonempty.
    pub feasible: bool,
    /// All consecutive pairs are irreducible.
    pub theorem_hypotheses: bool,
}

/// The `N x d` family of marginals, `grids[t][i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalSystem<T> {
    times: Vec<T>,
    grids: Vec<Vec<MarginalGrid<T>>>,
    #[serde(default)]
    pub validation: Option<SystemValidation<T>>,
}

impl<T: Scalar> MarginalSystem<T> {
    pub fn new(times: Vec<T>, grids: Vec<Vec<MarginalGrid<T>>>) -> Result<Self, MarginalError> {
        if grids.is_empty() || grids[0].is_empty() {
            return Err(MarginalError::EmptySystem);
        }
        if times.len() != grids.len() {
            return Err(MarginalError::ShapeMismatch { expected: times.len(), found: grids.len() });
        }
        if let Some(pos) = times.windows(2).position(|w| w[0] >= w[1]) {
            return Err(MarginalError::TimesNotIncreasing { index: pos + 1 });
        }
        let d = grids[0].len();
        if let Some(row) = grids.iter().find(|row| row.len() != d) {
            return Err(MarginalError::ShapeMismatch { expected: d, found: row.len() });
        }
        let grids = grids
            .into_iter()
            .enumerate()
            .map(|(t, row)| row.into_iter().enumerate().map(|(i, g)| g.labelled(t, i)).collect())
            .collect();
        Ok(Self { times, grids, validation: None })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn n_times(&self) -> usize {
        self.grids.len()
    }

    pub fn n_assets(&self) -> usize {
        self.grids[0].len()
    }

    pub fn grid(&self, t: usize, i: usize) -> &MarginalGrid<T> {
        &self.grids[t][i]
    }

    pub fn grids(&self) -> &[Vec<MarginalGrid<T>>] {
        &self.grids
    }

    /// Grid sizes in time-major, asset-minor order.
    pub fn dims(&self) -> Vec<usize> {
        self.grids.iter().flatten().map(MarginalGrid::len).collect()
    }

    /// Grids in time-major, asset-minor order.
    pub fn flat_grids(&self) -> impl Iterator<Item = &MarginalGrid<T>> {
        self.grids.iter().flatten()
    }

    pub fn is_feasible(&self) -> Option<bool> {
        self.validation.as_ref().map(|v| v.feasible)
    }
}

pub fn validate_system<T: Scalar>(s: MarginalSystem<T>) -> MarginalSystem<T> {
    validate_system_with(s, OrderTolerance::default())
}

pub fn validate_system_with<T: Scalar>(mut s: MarginalSystem<T>, tol: OrderTolerance) -> MarginalSystem<T> {
    let mut pairs = Vec::with_capacity(s.n_assets());
    for i in 0..s.n_assets() {
        let per_asset: Vec<PairReport<T>> = (0..s.n_times().saturating_sub(1))
            .map(|t| {
                let (mu, nu) = (s.grid(t, i), s.grid(t + 1, i));
                irreducible_domain_with(mu, nu, tol).unwrap_or_else(|_| check_convex_order_with(mu, nu, tol))
            })
            .collect();
        pairs.push(per_asset);
    }
    let feasible = pairs.iter().flatten().all(|p| p.in_convex_order);
    let theorem_hypotheses = pairs.iter().flatten().all(|p| p.irreducible);
    s.validation = Some(SystemValidation { pairs, feasible, theorem_hypotheses });
    s
}
