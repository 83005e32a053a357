use serde::{Deserialize, Serialize};

use super::MarginalError;
use crate::scalar::Scalar;

/// Discrete distribution of one asset at one observation time.
///
/// Support values are spot-relative prices (1.0 = spot) and must be strictly
/// increasing. Weights are nonnegative and sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalGrid<T> {
    support: Vec<T>,
    weights: Vec<T>,
    /// `(time index, asset index)`
    pub label: (usize, usize),
}

impl<T: Scalar> MarginalGrid<T> {
    pub fn new(support: Vec<T>, weights: Vec<T>) -> Result<Self, MarginalError> {
        Self::with_label(support, weights, (0, 0))
    }

    pub fn with_label(support: Vec<T>, weights: Vec<T>, label: (usize, usize)) -> Result<Self, MarginalError> {
        if support.is_empty() {
            return Err(MarginalError::EmptyGrid);
        }
        if support.len() != weights.len() {
            return Err(MarginalError::LengthMismatch { support: support.len(), weights: weights.len() });
        }
        if support.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(MarginalError::NonFinite);
        }
        if let Some(pos) = support.windows(2).position(|w| w[0] >= w[1]) {
            return Err(MarginalError::SupportNotIncreasing { index: pos + 1 });
        }
        if let Some(pos) = weights.iter().position(|&w| w < T::zero()) {
            return Err(MarginalError::NegativeWeight { index: pos });
        }
        let total: T = weights.iter().copied().sum();
        let slack = T::tol(1e-12) * T::from_usize_lossy(weights.len()).max(T::one());
        if (total - T::one()).abs() > slack {
            return Err(MarginalError::WeightsNotNormalized { sum: total.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { support, weights, label })
    }

    /// Builds a grid from unsorted atoms, merging coincident support points and
    /// renormalizing the weights.
    pub fn from_atoms(mut atoms: Vec<(T, T)>) -> Result<Self, MarginalError> {
        atoms.retain(|&(_, w)| w > T::zero());
        if atoms.is_empty() {
            return Err(MarginalError::EmptyGrid);
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite atoms"));
        let mut support: Vec<T> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<T> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match support.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() = *weights.last().unwrap() + w,
                _ => {
                    support.push(x);
                    weights.push(w);
                }
            }
        }
        let total: T = weights.iter().copied().sum();
        weights.iter_mut().for_each(|w| *w = *w / total);
        Self::new(support, weights)
    }

    pub fn dirac(x: T) -> Self {
        Self { support: vec![x], weights: vec![T::one()], label: (0, 0) }
    }

    pub fn labelled(mut self, t: usize, i: usize) -> Self {
        self.label = (t, i);
        self
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> T {
        self.atoms().map(|(x, w)| x * w).sum()
    }

    pub fn min(&self) -> T {
        self.support[0]
    }

    pub fn max(&self) -> T {
        self.support[self.support.len() - 1]
    }

    /// Largest gap between adjacent support points; zero for a single atom.
    pub fn max_spacing(&self) -> T {
        self.support.windows(2).fold(T::zero(), |acc, w| acc.max(w[1] - w[0]))
    }

    /// Potential function `u(x) = sum_j w_j |x - s_j|`.
    pub fn potential(&self, x: T) -> T {
        self.atoms().map(|(s, w)| w * (x - s).abs()).sum()
    }
}

/// Free-function form of [`MarginalGrid::potential`].
pub fn potential<T: Scalar>(m: &MarginalGrid<T>, x: T) -> T {
    m.potential(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> MarginalGrid<f64> {
        MarginalGrid::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(&MarginalGrid::dirac(0.0), 2.0), 2.0);
        assert_eq!(potential(&two_point(), 0.0), 1.0);
        assert_eq!(potential(&two_point(), 3.0), 3.0);
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(matches!(MarginalGrid::<f64>::new(vec![], vec![]), Err(MarginalError::EmptyGrid)));
        assert!(matches!(
            MarginalGrid::new(vec![1.0, 1.0], vec![0.5, 0.5]),
            Err(MarginalError::SupportNotIncreasing { index: 1 })
        ));
        assert!(matches!(
            MarginalGrid::new(vec![0.0, 1.0], vec![1.5, -0.5]),
            Err(MarginalError::NegativeWeight { index: 1 })
        ));
        assert!(matches!(
            MarginalGrid::new(vec![0.0, 1.0], vec![0.5, 0.6]),
            Err(MarginalError::WeightsNotNormalized { .. })
        ));
        assert!(matches!(MarginalGrid::new(vec![0.0], vec![1.0, 0.0]), Err(MarginalError::LengthMismatch { .. })));
    }

    #[test]
    fn from_atoms_merges_and_sorts() {
        let g = MarginalGrid::from_atoms(vec![(1.0, 0.25), (-1.0, 0.5), (1.0, 0.25)]).unwrap();
        assert_eq!(g.support(), &[-1.0, 1.0]);
        assert_eq!(g.weights(), &[0.5, 0.5]);
        assert_eq!(g.mean(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let g = MarginalGrid::<f32>::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(g.potential(0.0), 1.0);
    }
}
