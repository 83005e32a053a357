//! Risk-neutral marginal extraction from call prices by butterfly second
//! differences.

use serde::{Deserialize, Serialize};

use super::{MarginalError, MarginalGrid};
use crate::scalar::Scalar;

const CONVEXITY_TOL: f64 = 1e-8;

/// Extraction diagnostics. Negative masses clipped away are reported here
/// rather than repaired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction<T> {
    pub grid: MarginalGrid<T>,
    /// Total negative mass removed before renormalization.
    pub clipped_mass: T,
    /// Raw mass captured by the interior strikes before renormalization.
    pub raw_mass: T,
    /// Mean of the clipped grid minus the mean of the signed raw masses.
    pub mean_drift: T,
}

pub fn breeden_litzenberger<T: Scalar>(
    strikes: &[T],
    call_prices: &[T],
    clip_negatives: bool,
) -> Result<MarginalGrid<T>, MarginalError> {
    breeden_litzenberger_with_report(strikes, call_prices, clip_negatives).map(|e| e.grid)
}

/// Interior mass at `K_j` is the drop in call-price slope across `K_j`:
/// `(C_{j-1} - C_j)/(K_j - K_{j-1}) - (C_j - C_{j+1})/(K_{j+1} - K_j)`.
pub fn breeden_litzenberger_with_report<T: Scalar>(
    strikes: &[T],
    call_prices: &[T],
    clip_negatives: bool,
) -> Result<Extraction<T>, MarginalError> {
    let n = strikes.len();
    if n < 3 {
        return Err(MarginalError::DegenerateGrid { strikes: n });
    }
    if call_prices.len() != n {
        return Err(MarginalError::LengthMismatch { support: n, weights: call_prices.len() });
    }
    if strikes.iter().chain(call_prices).any(|v| !v.is_finite()) {
        return Err(MarginalError::NonFinite);
    }
    if let Some(pos) = strikes.windows(2).position(|w| w[0] >= w[1]) {
        return Err(MarginalError::SupportNotIncreasing { index: pos + 1 });
    }
    let tol = T::tol(CONVEXITY_TOL);
    let violation = |index: usize, amount: T| MarginalError::NonConvexPrices {
        index,
        violation: amount.to_f64().unwrap_or(f64::NAN),
    };
    for (j, &c) in call_prices.iter().enumerate() {
        if c < -tol && !clip_negatives {
            return Err(violation(j, -c));
        }
    }
    for j in 1..n {
        let rise = call_prices[j] - call_prices[j - 1];
        if rise > tol && !clip_negatives {
            return Err(violation(j, rise));
        }
    }

    let slope = |a: usize, b: usize| (call_prices[a] - call_prices[b]) / (strikes[b] - strikes[a]);
    let raw: Vec<T> = (1..n - 1).map(|j| slope(j - 1, j) - slope(j, j + 1)).collect();

    let mut clipped_mass = T::zero();
    let mut masses = Vec::with_capacity(raw.len());
    for (k, &p) in raw.iter().enumerate() {
        if p < T::zero() {
            if p < -tol && !clip_negatives {
                return Err(violation(k + 1, -p));
            }
            clipped_mass = clipped_mass - p;
            masses.push(T::zero());
        } else {
            masses.push(p);
        }
    }
    let total: T = masses.iter().copied().sum();
    if total <= T::zero() {
        return Err(MarginalError::ZeroMass);
    }
    let support: Vec<T> = strikes[1..n - 1].to_vec();
    let weights: Vec<T> = masses.iter().map(|&p| p / total).collect();

    let raw_total: T = raw.iter().copied().sum();
    let raw_mean = if raw_total != T::zero() {
        support.iter().zip(&raw).map(|(&x, &p)| x * p).sum::<T>() / raw_total
    } else {
        T::zero()
    };
    let grid = MarginalGrid::new(support, weights)?;
    let mean_drift = grid.mean() - raw_mean;
    Ok(Extraction { grid, clipped_mass, raw_mass: raw_total, mean_drift })
}

/// Undiscounted call prices `C(K) = sum_j p_j max(s_j - K, 0)` of a pmf.
pub fn call_prices<T: Scalar>(pmf: &MarginalGrid<T>, strikes: &[T]) -> Vec<T> {
    strikes.iter().map(|&k| pmf.atoms().map(|(s, p)| p * (s - k).max(T::zero())).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_recovered() {
        let g = breeden_litzenberger(&[0.5, 1.0, 1.5], &[0.5, 0.0, 0.0], false).unwrap();
        assert_eq!(g.support(), &[1.0]);
        assert_eq!(g.weights(), &[1.0]);
    }

    #[test]
    fn two_point_pmf_recovered_at_interior_nodes() {
        // Strikes 0.6..1.4 step 0.2; the pmf sits on 0.8 and 1.2.
        // Prices by hand: C(0.6)=0.4, C(0.8)=0.2, C(1.0)=0.1, C(1.2)=0, C(1.4)=0.
        let strikes = [0.6, 0.8, 1.0, 1.2, 1.4];
        let prices = [0.4, 0.2, 0.1, 0.0, 0.0];
        let g: MarginalGrid<f64> = breeden_litzenberger(&strikes, &prices, false).unwrap();
        assert_eq!(g.support(), &[0.8, 1.0, 1.2]);
        let w = g.weights();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!(w[1].abs() < 1e-12);
        assert!((w[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_non_convex_inputs() {
        assert!(matches!(
            breeden_litzenberger(&[1.0, 2.0], &[0.1, 0.0], false),
            Err(MarginalError::DegenerateGrid { strikes: 2 })
        ));
        // Concave kink at 1.0.
        let r = breeden_litzenberger(&[0.5, 1.0, 1.5, 2.0], &[0.5, 0.4, 0.1, 0.0], false);
        assert!(matches!(r, Err(MarginalError::NonConvexPrices { index: 1, .. })));
    }

    #[test]
    fn clipping_reports_removed_mass() {
        let e: Extraction<f64> =
            breeden_litzenberger_with_report(&[0.5, 1.0, 1.5, 2.0], &[0.5, 0.4, 0.1, 0.0], true).unwrap();
        // raw masses: slope drops -0.4 at 1.0 and 0.4 at 1.5
        assert!((e.clipped_mass - 0.4).abs() < 1e-12);
        assert_eq!(e.grid.weights(), &[0.0, 1.0]);
    }
}
