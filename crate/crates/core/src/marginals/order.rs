//! Convex order and irreducibility of consecutive marginals, decided through
//! potential functions.
//!
//! Potentials of discrete measures are piecewise linear with kinks on the
//! support, so comparing them on the merged support is exact. The strict set
//! `{u_mu < u_nu}` additionally needs the midpoints of adjacent merged points:
//! on each segment the difference is affine and nonnegative at both ends.

use serde::{Deserialize, Serialize};

use super::{MarginalError, MarginalGrid};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderTolerance {
    pub mean: f64,
    pub potential: f64,
}

impl Default for OrderTolerance {
    fn default() -> Self {
        Self { mean: 1e-9, potential: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness<T> {
    MeanMismatch { mean_mu: T, mean_nu: T },
    Potential { x: T, u_mu: T, u_nu: T },
}

/// Open interval `(lo, hi)`; endpoints may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval<T> {
    pub lo: T,
    pub hi: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl<T: Scalar> Interval<T> {
    pub fn interior(&self) -> OpenInterval<T> {
        OpenInterval { lo: self.lo, hi: self.hi }
    }
}

/// Convex-order and irreducibility status of one consecutive pair `(mu, nu)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport<T> {
    pub in_convex_order: bool,
    pub witness: Option<Witness<T>>,
    pub irreducible: bool,
    /// `{u_mu < u_nu}` when it is a single interval.
    pub domain_i: Option<OpenInterval<T>>,
    pub domain_j: Option<Interval<T>>,
    /// Whether `I` coincides with the interior of `J`.
    pub i_is_interior_of_j: bool,
}

impl<T> PairReport<T> {
    fn order_only(in_convex_order: bool, witness: Option<Witness<T>>) -> Self {
        Self { in_convex_order, witness, irreducible: false, domain_i: None, domain_j: None, i_is_interior_of_j: false }
    }
}

fn merged_support<T: Scalar>(mu: &MarginalGrid<T>, nu: &MarginalGrid<T>) -> Vec<T> {
    let mut pts: Vec<T> = mu.support().iter().chain(nu.support()).copied().collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite support"));
    pts.dedup();
    pts
}

pub fn check_convex_order<T: Scalar>(mu: &MarginalGrid<T>, nu: &MarginalGrid<T>) -> PairReport<T> {
    check_convex_order_with(mu, nu, OrderTolerance::default())
}

pub fn check_convex_order_with<T: Scalar>(
    mu: &MarginalGrid<T>,
    nu: &MarginalGrid<T>,
    tol: OrderTolerance,
) -> PairReport<T> {
    let (mean_mu, mean_nu) = (mu.mean(), nu.mean());
    if (mean_mu - mean_nu).abs() > T::tol(tol.mean) {
        return PairReport::order_only(false, Some(Witness::MeanMismatch { mean_mu, mean_nu }));
    }
    let slack = T::tol(tol.potential);
    for x in merged_support(mu, nu) {
        let (u_mu, u_nu) = (mu.potential(x), nu.potential(x));
        if u_mu > u_nu + slack {
            return PairReport::order_only(false, Some(Witness::Potential { x, u_mu, u_nu }));
        }
    }
    PairReport::order_only(true, None)
}

pub fn irreducible_domain<T: Scalar>(
    mu: &MarginalGrid<T>,
    nu: &MarginalGrid<T>,
) -> Result<PairReport<T>, MarginalError> {
    irreducible_domain_with(mu, nu, OrderTolerance::default())
}

pub fn irreducible_domain_with<T: Scalar>(
    mu: &MarginalGrid<T>,
    nu: &MarginalGrid<T>,
    tol: OrderTolerance,
) -> Result<PairReport<T>, MarginalError> {
    let mut report = check_convex_order_with(mu, nu, tol);
    if !report.in_convex_order {
        return Err(MarginalError::NotInConvexOrder);
    }
    let slack = T::tol(tol.potential);
    let pts = merged_support(mu, nu);

    // Interleave points and midpoints: p0, m0, p1, m1, ..., pK.
    let mut probes: Vec<T> = Vec::with_capacity(2 * pts.len());
    for (k, &p) in pts.iter().enumerate() {
        probes.push(p);
        if let Some(&q) = pts.get(k + 1) {
            probes.push((p + q) / T::lit(2.0));
        }
    }
    let strict: Vec<bool> = probes.iter().map(|&x| nu.potential(x) - mu.potential(x) > slack).collect();

    // Maximal runs of strict probes are the connected components.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (k, &s) in strict.iter().enumerate() {
        match (s, start) {
            (true, None) => start = Some(k),
            (false, Some(a)) => {
                runs.push((a, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push((a, strict.len() - 1));
    }

    let first = nu.atoms().find(|&(_, w)| w > T::zero()).map(|(x, _)| x);
    let last = nu.atoms().filter(|&(_, w)| w > T::zero()).last().map(|(x, _)| x);
    let (lo, hi) = (nu.min(), nu.max());
    let j = Interval { lo, hi, lo_closed: first == Some(lo), hi_closed: last == Some(hi) };
    report.domain_j = Some(j);

    if let [(a, b)] = runs[..] {
        // A run boundary probe is a point when its index is even, a midpoint
        // when odd; the open interval ends at the neighbouring support point.
        let left = if a % 2 == 0 { probes[a] } else { probes[a - 1] };
        let right = if b % 2 == 0 { probes[b] } else { probes[b + 1] };
        let i = OpenInterval { lo: left, hi: right };
        let carries_mu = mu.atoms().filter(|&(_, w)| w > T::zero()).all(|(x, _)| x > i.lo && x < i.hi);
        report.irreducible = carries_mu;
        report.i_is_interior_of_j = i == j.interior();
        report.domain_i = Some(i);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &[f64], w: &[f64]) -> MarginalGrid<f64> {
        MarginalGrid::new(s.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn convex_order_examples() {
        let delta = MarginalGrid::dirac(0.0);
        let split = g(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!(check_convex_order(&delta, &split).in_convex_order);

        let rev = check_convex_order(&split, &delta);
        assert!(!rev.in_convex_order);
        assert_eq!(rev.witness, Some(Witness::Potential { x: 0.0, u_mu: 1.0, u_nu: 0.0 }));

        let shifted = check_convex_order(&delta, &MarginalGrid::dirac(1.0));
        assert!(matches!(shifted.witness, Some(Witness::MeanMismatch { .. })));
    }

    #[test]
    fn dirac_to_symmetric_split_is_irreducible_on_unit_interval() {
        let r = irreducible_domain(&MarginalGrid::dirac(0.0), &g(&[-1.0, 1.0], &[0.5, 0.5])).unwrap();
        assert!(r.irreducible);
        assert_eq!(r.domain_i, Some(OpenInterval { lo: -1.0, hi: 1.0 }));
        assert_eq!(r.domain_j, Some(Interval { lo: -1.0, hi: 1.0, lo_closed: true, hi_closed: true }));
        assert!(r.i_is_interior_of_j);
    }

    #[test]
    fn equal_marginals_are_not_irreducible() {
        let m = g(&[-1.0, 1.0], &[0.5, 0.5]);
        let r = irreducible_domain(&m, &m).unwrap();
        assert!(!r.irreducible);
        assert_eq!(r.domain_i, None);
    }

    #[test]
    fn disjoint_strict_set_is_reducible() {
        // mu = {-1, 1} each split into {-1.5, -0.5} and {0.5, 1.5}: the
        // potentials touch at 0, so {u_mu < u_nu} has two components.
        let mu = g(&[-1.0, 1.0], &[0.5, 0.5]);
        let nu = g(&[-1.5, -0.5, 0.5, 1.5], &[0.25; 4]);
        let r = irreducible_domain(&mu, &nu).unwrap();
        assert!(!r.irreducible);
        assert!(r.domain_i.is_none());
    }

    #[test]
    fn precondition_enforced() {
        let r = irreducible_domain(&g(&[-1.0, 1.0], &[0.5, 0.5]), &MarginalGrid::dirac(0.0));
        assert!(matches!(r, Err(MarginalError::NotInConvexOrder)));
    }
}
