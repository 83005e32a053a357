//! Dense reference solver for small LPs, sharing no code with the sparse
//! PDHG path, and a cross-check of PDHG solutions against it.

mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::{simplex_solve, DenseLp, OracleSolution, Status};

use crate::certificates::{extract_certificate, CertificateError, DualCertificate};
use crate::lp::{IndexMap, LinearProgram};
use crate::marginals::MarginalSystem;
use crate::pdhg::Solution;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dense LP of {rows}x{cols} exceeds the size guard")]
    SizeGuard { rows: usize, cols: usize },
    #[error("pivot limit reached")]
    CycleGuard,
    #[error("matrix, rhs, objective and senses disagree in shape")]
    ShapeMismatch,
    #[error("oracle status {0:?}")]
    NotOptimal(Status),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck<T> {
    /// Optimal values in the user's direction.
    pub oracle_value: T,
    pub pdhg_value: T,
    /// `|pdhg - oracle| / max(1, |oracle|)`
    pub relative_error: T,
    pub within_tolerance: bool,
    /// Largest difference between the two certificates' portfolio values
    /// over all grid paths. Optimal duals need not be unique, so this is
    /// informational.
    pub max_portfolio_gap: T,
    /// The same, restricted to the oracle plan's support.
    pub max_portfolio_gap_on_support: T,
}

/// Solves `lp` densely and compares against a PDHG solution.
pub fn cross_check<T: Scalar>(
    lp: &LinearProgram<T>,
    pdhg: &Solution<T>,
    system: &MarginalSystem<T>,
    tol: T,
) -> Result<CrossCheck<T>, OracleError> {
    let dense = DenseLp::from_sparse(lp)?;
    let oracle = simplex_solve(&dense)?;
    if oracle.status != Status::Optimal {
        return Err(OracleError::NotOptimal(oracle.status));
    }
    let oracle_value = lp.user_objective(oracle.value);
    let pdhg_value = lp.user_objective(pdhg.report.primal_objective);
    let relative_error = (pdhg_value - oracle_value).abs() / T::one().max(oracle_value.abs());

    let a = extract_certificate(&oracle.y, lp, system)?;
    let b = extract_certificate(&pdhg.y, lp, system)?;
    let map = IndexMap::new(system.dims());
    let floor = T::lit(1e-8);
    let (mut all, mut support) = (T::zero(), T::zero());
    for j in 0..map.len() {
        let idx = map.unflatten(j);
        let gap = (value(&a, &idx, system) - value(&b, &idx, system)).abs();
        all = all.max(gap);
        if oracle.x[j] >= floor {
            support = support.max(gap);
        }
    }
    Ok(CrossCheck {
        oracle_value,
        pdhg_value,
        relative_error,
        within_tolerance: relative_error <= tol,
        max_portfolio_gap: all,
        max_portfolio_gap_on_support: support,
    })
}

fn value<T: Scalar>(cert: &DualCertificate<T>, idx: &[usize], system: &MarginalSystem<T>) -> T {
    crate::certificates::portfolio_value_with_slack(cert, idx, system).unwrap_or_else(|_| T::nan())
}
