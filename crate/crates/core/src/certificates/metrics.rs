//! Solution-quality metrics: objectives, duality gap, and per-row / per-column
//! infeasibilities with their norms. The KKT error used by the solver for
//! restarts and termination is derived from the same quantities.

use serde::{Deserialize, Serialize};

use crate::lp::{LinearProgram, Sense};
use crate::scalar::{dot, norm1, norm2, norm_inf, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms<T> {
    pub l1: T,
    pub l2: T,
    pub linf: T,
}

impl<T: Scalar> Norms<T> {
    pub fn of(v: &[T]) -> Self {
        Self { l1: norm1(v), l2: norm2(v), linf: norm_inf(v) }
    }
}

/// Objectives and infeasibilities of a primal-dual pair, in the canonical
/// minimization form of the LP.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct SolveReport<T> {
    pub primal_objective: T,
    pub dual_objective: T,
    pub duality_gap: T,
    pub primal_infeasibility: Norms<T>,
    pub dual_infeasibility: Norms<T>,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// Per-row constraint violation.
    #[serde(skip)]
    pub primal_residuals: Vec<T>,
    /// Per-column negative part of the reduced cost.
    #[serde(skip)]
    pub dual_residuals: Vec<T>,
}

/// Violation of one row: zero when satisfied, otherwise its magnitude.
pub fn row_violation<T: Scalar>(sense: Sense, activity: T, rhs: T) -> T {
    match sense {
        Sense::Eq => (activity - rhs).abs(),
        Sense::Le => (activity - rhs).max(T::zero()),
        Sense::Ge => (rhs - activity).max(T::zero()),
    }
}

/// Report from precomputed products `ax = A x` and `aty = A^T y`.
pub fn evaluate<T: Scalar>(
    objective: &[T],
    rhs: &[T],
    senses: &[Sense],
    x: &[T],
    y: &[T],
    ax: &[T],
    aty: &[T],
) -> SolveReport<T> {
    let primal_residuals: Vec<T> =
        senses.iter().zip(ax.iter().zip(rhs)).map(|(&s, (&a, &b))| row_violation(s, a, b)).collect();
    let dual_residuals: Vec<T> = objective.iter().zip(aty).map(|(&c, &a)| (a - c).max(T::zero())).collect();
    let primal_objective = dot(objective, x);
    let dual_objective = dot(rhs, y);
    SolveReport {
        primal_objective,
        dual_objective,
        duality_gap: primal_objective - dual_objective,
        primal_infeasibility: Norms::of(&primal_residuals),
        dual_infeasibility: Norms::of(&dual_residuals),
        iterations: 0,
        wall_time_s: 0.0,
        primal_residuals,
        dual_residuals,
    }
}

/// `V_p = c.x`, `V_d = b.y` (with `y` in the dual cone of the row senses),
/// their gap, and all infeasibility vectors and norms.
pub fn compute_report<T: Scalar>(x: &[T], y: &[T], lp: &LinearProgram<T>) -> SolveReport<T> {
    assert_eq!(x.len(), lp.n_vars(), "primal length");
    assert_eq!(y.len(), lp.n_rows(), "dual length");
    let ax = lp.matrix.mul_vec(x);
    let aty = lp.matrix.transpose().mul_vec(y);
    evaluate(&lp.objective, &lp.rhs, &lp.senses, x, y, &ax, &aty)
}

/// Scale factors `1 + ||b||_inf` and `1 + ||c||_inf` used to normalize the
/// residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualScale<T> {
    pub rhs: T,
    pub objective: T,
}

impl<T: Scalar> ResidualScale<T> {
    pub fn new(rhs: &[T], objective: &[T]) -> Self {
        Self { rhs: T::one() + norm_inf(rhs), objective: T::one() + norm_inf(objective) }
    }
}

/// Normalized primal residual, dual residual and gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktParts<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
}

impl<T: Scalar> KktParts<T> {
    pub fn of(report: &SolveReport<T>, scale: ResidualScale<T>) -> Self {
        Self {
            primal: report.primal_infeasibility.linf / scale.rhs,
            dual: report.dual_infeasibility.linf / scale.objective,
            gap: report.duality_gap.abs() / (T::one() + report.primal_objective.abs() + report.dual_objective.abs()),
        }
    }

    pub fn error(&self) -> T {
        self.primal.max(self.dual).max(self.gap)
    }
}

pub fn kkt_error<T: Scalar>(report: &SolveReport<T>, scale: ResidualScale<T>) -> T {
    KktParts::of(report, scale).error()
}

/// Termination test: primal residual within `eps_abs + eps_rel (1 + ||b||)`,
/// dual residual within `eps_abs + eps_rel (1 + ||c||)`, and gap within
/// `eps_abs + eps_rel (|c.x| + |b.y|)`.
pub fn converged<T: Scalar>(report: &SolveReport<T>, scale: ResidualScale<T>, eps_abs: T, eps_rel: T) -> bool {
    report.primal_infeasibility.linf <= eps_abs + eps_rel * scale.rhs
        && report.dual_infeasibility.linf <= eps_abs + eps_rel * scale.objective
        && report.duality_gap.abs() <= eps_abs + eps_rel * (report.primal_objective.abs() + report.dual_objective.abs())
}
