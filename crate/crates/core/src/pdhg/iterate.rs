//! Single PDHG iterations, the adaptive step-size rule, restart decisions and
//! primal weight updates.

use serde::{Deserialize, Serialize};

use crate::lp::Sense;
use crate::scalar::Scalar;

use super::precondition::ScaledProblem;
use super::{Reducer, SolverError};

/// Iterate of the saddle-point problem `min_x max_y c.x - y.A x + b.y` with
/// `x >= 0` and `y` in the dual cone of the row senses (`y <= 0` on `<=`
/// rows, `y >= 0` on `>=` rows, free on equalities).
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// `A x`
    pub ax: Vec<T>,
    /// `A^T y`
    pub aty: Vec<T>,
    pub eta: T,
    pub omega: T,
    pub x_avg: Vec<T>,
    pub y_avg: Vec<T>,
    pub ax_avg: Vec<T>,
    pub aty_avg: Vec<T>,
    /// Iterates folded into the averages since the last restart.
    pub avg_count: usize,
    pub iteration: usize,
    pub restarts: usize,
    pub last_restart_kkt: T,
    /// Point of the last restart, for primal weight updates.
    pub x_restart: Vec<T>,
    pub y_restart: Vec<T>,
}

impl<T: Scalar> SaddleState<T> {
    pub fn zeros(n: usize, m: usize, eta: T, omega: T) -> Self {
        Self {
            x: vec![T::zero(); n],
            y: vec![T::zero(); m],
            ax: vec![T::zero(); m],
            aty: vec![T::zero(); n],
            eta,
            omega,
            x_avg: vec![T::zero(); n],
            y_avg: vec![T::zero(); m],
            ax_avg: vec![T::zero(); m],
            aty_avg: vec![T::zero(); n],
            avg_count: 0,
            iteration: 0,
            restarts: 0,
            last_restart_kkt: T::infinity(),
            x_restart: vec![T::zero(); n],
            y_restart: vec![T::zero(); m],
        }
    }

    /// Projection invariants: `x >= 0` and `y` in the dual cone.
    pub fn is_projected(&self, senses: &[Sense]) -> bool {
        self.x.iter().all(|&v| v >= T::zero())
            && self.y.iter().zip(senses).all(|(&v, s)| match s {
                Sense::Eq => true,
                Sense::Le => v <= T::zero(),
                Sense::Ge => v >= T::zero(),
            })
    }
}

pub(crate) fn project_dual<T: Scalar>(sense: Sense, v: T) -> T {
    match sense {
        Sense::Eq => v,
        Sense::Le => v.min(T::zero()),
        Sense::Ge => v.max(T::zero()),
    }
}

/// Candidate produced by one extrapolated primal-dual update.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub ax: Vec<T>,
    pub aty: Vec<T>,
}

/// `x+ = proj_X(x - tau (c - A^T y))`,
/// `y+ = proj_Y(y + sigma (b - A (2 x+ - x)))`.
pub fn pdhg_step<T: Scalar>(
    problem: &ScaledProblem<T>,
    state: &SaddleState<T>,
    tau: T,
    sigma: T,
) -> Result<Trial<T>, SolverError> {
    let x: Vec<T> = state
        .x
        .iter()
        .zip(&problem.objective)
        .zip(&state.aty)
        .map(|((&x, &c), &aty)| (x - tau * (c - aty)).max(T::zero()))
        .collect();
    let ax = problem.matrix.mul_vec(&x);
    let two = T::lit(2.0);
    let y: Vec<T> = state
        .y
        .iter()
        .zip(&problem.rhs)
        .zip(ax.iter().zip(&state.ax))
        .zip(&problem.senses)
        .map(|(((&y, &b), (&ax_new, &ax_old)), &s)| project_dual(s, y + sigma * (b - (two * ax_new - ax_old))))
        .collect();
    let aty = problem.transpose.mul_vec(&y);
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite { iteration: state.iteration });
    }
    Ok(Trial { x, y, ax, aty })
}

/// Largest step `eta` for which the trial is acceptable:
/// `||dz||_omega^2 / (2 |dy . A dx|)` with `||dz||_omega^2 = omega ||dx||^2 + ||dy||^2 / omega`.
/// Infinite when the interaction term vanishes.
pub fn step_bound<T: Scalar>(state: &SaddleState<T>, trial: &Trial<T>, omega: T, reducer: Reducer) -> T {
    let dx2 = reducer.sum(state.x.len(), |j| {
        let d = trial.x[j] - state.x[j];
        d * d
    });
    let dy2 = reducer.sum(state.y.len(), |r| {
        let d = trial.y[r] - state.y[r];
        d * d
    });
    let interaction = reducer.sum(state.y.len(), |r| (trial.y[r] - state.y[r]) * (trial.ax[r] - state.ax[r])).abs();
    let movement = omega * dx2 + dy2 / omega;
    if interaction > T::zero() {
        movement / (T::lit(2.0) * interaction)
    } else {
        T::infinity()
    }
}

/// Next trial step after an attempt at iteration `k`:
/// `min(bound (1 - (k+1)^-0.3), eta (1 + (k+1)^-0.6))`.
pub fn next_step<T: Scalar>(eta: T, bound: T, k: usize) -> T {
    let k1 = T::from_usize_lossy(k + 1);
    let shrink = bound * (T::one() - k1.powf(T::lit(-0.3)));
    let grow = eta * (T::one() + k1.powf(T::lit(-0.6)));
    shrink.min(grow)
}

pub fn accepts<T: Scalar>(eta: T, bound: T) -> bool {
    eta <= bound
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartReason {
    SufficientDecay,
    NecessaryDecayNoProgress,
    Artificial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartTarget {
    Average,
    Current,
}

/// Inputs of one restart check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartInputs<T> {
    /// KKT error at the running average.
    pub kkt_average: T,
    /// KKT error at the current iterate.
    pub kkt_current: T,
    /// KKT error at the last restart point.
    pub kkt_last_restart: T,
    /// Candidate error at the previous check of this restart window.
    pub kkt_previous_candidate: T,
    pub iterations_since_restart: usize,
    pub total_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestartParams {
    pub sufficient: f64,
    pub necessary: f64,
    pub artificial_fraction: f64,
}

/// Picks the better of the average and the current iterate and decides
/// whether to restart there. Artificial restarts never move to a point whose
/// error exceeds the last restart's, so restart errors are non-increasing.
pub fn restart_decision<T: Scalar>(
    inputs: &RestartInputs<T>,
    params: RestartParams,
) -> (RestartTarget, T, Option<RestartReason>) {
    let (target, cand) = if inputs.kkt_average < inputs.kkt_current {
        (RestartTarget::Average, inputs.kkt_average)
    } else {
        (RestartTarget::Current, inputs.kkt_current)
    };
    if inputs.iterations_since_restart == 0 {
        return (target, cand, None);
    }
    let last = inputs.kkt_last_restart;
    let reason = if cand <= T::lit(params.sufficient) * last {
        Some(RestartReason::SufficientDecay)
    } else if cand <= T::lit(params.necessary) * last && cand > inputs.kkt_previous_candidate {
        Some(RestartReason::NecessaryDecayNoProgress)
    } else if T::from_usize_lossy(inputs.iterations_since_restart)
        >= T::lit(params.artificial_fraction) * T::from_usize_lossy(inputs.total_iterations)
        && cand <= last
    {
        Some(RestartReason::Artificial)
    } else {
        None
    };
    (target, cand, reason)
}

/// Smoothed primal weight: `log w' = theta log(dy/dx) + (1 - theta) log w`,
/// unchanged when either movement is negligible, clamped to `[1e-10, 1e10]`.
pub fn primal_weight_update<T: Scalar>(omega: T, dx: T, dy: T, theta: T) -> T {
    let floor = T::lit(1e-30);
    if dx <= floor || dy <= floor {
        return omega;
    }
    let log_w = theta * (dy / dx).ln() + (T::one() - theta) * omega.ln();
    log_w.exp().max(T::lit(1e-10)).min(T::lit(1e10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdhg::precondition::scale_parts;
    use crate::sparse::CsrMatrix;

    fn scalar_problem() -> ScaledProblem<f64> {
        // min x s.t. x = 1, unscaled
        scale_parts(&CsrMatrix::from_dense(&[vec![1.0]]), &[1.0], &[1.0], &[Sense::Eq], 0)
    }

    #[test]
    fn hand_iteration_from_origin() {
        let p = scalar_problem();
        let s = SaddleState::zeros(1, 1, 0.5, 1.0);
        let t = pdhg_step(&p, &s, 0.5, 0.5).unwrap();
        assert_eq!(t.x, vec![0.0]);
        assert_eq!(t.y, vec![0.5]);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let p = scalar_problem();
        let mut s = SaddleState::zeros(1, 1, 0.5, 1.0);
        s.x = vec![1.0];
        s.y = vec![1.0];
        s.ax = vec![1.0];
        s.aty = vec![1.0];
        let t = pdhg_step(&p, &s, 0.5, 0.5).unwrap();
        assert_eq!((t.x[0], t.y[0]), (1.0, 1.0));
    }

    #[test]
    fn dual_cone_projection() {
        assert_eq!(project_dual(Sense::Le, 2.0), 0.0);
        assert_eq!(project_dual(Sense::Le, -2.0), -2.0);
        assert_eq!(project_dual(Sense::Ge, -2.0), 0.0);
        assert_eq!(project_dual(Sense::Eq, -2.0), -2.0);
    }

    #[test]
    fn zero_matrix_accepts_any_step() {
        let s = SaddleState::zeros(1, 1, 1.0, 1.0);
        let t = Trial { x: vec![1.0], y: vec![1.0], ax: vec![0.0], aty: vec![0.0] };
        let b: f64 = step_bound(&s, &t, 1.0, Reducer::Serial);
        assert!(b.is_infinite());
        assert!(accepts(1e30, b));
    }

    #[test]
    fn scalar_step_bound() {
        // A = [1], dx = dy = 1, omega = 1: bound = (1 + 1) / (2 * 1) = 1
        let s = SaddleState::zeros(1, 1, 1.0, 1.0);
        let t = Trial { x: vec![1.0], y: vec![1.0], ax: vec![1.0], aty: vec![1.0] };
        let b: f64 = step_bound(&s, &t, 1.0, Reducer::Serial);
        assert_eq!(b, 1.0);
        assert!(accepts(0.5, b));
        assert!(!accepts(2.0, b));
    }

    #[test]
    fn next_step_formula() {
        let k1: f64 = 5.0;
        let expect = (2.0 * (1.0 - k1.powf(-0.3))).min(1.0 * (1.0 + k1.powf(-0.6)));
        assert_eq!(next_step(1.0, 2.0, 4), expect);
        assert_eq!(next_step(1.0, f64::INFINITY, 0), 2.0);
    }

    const PARAMS: RestartParams = RestartParams { sufficient: 0.2, necessary: 0.8, artificial_fraction: 0.36 };

    fn inputs(avg: f64, cur: f64, last: f64, prev: f64, since: usize, total: usize) -> RestartInputs<f64> {
        RestartInputs {
            kkt_average: avg,
            kkt_current: cur,
            kkt_last_restart: last,
            kkt_previous_candidate: prev,
            iterations_since_restart: since,
            total_iterations: total,
        }
    }

    #[test]
    fn no_restart_without_decay() {
        let (_, _, r) = restart_decision(&inputs(1.0, 1.0, 1.0, 1.0, 1, 1000), PARAMS);
        assert_eq!(r, None);
    }

    #[test]
    fn sufficient_decay_restarts_to_average() {
        let (t, c, r) = restart_decision(&inputs(0.1, 0.5, 1.0, 1.0, 10, 1000), PARAMS);
        assert_eq!(t, RestartTarget::Average);
        assert_eq!(c, 0.1);
        assert_eq!(r, Some(RestartReason::SufficientDecay));
    }

    #[test]
    fn necessary_decay_needs_lost_progress() {
        let (_, _, r) = restart_decision(&inputs(0.7, 0.9, 1.0, 0.6, 10, 1000), PARAMS);
        assert_eq!(r, Some(RestartReason::NecessaryDecayNoProgress));
        let (_, _, r) = restart_decision(&inputs(0.7, 0.9, 1.0, 0.75, 10, 1000), PARAMS);
        assert_eq!(r, None);
    }

    #[test]
    fn stalled_window_triggers_artificial_restart() {
        // A stall keeps the candidate at the last restart error; the window
        // reaches 36% of all iterations after 360 of 1000.
        let fire = (1..=1000)
            .step_by(8)
            .find(|&since| {
                restart_decision(&inputs(1.0, 1.0, 1.0, 1.0, since, 1000), PARAMS).2 == Some(RestartReason::Artificial)
            })
            .unwrap();
        assert!((360..=368).contains(&fire), "{fire}");
    }

    #[test]
    fn primal_weight_examples() {
        assert_eq!(primal_weight_update(1.0, 2.0, 2.0, 0.5), 1.0);
        assert!((primal_weight_update::<f64>(1.0, 1.0, 4.0, 1.0) - 4.0).abs() < 1e-12);
        assert_eq!(primal_weight_update(3.0, 0.0, 4.0, 0.5), 3.0);
        assert_eq!(primal_weight_update(1.0, 1.0, 1e30, 1.0), 1e10);
    }
}
