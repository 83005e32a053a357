//! Restarted primal-dual hybrid gradient solver for sparse LPs.
//!
//! The loop runs presolve, Ruiz equilibration, then extrapolated
//! primal-dual steps with an adaptive step size. Every `check_period`
//! iterations it evaluates the KKT error at the current iterate and at the
//! running average, stops if either satisfies the tolerances, and otherwise
//! decides whether to restart from the better of the two (updating the
//! primal weight on restart).

mod config;
mod iterate;
mod precondition;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{InitialStep, SolverConfig};
pub use iterate::{
    accepts, next_step, pdhg_step, primal_weight_update, restart_decision, step_bound, RestartInputs, RestartParams,
    RestartReason, RestartTarget, SaddleState, Trial,
};
pub use precondition::{precondition, presolve, ruiz, Presolve, ScaledProblem};

use crate::certificates::metrics::{self, converged, KktParts, ResidualScale, SolveReport};
use crate::lp::LinearProgram;
use crate::scalar::{norm2, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("iterates became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("step size underflow ({eta:e}) at iteration {iteration}")]
    StepUnderflow { iteration: usize, eta: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("row {row} has no variables and an unsatisfiable right-hand side")]
    Infeasible { row: usize },
    #[error("column {column} appears in no constraint and has negative cost")]
    Unbounded { column: usize },
}

/// Reduction strategy for dot products and norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reducer {
    /// Fixed left-to-right order; bit-reproducible.
    Serial,
    Parallel,
}

const PARALLEL_LEN: usize = 1 << 15;

impl Reducer {
    pub fn sum<T: Scalar>(self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> T {
        match self {
            Reducer::Parallel if n >= PARALLEL_LEN => (0..n).into_par_iter().map(f).reduce(T::zero, |a, b| a + b),
            _ => (0..n).fold(T::zero(), |acc, i| acc + f(i)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    KktPassLimit,
}

/// One line of the restart log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord<T> {
    pub iteration: usize,
    pub kkt_passes: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub gap: T,
    pub kkt_error: T,
    pub eta: T,
    pub omega: T,
    pub reason: RestartReason,
    pub target: RestartTarget,
}

impl<T: Scalar> RestartRecord<T> {
    /// `key=value` log line.
    pub fn log_line(&self) -> String {
        format!(
            "restart iter={} kkt_passes={} primal_res={:e} dual_res={:e} gap={:e} kkt={:e} eta={:e} omega={:e} reason={} target={}",
            self.iteration,
            self.kkt_passes,
            self.primal_residual,
            self.dual_residual,
            self.gap,
            self.kkt_error,
            self.eta,
            self.omega,
            match self.reason {
                RestartReason::SufficientDecay => "sufficient",
                RestartReason::NecessaryDecayNoProgress => "necessary",
                RestartReason::Artificial => "artificial",
            },
            match self.target {
                RestartTarget::Average => "average",
                RestartTarget::Current => "current",
            }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// `c - A^T y`
    pub reduced_costs: Vec<T>,
    pub report: SolveReport<T>,
    pub termination: Termination,
    pub kkt_passes: usize,
    pub restarts: Vec<RestartRecord<T>>,
}

impl<T: Scalar> Solution<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Optimal
    }
}

/// Outcome of one accepted adaptive step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptedStep<T> {
    pub eta: T,
    pub bound: T,
    pub attempts: usize,
}

/// Stateful solver; [`solve`] drives it to completion, tests may step it.
pub struct PdhgSolver<'a, T> {
    lp: &'a LinearProgram<T>,
    config: SolverConfig,
    presolved: Presolve<T>,
    problem: ScaledProblem<T>,
    state: SaddleState<T>,
    scale: ResidualScale<T>,
    reducer: Reducer,
    kkt_passes: usize,
    restarts: Vec<RestartRecord<T>>,
    previous_candidate: T,
    started: Instant,
}

impl<'a, T: Scalar> PdhgSolver<'a, T> {
    pub fn new(lp: &'a LinearProgram<T>, config: SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let presolved = if config.presolve { presolve(lp)? } else { Presolve::identity(lp) };
        let problem = precondition::scale_parts(
            &presolved.matrix,
            &presolved.objective,
            &presolved.rhs,
            &presolved.senses,
            config.ruiz_iters,
        );
        let reducer = if config.deterministic_reductions { Reducer::Serial } else { Reducer::Parallel };
        let eta = initial_step(&problem, config.initial_step_rule);
        let (cn, bn) = (norm2(&problem.objective), norm2(&problem.rhs));
        let omega = if cn > T::zero() && bn > T::zero() { cn / bn } else { T::one() };
        let mut state = SaddleState::zeros(problem.matrix.n_cols(), problem.matrix.n_rows(), eta, omega);
        let scale = ResidualScale::new(&presolved.rhs, &presolved.objective);
        let mut solver = Self {
            lp,
            config,
            presolved,
            problem,
            state: state.clone(),
            scale,
            reducer,
            kkt_passes: 0,
            restarts: Vec::new(),
            previous_candidate: T::infinity(),
            started: Instant::now(),
        };
        state.last_restart_kkt = solver.kkt(&state.x, &state.y, &state.ax, &state.aty).1.error();
        solver.state = state;
        Ok(solver)
    }

    pub fn state(&self) -> &SaddleState<T> {
        &self.state
    }

    pub fn problem(&self) -> &ScaledProblem<T> {
        &self.problem
    }

    pub fn kkt_passes(&self) -> usize {
        self.kkt_passes
    }

    pub fn restarts(&self) -> &[RestartRecord<T>] {
        &self.restarts
    }

    /// Report and normalized KKT parts of a scaled point, in unscaled units.
    fn kkt(&self, x: &[T], y: &[T], ax: &[T], aty: &[T]) -> (SolveReport<T>, KktParts<T>) {
        let p = &self.problem;
        let x0: Vec<T> = x.iter().zip(&p.col_scale).map(|(&v, &s)| v * s).collect();
        let y0: Vec<T> = y.iter().zip(&p.row_scale).map(|(&v, &s)| v * s).collect();
        let ax0: Vec<T> = ax.iter().zip(&p.row_scale).map(|(&v, &s)| v / s).collect();
        let aty0: Vec<T> = aty.iter().zip(&p.col_scale).map(|(&v, &s)| v / s).collect();
        let report = metrics::evaluate(
            &self.presolved.objective,
            &self.presolved.rhs,
            &self.presolved.senses,
            &x0,
            &y0,
            &ax0,
            &aty0,
        );
        let parts = KktParts::of(&report, self.scale);
        (report, parts)
    }

    /// One adaptive step: retries with smaller steps until the step
    /// condition holds, then folds the accepted iterate into the averages.
    pub fn step(&mut self) -> Result<AcceptedStep<T>, SolverError> {
        let mut attempts = 0;
        loop {
            let eta = self.state.eta;
            let omega = self.state.omega;
            let trial = pdhg_step(&self.problem, &self.state, eta / omega, eta * omega)?;
            self.kkt_passes += 1;
            attempts += 1;
            let bound = step_bound(&self.state, &trial, omega, self.reducer);
            // 1-based count of the iteration being attempted.
            let next = next_step(eta, bound, self.state.iteration + 1);
            if accepts(eta, bound) {
                self.accept(trial);
                self.state.eta = next;
                return Ok(AcceptedStep { eta, bound, attempts });
            }
            // Also catches NaN.
            if next.is_nan() || next < T::lit(1e-30) {
                return Err(SolverError::StepUnderflow {
                    iteration: self.state.iteration,
                    eta: next.to_f64().unwrap_or(0.0),
                });
            }
            self.state.eta = next;
        }
    }

    fn accept(&mut self, trial: Trial<T>) {
        let s = &mut self.state;
        s.x = trial.x;
        s.y = trial.y;
        s.ax = trial.ax;
        s.aty = trial.aty;
        s.iteration += 1;
        s.avg_count += 1;
        let w = T::one() / T::from_usize_lossy(s.avg_count);
        let fold = |avg: &mut Vec<T>, new: &[T]| {
            avg.iter_mut().zip(new).for_each(|(a, &v)| *a = *a + w * (v - *a));
        };
        fold(&mut s.x_avg, &s.x);
        fold(&mut s.y_avg, &s.y);
        fold(&mut s.ax_avg, &s.ax);
        fold(&mut s.aty_avg, &s.aty);
    }

    /// Termination and restart check. Returns `true` when the current
    /// iterate (possibly just replaced by the average) meets the tolerances.
    pub fn check(&mut self) -> bool {
        let s = &self.state;
        let (rep_cur, kkt_cur) = self.kkt(&s.x, &s.y, &s.ax, &s.aty);
        let (rep_avg, kkt_avg) = if s.avg_count > 0 {
            self.kkt(&s.x_avg, &s.y_avg, &s.ax_avg, &s.aty_avg)
        } else {
            (rep_cur.clone(), kkt_cur)
        };
        let (eps_abs, eps_rel) = (T::lit(self.config.eps_abs), T::lit(self.config.eps_rel));
        if converged(&rep_avg, self.scale, eps_abs, eps_rel) && s.avg_count > 0 {
            self.move_to_average();
            return true;
        }
        if converged(&rep_cur, self.scale, eps_abs, eps_rel) {
            return true;
        }
        let inputs = RestartInputs {
            kkt_average: kkt_avg.error(),
            kkt_current: kkt_cur.error(),
            kkt_last_restart: s.last_restart_kkt,
            kkt_previous_candidate: self.previous_candidate,
            iterations_since_restart: s.avg_count,
            total_iterations: s.iteration,
        };
        let params = RestartParams {
            sufficient: self.config.restart_sufficient_decay,
            necessary: self.config.restart_necessary_decay,
            artificial_fraction: self.config.restart_artificial_fraction,
        };
        let (target, candidate, reason) = restart_decision(&inputs, params);
        self.previous_candidate = candidate;
        if let Some(reason) = reason {
            let (parts, report) = match target {
                RestartTarget::Average => (kkt_avg, rep_avg),
                RestartTarget::Current => (kkt_cur, rep_cur),
            };
            if target == RestartTarget::Average {
                self.move_to_average();
            }
            self.restart(candidate, parts, &report, reason, target);
        }
        false
    }

    fn move_to_average(&mut self) {
        let s = &mut self.state;
        s.x.clone_from(&s.x_avg);
        s.y.clone_from(&s.y_avg);
        s.ax.clone_from(&s.ax_avg);
        s.aty.clone_from(&s.aty_avg);
    }

    fn restart(
        &mut self,
        kkt_error: T,
        parts: KktParts<T>,
        report: &SolveReport<T>,
        reason: RestartReason,
        target: RestartTarget,
    ) {
        let reducer = self.reducer;
        let s = &mut self.state;
        let dx = reducer
            .sum(s.x.len(), |j| {
                let d = s.x[j] - s.x_restart[j];
                d * d
            })
            .sqrt();
        let dy = reducer
            .sum(s.y.len(), |r| {
                let d = s.y[r] - s.y_restart[r];
                d * d
            })
            .sqrt();
        s.omega = primal_weight_update(s.omega, dx, dy, T::lit(self.config.primal_weight_smoothing));
        s.x_restart.clone_from(&s.x);
        s.y_restart.clone_from(&s.y);
        s.x_avg.clone_from(&s.x);
        s.y_avg.clone_from(&s.y);
        s.ax_avg.clone_from(&s.ax);
        s.aty_avg.clone_from(&s.aty);
        s.avg_count = 0;
        s.restarts += 1;
        s.last_restart_kkt = kkt_error;
        self.previous_candidate = T::infinity();
        let record = RestartRecord {
            iteration: s.iteration,
            kkt_passes: self.kkt_passes,
            primal_residual: report.primal_infeasibility.linf,
            dual_residual: report.dual_infeasibility.linf,
            gap: report.duality_gap,
            kkt_error,
            eta: s.eta,
            omega: s.omega,
            reason,
            target,
        };
        debug_assert!(parts.error() == kkt_error);
        log::info!("{}", record.log_line());
        self.restarts.push(record);
    }

    /// Runs until convergence or until the pass budget is spent.
    pub fn run(mut self) -> Result<Solution<T>, SolverError> {
        let period = self.config.check_period;
        let termination = loop {
            if self.check() {
                break Termination::Optimal;
            }
            if self.kkt_passes >= self.config.max_kkt_passes {
                break Termination::KktPassLimit;
            }
            for _ in 0..period {
                self.step()?;
                if self.kkt_passes >= self.config.max_kkt_passes {
                    break;
                }
            }
        };
        if termination == Termination::KktPassLimit {
            // Return whichever of the current and averaged iterate is better.
            let s = &self.state;
            if s.avg_count > 0
                && self.kkt(&s.x_avg, &s.y_avg, &s.ax_avg, &s.aty_avg).1.error()
                    < self.kkt(&s.x, &s.y, &s.ax, &s.aty).1.error()
            {
                self.move_to_average();
            }
        }
        Ok(self.finish(termination))
    }

    fn finish(self, termination: Termination) -> Solution<T> {
        let p = &self.problem;
        let x: Vec<T> = self.state.x.iter().zip(&p.col_scale).map(|(&v, &s)| v * s).collect();
        let y: Vec<T> = self.state.y.iter().zip(&p.row_scale).map(|(&v, &s)| v * s).collect();
        let (x, y) = self.presolved.postsolve(self.lp, &x, &y);
        let mut report = metrics::compute_report(&x, &y, self.lp);
        report.iterations = self.state.iteration;
        report.wall_time_s = self.started.elapsed().as_secs_f64();
        let aty = self.lp.matrix.transpose().mul_vec(&y);
        let reduced_costs = self.lp.objective.iter().zip(&aty).map(|(&c, &a)| c - a).collect();
        Solution { x, y, reduced_costs, report, termination, kkt_passes: self.kkt_passes, restarts: self.restarts }
    }
}

fn initial_step<T: Scalar>(problem: &ScaledProblem<T>, rule: InitialStep) -> T {
    let a = &problem.matrix;
    let norm = match rule {
        InitialStep::MaxEntry => a.values().iter().fold(T::zero(), |m, v| m.max(v.abs())),
        InitialStep::PowerIteration => {
            let mut v = vec![T::one(); a.n_cols()];
            let mut sigma = T::zero();
            for _ in 0..20 {
                let nv = norm2(&v);
                if nv == T::zero() {
                    break;
                }
                v.iter_mut().for_each(|x| *x = *x / nv);
                let av = a.mul_vec(&v);
                sigma = norm2(&av);
                v = problem.transpose.mul_vec(&av);
            }
            sigma
        }
    };
    if norm > T::zero() {
        T::one() / norm
    } else {
        T::one()
    }
}

/// Solves `lp` with the restarted PDHG method.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, config: &SolverConfig) -> Result<Solution<T>, SolverError> {
    PdhgSolver::new(lp, config.clone())?.run()
}
