use serde::{Deserialize, Serialize};

use super::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialStep {
    /// `1 / ||A||_2` from a power-iteration estimate.
    #[default]
    PowerIteration,
    /// `1 / max |a_ij|`.
    MaxEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Budget of products with `A` and `A^T` (one pass = one of each).
    pub max_kkt_passes: usize,
    pub ruiz_iters: usize,
    /// Restart when the candidate's KKT error falls below this fraction of
    /// the error at the last restart.
    pub restart_sufficient_decay: f64,
    /// Restart when the error fell below this fraction and stopped improving.
    pub restart_necessary_decay: f64,
    /// Restart when the current restart window spans this fraction of all
    /// iterations so far.
    pub restart_artificial_fraction: f64,
    /// Iterations between restart/termination checks.
    pub check_period: usize,
    pub primal_weight_smoothing: f64,
    pub initial_step_rule: InitialStep,
    pub deterministic_reductions: bool,
    pub presolve: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            max_kkt_passes: 2_000_000,
            ruiz_iters: 10,
            restart_sufficient_decay: 0.2,
            restart_necessary_decay: 0.8,
            restart_artificial_fraction: 0.36,
            check_period: 64,
            primal_weight_smoothing: 0.5,
            initial_step_rule: InitialStep::PowerIteration,
            deterministic_reductions: true,
            presolve: true,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(eps: f64) -> Self {
        Self { eps_abs: eps, eps_rel: eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.eps_abs > 0.0 && self.eps_rel >= 0.0) {
            return bad("eps_abs must be positive and eps_rel nonnegative");
        }
        let b = self.restart_sufficient_decay;
        if !(b > 0.0 && b < 1.0) {
            return bad("restart_sufficient_decay must lie in (0, 1)");
        }
        if !(self.restart_necessary_decay > 0.0 && self.restart_necessary_decay < 1.0) {
            return bad("restart_necessary_decay must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.primal_weight_smoothing) {
            return bad("primal_weight_smoothing must lie in [0, 1]");
        }
        if self.check_period == 0 {
            return bad("check_period must be positive");
        }
        Ok(())
    }
}
