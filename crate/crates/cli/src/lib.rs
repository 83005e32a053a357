//! Pipeline behind the `vmot` command: validate marginals, assemble the LP,
//! solve the lower and upper bound problems, and verify the hedging
//! certificates, writing every intermediate artifact to an output directory.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Overrides, RunConfig};
pub use pipeline::{
    build_stage, run_bounds, solve_stage, validate_stage, verify_stage, BoundsResult, BoundsSummary, DirectionOutcome,
    Verification,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("marginals are not in convex order: {0}")]
    InfeasibleMarginals(String),
    #[error("{direction} solve stopped before convergence after {kkt_passes} passes (KKT error {kkt_error:e})")]
    NotConverged { direction: &'static str, kkt_passes: usize, kkt_error: f64 },
    #[error("{direction} certificate failed verification: {detail}")]
    Verification { direction: &'static str, detail: String },
    #[error("missing artifact {}", path.display())]
    MissingArtifact { path: PathBuf },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl RunError {
    /// Process exit code: 2 validation, 3 non-convergence, 4 verification,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::InfeasibleMarginals(_) => 2,
            RunError::NotConverged { .. } => 3,
            RunError::Verification { .. } => 4,
            RunError::MissingArtifact { .. } | RunError::Other(_) => 1,
        }
    }
}
