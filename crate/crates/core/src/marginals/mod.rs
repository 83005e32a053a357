//! Discrete marginal distributions: construction, validation, convex order
//! and irreducibility analysis, and call-price extraction.

mod breeden;
mod grid;
mod order;
pub mod synthetic;
mod system;

use thiserror::Error;

pub use breeden::{breeden_litzenberger, breeden_litzenberger_with_report, call_prices, Extraction};
pub use grid::{potential, MarginalGrid};
pub use order::{
    check_convex_order, check_convex_order_with, irreducible_domain, irreducible_domain_with, Interval, OpenInterval,
    OrderTolerance, PairReport, Witness,
};
pub use system::{validate_system, validate_system_with, MarginalSystem, SystemValidation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginalError {
    #[error("marginal grid has no support points")]
    EmptyGrid,
    #[error("support has {support} points but {weights} weights were given")]
    LengthMismatch { support: usize, weights: usize },
    #[error("support is not strictly increasing at position {index}")]
    SupportNotIncreasing { index: usize },
    #[error("negative weight at position {index}")]
    NegativeWeight { index: usize },
    #[error("weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("non-finite support point or weight")]
    NonFinite,
    #[error("marginal pair is not in convex order")]
    NotInConvexOrder,
    #[error("call prices violate convexity or monotonicity at strike {index} by {violation:e}")]
    NonConvexPrices { index: usize, violation: f64 },
    #[error("at least 3 strikes required, got {strikes}")]
    DegenerateGrid { strikes: usize },
    #[error("call prices imply zero total interior mass")]
    ZeroMass,
    #[error("marginal system is empty")]
    EmptySystem,
    #[error("expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("observation times not strictly increasing at position {index}")]
    TimesNotIncreasing { index: usize },
}
