//! Model-free price bounds for multi-asset, path-dependent payoffs.
//!
//! The discrete multimarginal martingale optimal transport problem is
//! assembled as a sparse LP ([`lp`]), solved with a restarted primal-dual
//! hybrid gradient method ([`pdhg`]), and its duals are turned into
//! semi-static hedging certificates that are checked path by path
//! ([`certificates`]). A dense two-phase simplex ([`oracle`]) serves as an
//! independent reference on small instances.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod certificates;
pub mod lp;
pub mod marginals;
pub mod oracle;
pub mod payoff;
pub mod pdhg;
pub mod scalar;
pub mod sparse;

pub use scalar::Scalar;

pub type MarginalGrid = marginals::MarginalGrid<f64>;
pub type MarginalSystem = marginals::MarginalSystem<f64>;
pub type PairReport = marginals::PairReport<f64>;
pub type AutocallSpec = payoff::AutocallSpec<f64>;
pub type CostTensor = payoff::CostTensor<f64>;
pub type LinearProgram = lp::LinearProgram<f64>;
pub type Solution = pdhg::Solution<f64>;
pub type SolveReport = certificates::SolveReport<f64>;
pub type DualCertificate = certificates::DualCertificate<f64>;
pub type TransportPlan = certificates::TransportPlan<f64>;
pub type DenseLp = oracle::DenseLp<f64>;
