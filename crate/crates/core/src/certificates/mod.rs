pub mod hedge;
pub mod metrics;

pub use hedge::{
    extract_certificate, portfolio_value, portfolio_value_with_slack, verify_subhedge, verify_support_equality,
    CertificateError, DualCertificate, HedgeDirection, PathSweep, SubhedgeReport, SupportReport, TransportPlan,
    DEFAULT_MASS_FLOOR, EXHAUSTIVE_LIMIT,
};
pub use metrics::{compute_report, kkt_error, Norms, SolveReport};
