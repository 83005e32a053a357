//! Semi-static hedging certificates recovered from LP duals.
//!
//! For a minimization the dual constraint at grid path `x` reads
//! `sum phi_{t,i}(x_{t,i}) + sum h_{t,k}(cell_t(x)) (x_{t+1,k} - x_{t,k}) <= c(x)`,
//! i.e. the portfolio is a pathwise subhedge. Maximizations are stored with
//! flipped signs so the portfolio is a superhedge. In relaxed mode each cell
//! additionally carries the slack `(Delta/2)(y_lb - y_ub)` (sign-adjusted),
//! kept separate from the trading position.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{IndexMap, LinearProgram, Mode, RowTag};
use crate::marginals::MarginalSystem;
use crate::payoff::{CostTensor, Direction};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("row {row} carries no marginal or martingale metadata")]
    MetadataMissing { row: usize },
    #[error("expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeDirection {
    /// Portfolio bounds the payoff from below.
    Sub,
    /// Portfolio bounds the payoff from above.
    Super,
}

impl From<Direction> for HedgeDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Min => HedgeDirection::Sub,
            Direction::Max => HedgeDirection::Super,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate<T> {
    /// `phi[t][i][node]`
    pub phi: Vec<Vec<Vec<T>>>,
    /// `h[t][k][cell]` for every time but the last.
    pub h: Vec<Vec<Vec<T>>>,
    /// Relaxed-mode slack per cell, same layout as `h`; empty in exact mode.
    #[serde(default)]
    pub slack: Vec<Vec<Vec<T>>>,
    pub direction: HedgeDirection,
}

impl<T: Scalar> DualCertificate<T> {
    /// All-zero certificate shaped for `system`.
    pub fn zeros(system: &MarginalSystem<T>, direction: HedgeDirection) -> Self {
        let map = IndexMap::new(system.dims());
        let d = system.n_assets();
        let phi = system.grids().iter().map(|row| row.iter().map(|g| vec![T::zero(); g.len()]).collect()).collect();
        let h = (0..system.n_times().saturating_sub(1))
            .map(|t| vec![vec![T::zero(); map.prefix_count((t + 1) * d)]; d])
            .collect();
        Self { phi, h, slack: Vec::new(), direction }
    }

    pub fn check_shape(&self, system: &MarginalSystem<T>) -> Result<(), CertificateError> {
        let template = Self::zeros(system, self.direction);
        let mismatch = |a: &Vec<Vec<Vec<T>>>, b: &Vec<Vec<Vec<T>>>| {
            a.len() != b.len()
                || a.iter().zip(b).any(|(x, y)| x.len() != y.len() || x.iter().zip(y).any(|(u, v)| u.len() != v.len()))
        };
        let flat = |a: &Vec<Vec<Vec<T>>>| a.iter().flatten().map(Vec::len).sum::<usize>();
        if mismatch(&self.phi, &template.phi) {
            return Err(CertificateError::ShapeMismatch { expected: flat(&template.phi), found: flat(&self.phi) });
        }
        if mismatch(&self.h, &template.h) || (!self.slack.is_empty() && mismatch(&self.slack, &template.h)) {
            return Err(CertificateError::ShapeMismatch { expected: flat(&template.h), found: flat(&self.h) });
        }
        Ok(())
    }

    /// Price of the static part, `sum_{t,i} E_{mu_{t,i}}[phi_{t,i}]`.
    pub fn static_price(&self, system: &MarginalSystem<T>) -> T {
        self.phi
            .iter()
            .zip(system.grids())
            .flat_map(|(p, g)| p.iter().zip(g))
            .map(|(p, g)| p.iter().zip(g.weights()).map(|(&a, &w)| a * w).sum::<T>())
            .sum()
    }
}

/// Maps LP duals onto `(phi, h)`.
pub fn extract_certificate<T: Scalar>(
    y: &[T],
    lp: &LinearProgram<T>,
    system: &MarginalSystem<T>,
) -> Result<DualCertificate<T>, CertificateError> {
    if y.len() != lp.n_rows() {
        return Err(CertificateError::ShapeMismatch { expected: lp.n_rows(), found: y.len() });
    }
    if lp.index_map.dims() != system.dims().as_slice() {
        return Err(CertificateError::ShapeMismatch { expected: system.dims().iter().product(), found: lp.n_vars() });
    }
    let direction = HedgeDirection::from(lp.direction);
    let sign = lp.direction.sign::<T>();
    let mut cert = DualCertificate::zeros(system, direction);
    if lp.mode == Mode::Relaxed {
        cert.slack = cert.h.clone();
    }
    let half = T::lit(0.5);
    for (row, (tag, &v)) in lp.row_meta.iter().zip(y).enumerate() {
        let v = sign * v;
        match *tag {
            RowTag::Marginal { t, i, node } => cert.phi[t][i][node] = v,
            RowTag::MartingaleEq { t, k, cell } => cert.h[t][k][cell] = v,
            RowTag::MartingaleUb { t, k, cell } => {
                cert.h[t][k][cell] = cert.h[t][k][cell] + v;
                cert.slack[t][k][cell] = cert.slack[t][k][cell] - half * lp.delta(t, k) * v;
            }
            RowTag::MartingaleLb { t, k, cell } => {
                cert.h[t][k][cell] = cert.h[t][k][cell] + v;
                cert.slack[t][k][cell] = cert.slack[t][k][cell] + half * lp.delta(t, k) * v;
            }
            RowTag::Other => return Err(CertificateError::MetadataMissing { row }),
        }
    }
    Ok(cert)
}

/// Portfolio payoff along the grid path `idx`, with the relaxed-mode slack
/// added when `with_slack` is set (the full left-hand side of the dual
/// constraint).
fn value_at<T: Scalar>(
    cert: &DualCertificate<T>,
    map: &IndexMap,
    system: &MarginalSystem<T>,
    idx: &[usize],
    with_slack: bool,
) -> T {
    let d = system.n_assets();
    let mut total = T::zero();
    for (t, row) in cert.phi.iter().enumerate() {
        for (i, phi) in row.iter().enumerate() {
            total = total + phi[idx[t * d + i]];
        }
    }
    let flat = idx.iter().zip(map.strides()).map(|(&i, &s)| i * s).sum::<usize>();
    for (t, per_asset) in cert.h.iter().enumerate() {
        let cell = flat / map.block_len((t + 1) * d);
        for (k, h) in per_asset.iter().enumerate() {
            let now = system.grid(t, k).support()[idx[t * d + k]];
            let next = system.grid(t + 1, k).support()[idx[(t + 1) * d + k]];
            total = total + h[cell] * (next - now);
            if with_slack && !cert.slack.is_empty() {
                total = total + cert.slack[t][k][cell];
            }
        }
    }
    total
}

pub fn portfolio_value<T: Scalar>(
    cert: &DualCertificate<T>,
    idx: &[usize],
    system: &MarginalSystem<T>,
) -> Result<T, CertificateError> {
    cert.check_shape(system)?;
    let map = IndexMap::new(system.dims());
    if idx.len() != map.rank() || idx.iter().zip(map.dims()).any(|(&i, &n)| i >= n) {
        return Err(CertificateError::ShapeMismatch { expected: map.rank(), found: idx.len() });
    }
    Ok(value_at(cert, &map, system, idx, false))
}

/// Portfolio value including the relaxed-mode slack.
pub fn portfolio_value_with_slack<T: Scalar>(
    cert: &DualCertificate<T>,
    idx: &[usize],
    system: &MarginalSystem<T>,
) -> Result<T, CertificateError> {
    cert.check_shape(system)?;
    let map = IndexMap::new(system.dims());
    if idx.len() != map.rank() || idx.iter().zip(map.dims()).any(|(&i, &n)| i >= n) {
        return Err(CertificateError::ShapeMismatch { expected: map.rank(), found: idx.len() });
    }
    Ok(value_at(cert, &map, system, idx, true))
}

pub const EXHAUSTIVE_LIMIT: usize = 10_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PathSweep {
    /// Every grid path, falling back to sampling beyond [`EXHAUSTIVE_LIMIT`].
    #[default]
    Exhaustive,
    Sampled {
        count: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubhedgeReport<T> {
    /// Largest amount by which the portfolio crosses the payoff; `<= 0` means
    /// the hedge holds on every checked path.
    pub max_violation: T,
    pub worst_path: Vec<usize>,
    pub paths_checked: usize,
    pub exhaustive: bool,
}

/// Deterministic argmax: larger value wins, ties go to the lower index.
fn better<T: Scalar>(a: (T, usize), b: (T, usize)) -> (T, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) || a.0.is_nan() {
        b
    } else {
        a
    }
}

pub fn verify_subhedge<T: Scalar>(
    cert: &DualCertificate<T>,
    cost: &CostTensor<T>,
    system: &MarginalSystem<T>,
    sweep: PathSweep,
) -> Result<SubhedgeReport<T>, CertificateError> {
    cert.check_shape(system)?;
    let map = IndexMap::new(system.dims());
    if cost.values.len() != map.len() {
        return Err(CertificateError::ShapeMismatch { expected: map.len(), found: cost.values.len() });
    }
    let violation = |j: usize| {
        let idx = map.unflatten(j);
        let pv = value_at(cert, &map, system, &idx, false);
        match cert.direction {
            HedgeDirection::Sub => pv - cost.values[j],
            HedgeDirection::Super => cost.values[j] - pv,
        }
    };
    let init = (T::neg_infinity(), usize::MAX);
    let (paths, exhaustive, (max_violation, worst)) = match sweep {
        PathSweep::Exhaustive if map.len() <= EXHAUSTIVE_LIMIT => {
            let best = (0..map.len()).into_par_iter().map(|j| (violation(j), j)).reduce(|| init, better);
            (map.len(), true, best)
        }
        PathSweep::Exhaustive => sample(map.len(), 1_000_000, 0, &violation, init),
        PathSweep::Sampled { count, seed } => sample(map.len(), count, seed, &violation, init),
    };
    Ok(SubhedgeReport {
        max_violation,
        worst_path: if worst == usize::MAX { Vec::new() } else { map.unflatten(worst) },
        paths_checked: paths,
        exhaustive,
    })
}

fn sample<T: Scalar>(
    n: usize,
    count: usize,
    seed: u64,
    violation: &(impl Fn(usize) -> T + Sync),
    init: (T, usize),
) -> (usize, bool, (T, usize)) {
    let mut rng = StdRng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..count).map(|_| rng.gen_range(0..n)).collect();
    let best = picks.par_iter().map(|&j| (violation(j), j)).reduce(|| init, better);
    (count, false, best)
}

/// Mass on grid paths, flattened like the cost tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan<T> {
    pub weights: Vec<T>,
    pub index_map: IndexMap,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn new(weights: Vec<T>, index_map: IndexMap) -> Result<Self, CertificateError> {
        if weights.len() != index_map.len() {
            return Err(CertificateError::ShapeMismatch { expected: index_map.len(), found: weights.len() });
        }
        Ok(Self { weights, index_map })
    }

    pub fn from_solution(x: &[T], lp: &LinearProgram<T>) -> Result<Self, CertificateError> {
        Self::new(x.to_vec(), lp.index_map.clone())
    }

    /// Expectation of `f` over grid paths.
    pub fn expectation(&self, f: impl Fn(&[usize]) -> T) -> T {
        let mut idx = vec![0; self.index_map.rank()];
        let mut total = T::zero();
        for (j, &w) in self.weights.iter().enumerate() {
            if w != T::zero() {
                self.index_map.unflatten_into(j, &mut idx);
                total = total + w * f(&idx);
            }
        }
        total
    }
}

pub const DEFAULT_MASS_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport<T> {
    pub max_gap: T,
    pub mean_gap: T,
    pub worst_path: Vec<usize>,
    pub support_size: usize,
    pub support_mass: T,
}

/// `|cost - portfolio|` (slack included) on paths carrying at least
/// `mass_floor` of the plan; the maximum and the mass-weighted mean.
pub fn verify_support_equality<T: Scalar>(
    plan: &TransportPlan<T>,
    cert: &DualCertificate<T>,
    cost: &CostTensor<T>,
    system: &MarginalSystem<T>,
    mass_floor: T,
) -> Result<SupportReport<T>, CertificateError> {
    cert.check_shape(system)?;
    let map = IndexMap::new(system.dims());
    if plan.weights.len() != map.len() || cost.values.len() != map.len() {
        return Err(CertificateError::ShapeMismatch { expected: map.len(), found: plan.weights.len() });
    }
    let support: Vec<usize> = (0..map.len()).filter(|&j| plan.weights[j] >= mass_floor).collect();
    let gaps: Vec<T> = support
        .par_iter()
        .map(|&j| {
            let idx = map.unflatten(j);
            (cost.values[j] - value_at(cert, &map, system, &idx, true)).abs()
        })
        .collect();
    let (mut max_gap, mut worst) = (T::zero(), usize::MAX);
    let (mut weighted, mut mass) = (T::zero(), T::zero());
    for (&j, &g) in support.iter().zip(&gaps) {
        if worst == usize::MAX || g > max_gap {
            max_gap = g;
            worst = j;
        }
        weighted = weighted + plan.weights[j] * g;
        mass = mass + plan.weights[j];
    }
    Ok(SupportReport {
        max_gap,
        mean_gap: if mass > T::zero() { weighted / mass } else { T::zero() },
        worst_path: if worst == usize::MAX { Vec::new() } else { map.unflatten(worst) },
        support_size: support.len(),
        support_mass: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{build, DeltaPolicy};
    use crate::marginals::MarginalGrid;
    use crate::payoff::build_cost_tensor;

    fn unique_coupling() -> MarginalSystem<f64> {
        let split = MarginalGrid::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        MarginalSystem::new(vec![1.0, 2.0], vec![vec![MarginalGrid::dirac(0.0)], vec![split]]).unwrap()
    }

    #[test]
    fn zero_duals_give_zero_certificate() {
        let s = unique_coupling();
        let c = build_cost_tensor(&s, |p| (p[1] - p[0]).abs(), Direction::Min).unwrap();
        let lp = build(&s, &c, Mode::Relaxed, &DeltaPolicy::default()).unwrap();
        let cert = extract_certificate(&vec![0.0; lp.n_rows()], &lp, &s).unwrap();
        assert!(cert.phi.iter().flatten().flatten().all(|&v| v == 0.0));
        assert!(cert.h.iter().flatten().flatten().all(|&v| v == 0.0));
        for j in 0..2 {
            assert_eq!(portfolio_value(&cert, &lp.index_map.unflatten(j), &s).unwrap(), 0.0);
        }
        let r = verify_subhedge(&cert, &c, &s, PathSweep::Exhaustive).unwrap();
        assert!(r.max_violation <= 0.0);
        assert_eq!(r.paths_checked, 2);
    }

    #[test]
    fn constant_phi_sums() {
        let s = unique_coupling();
        let mut cert = DualCertificate::zeros(&s, HedgeDirection::Sub);
        cert.phi[0][0][0] = 0.25;
        cert.phi[1][0] = vec![1.0, 1.0];
        assert_eq!(portfolio_value(&cert, &[0, 1], &s).unwrap(), 1.25);
        assert_eq!(cert.static_price(&s), 1.25);
    }

    #[test]
    fn hand_certificate_is_tight_on_unique_coupling() {
        // |x1 - x0| on {0} -> {-1, 1}: phi_1(x) = |x|, h = 0.
        let s = unique_coupling();
        let c = build_cost_tensor(&s, |p| (p[1] - p[0]).abs(), Direction::Min).unwrap();
        let mut cert = DualCertificate::zeros(&s, HedgeDirection::Sub);
        cert.phi[1][0] = vec![1.0, 1.0];
        let r = verify_subhedge(&cert, &c, &s, PathSweep::Exhaustive).unwrap();
        assert_eq!(r.max_violation, 0.0);
        let plan = TransportPlan::new(vec![0.5, 0.5], c.index_map.clone()).unwrap();
        let sup = verify_support_equality(&plan, &cert, &c, &s, 1e-8).unwrap();
        assert_eq!((sup.max_gap, sup.support_size), (0.0, 2));
        cert.phi[1][0][1] += 1.0;
        let r = verify_subhedge(&cert, &c, &s, PathSweep::Exhaustive).unwrap();
        assert_eq!(r.max_violation, 1.0);
        assert_eq!(r.worst_path, vec![0, 1]);
    }

    #[test]
    fn untagged_rows_are_rejected() {
        use crate::lp::Sense;
        use crate::sparse::CsrMatrix;
        let s = unique_coupling();
        let lp =
            LinearProgram::new(vec![1.0, 1.0], CsrMatrix::from_dense(&[vec![1.0, 1.0]]), vec![Sense::Eq], vec![1.0])
                .unwrap();
        assert!(extract_certificate(&[0.0], &lp, &s).is_err());
    }

    #[test]
    fn sampled_sweep_is_seeded() {
        let s = unique_coupling();
        let c = build_cost_tensor(&s, |p| p[1], Direction::Max).unwrap();
        let cert = DualCertificate::zeros(&s, HedgeDirection::Super);
        let a = verify_subhedge(&cert, &c, &s, PathSweep::Sampled { count: 16, seed: 3 }).unwrap();
        let b = verify_subhedge(&cert, &c, &s, PathSweep::Sampled { count: 16, seed: 3 }).unwrap();
        assert_eq!(a, b);
        assert!(!a.exhaustive);
        assert_eq!(a.max_violation, 1.0);
    }
}
