//! Synthetic marginal systems that are in convex order by construction.
//!
//! Every later marginal is the image of the earlier one under an explicit
//! mean-preserving kernel, so convex order holds exactly up to rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MarginalError, MarginalGrid, MarginalSystem};
use crate::scalar::Scalar;

/// Splits every atom `x` into `x - a` and `x + b` with weights making the
/// split mean-preserving. `a` and `b` are drawn uniformly from `spread`.
pub fn mean_preserving_split<T: Scalar, R: Rng + ?Sized>(
    grid: &MarginalGrid<T>,
    spread: (f64, f64),
    rng: &mut R,
) -> MarginalGrid<T> {
    let mut atoms = Vec::with_capacity(2 * grid.len());
    for (x, w) in grid.atoms() {
        let a = T::lit(rng.gen_range(spread.0..spread.1));
        let b = T::lit(rng.gen_range(spread.0..spread.1));
        atoms.push((x - a, w * b / (a + b)));
        atoms.push((x + b, w * a / (a + b)));
    }
    MarginalGrid::from_atoms(atoms).expect("split of a valid grid is valid")
}

/// Random system of `n_times` marginals per asset: the first marginal has
/// `first_len` random atoms, each later one splits every atom of the previous.
pub fn random_split_system<T: Scalar, R: Rng + ?Sized>(
    n_assets: usize,
    n_times: usize,
    first_len: usize,
    rng: &mut R,
) -> MarginalSystem<T> {
    let mut grids: Vec<Vec<MarginalGrid<T>>> = vec![Vec::with_capacity(n_assets); n_times];
    for _ in 0..n_assets {
        let atoms: Vec<(T, T)> =
            (0..first_len).map(|_| (T::lit(rng.gen_range(0.7..1.3)), T::lit(rng.gen_range(0.2..1.0)))).collect();
        let mut g = MarginalGrid::from_atoms(atoms).expect("random atoms are valid");
        grids[0].push(g.clone());
        for row in grids.iter_mut().skip(1) {
            g = mean_preserving_split(&g, (0.05, 0.3), rng);
            row.push(g.clone());
        }
    }
    let times = (1..=n_times).map(T::from_usize_lossy).collect();
    MarginalSystem::new(times, grids).expect("consistent shapes")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Nodes equally spaced in log-price.
    #[default]
    UniformLog,
    /// Nodes equally spaced in price.
    UniformPrice,
}

/// Lognormal-flavoured system: the first marginal discretizes a lognormal law
/// with unit mean, later ones push it forward with a mean-preserving kernel
/// whose spread follows each asset's volatility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalConfig {
    pub times: Vec<f64>,
    /// One annualized volatility per asset.
    pub vols: Vec<f64>,
    /// Support points per marginal.
    #[serde(default = "default_points")]
    pub n: usize,
    /// Grid half-width in standard deviations of log-price.
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub placement: Placement,
}

fn default_points() -> usize {
    10
}

fn default_width() -> f64 {
    2.5
}

impl LognormalConfig {
    pub fn new(times: Vec<f64>, vols: Vec<f64>, n: usize) -> Self {
        Self { times, vols, n, width: default_width(), placement: Placement::default() }
    }
}

fn nodes(total_vol: f64, n: usize, width: f64, placement: Placement) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let drift = -0.5 * total_vol * total_vol;
    let (lo, hi) = (drift - width * total_vol, drift + width * total_vol);
    let step = |k: usize| k as f64 / (n - 1) as f64;
    match placement {
        Placement::UniformLog => (0..n).map(|k| (lo + (hi - lo) * step(k)).exp()).collect(),
        Placement::UniformPrice => {
            let (a, b) = (lo.exp(), hi.exp());
            (0..n).map(|k| a + (b - a) * step(k)).collect()
        }
    }
}

/// Pushes `mu` onto `target` nodes: each atom `x` sends half its mass to
/// `x - a` and half to `x + a`, each linearly interpolated between the
/// bracketing target nodes. Requires `target` to cover `mu`'s support.
fn push_forward(mu: &[(f64, f64)], target: &[f64], spread: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut w = vec![0.0; target.len()];
    let (lo, hi) = (target[0], target[target.len() - 1]);
    let mut deposit = |y: f64, mass: f64| {
        let k = target.partition_point(|&g| g <= y).clamp(1, target.len() - 1);
        let (g0, g1) = (target[k - 1], target[k]);
        let theta = ((y - g0) / (g1 - g0)).clamp(0.0, 1.0);
        w[k - 1] += mass * (1.0 - theta);
        w[k] += mass * theta;
    };
    for &(x, m) in mu {
        let a = spread(x).min(x - lo).min(hi - x).max(0.0);
        deposit(x - a, 0.5 * m);
        deposit(x + a, 0.5 * m);
    }
    w
}

pub fn lognormal_system<T: Scalar>(cfg: &LognormalConfig) -> Result<MarginalSystem<T>, MarginalError> {
    if cfg.times.is_empty() || cfg.vols.is_empty() || cfg.n == 0 {
        return Err(MarginalError::EmptySystem);
    }
    if cfg.times[0] <= 0.0 {
        return Err(MarginalError::TimesNotIncreasing { index: 0 });
    }
    if let Some(pos) = cfg.times.windows(2).position(|w| w[0] >= w[1]) {
        return Err(MarginalError::TimesNotIncreasing { index: pos + 1 });
    }
    let n_times = cfg.times.len();
    let mut grids: Vec<Vec<MarginalGrid<T>>> = vec![Vec::with_capacity(cfg.vols.len()); n_times];
    for &vol in &cfg.vols {
        let t0 = cfg.times[0];
        let mut support = nodes(vol * t0.sqrt(), cfg.n, cfg.width, cfg.placement);
        let sd = vol * t0.sqrt();
        let density = |x: f64| {
            let z = (x.ln() + 0.5 * sd * sd) / sd.max(1e-300);
            (-0.5 * z * z).exp() / x
        };
        let mut weights: Vec<f64> = if cfg.n == 1 {
            vec![1.0]
        } else {
            (0..cfg.n)
                .map(|k| {
                    let left = if k == 0 { support[0] } else { support[k - 1] };
                    let right = if k + 1 == cfg.n { support[k] } else { support[k + 1] };
                    density(support[k]) * (right - left) * 0.5
                })
                .collect()
        };
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mean: f64 = support.iter().zip(&weights).map(|(x, w)| x * w).sum();
        support.iter_mut().for_each(|x| *x /= mean);

        let mut current: Vec<(f64, f64)> = support.iter().copied().zip(weights.iter().copied()).collect();
        grids[0].push(to_grid(&current)?);
        for (t, row) in grids.iter_mut().enumerate().skip(1) {
            let mut target = nodes(vol * cfg.times[t].sqrt(), cfg.n, cfg.width, cfg.placement);
            target.iter_mut().for_each(|x| *x /= mean);
            let (lo, hi) = (current[0].0, current[current.len() - 1].0);
            if target[0] > lo {
                target[0] = lo;
            }
            if target[cfg.n - 1] < hi {
                target[cfg.n - 1] = hi;
            }
            let dt = cfg.times[t] - cfg.times[t - 1];
            let w = push_forward(&current, &target, |x| x * vol * dt.sqrt());
            current = target.into_iter().zip(w).collect();
            row.push(to_grid(&current)?);
        }
    }
    let times = cfg.times.iter().map(|&t| T::lit(t)).collect();
    MarginalSystem::new(times, grids)
}

fn to_grid<T: Scalar>(atoms: &[(f64, f64)]) -> Result<MarginalGrid<T>, MarginalError> {
    let support = atoms.iter().map(|&(x, _)| T::lit(x)).collect();
    let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
    let weights = atoms.iter().map(|&(_, w)| T::lit(w / total)).collect();
    MarginalGrid::new(support, weights)
}
