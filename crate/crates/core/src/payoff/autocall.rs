use serde::{Deserialize, Serialize};

use super::PayoffError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discounting {
    /// `exp(-r t)`
    #[default]
    Continuous,
    /// `1 / (1 + r t)`
    Simple,
}

/// Worst-of autocallable on `d` assets, per unit notional. Levels are
/// relative to the initial fixing; times are in years from the valuation
/// date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocallSpec<T> {
    pub d: usize,
    pub observation_times: Vec<T>,
    pub inception_time: T,
    pub strike: T,
    pub knock_in: T,
    pub knock_out: T,
    pub coupon_rate: T,
    pub discount_rate: T,
    #[serde(default)]
    pub discounting: Discounting,
}

/// First observation at which the worst performer reaches the knock-out
/// barrier, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnockOut {
    At(usize),
    Never,
}

impl<T: Scalar> AutocallSpec<T> {
    /// Two indices, three annual observations from an inception five
    /// months before valuation; barriers 120% / 60%, strike 100%, 8% coupon,
    /// 1% discount rate.
    pub fn two_index_reference() -> Self {
        let t_inc = -5.0 / 24.0;
        Self {
            d: 2,
            observation_times: (1..=3).map(|k| T::lit(t_inc + k as f64)).collect(),
            inception_time: T::lit(t_inc),
            strike: T::one(),
            knock_in: T::lit(0.6),
            knock_out: T::lit(1.2),
            coupon_rate: T::lit(0.08),
            discount_rate: T::lit(0.01),
            discounting: Discounting::Continuous,
        }
    }

    pub fn validate(&self) -> Result<(), PayoffError> {
        let fail = |msg: &str| Err(PayoffError::InvalidSpec(msg.to_string()));
        if self.d == 0 {
            return fail("d must be positive");
        }
        if self.observation_times.is_empty() {
            return fail("at least one observation time required");
        }
        if !(self.knock_in > T::zero() && self.knock_in <= self.strike) {
            return fail("require 0 < knock_in <= strike");
        }
        if self.knock_out <= T::zero() {
            return fail("knock_out must be positive");
        }
        if self.observation_times.windows(2).any(|w| w[0] >= w[1]) {
            return fail("observation times must be strictly increasing");
        }
        if self.observation_times[0] <= self.inception_time {
            return fail("observation times must follow inception");
        }
        if self.observation_times[0] < T::zero() {
            return fail("observation times must not precede valuation");
        }
        if self.coupon_rate < T::zero() {
            return fail("coupon rate must be nonnegative");
        }
        Ok(())
    }

    pub fn n_observations(&self) -> usize {
        self.observation_times.len()
    }

    /// Coupons accrued over `[t_{j-1}, t_j]` with `t_0 = 0`.
    pub fn coupons(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.observation_times
            .iter()
            .map(|&t| {
                let c = self.coupon_rate * (t - prev);
                prev = t;
                c
            })
            .collect()
    }

    pub fn discount(&self, t: T) -> T {
        match self.discounting {
            Discounting::Continuous => (-self.discount_rate * t).exp(),
            Discounting::Simple => T::one() / (T::one() + self.discount_rate * t),
        }
    }

    /// `path` is row-major `m x d`: `path[j * d + i]` is asset `i` at `t_j`.
    pub fn knock_out_time(&self, path: &[T]) -> KnockOut {
        path.chunks(self.d).position(|row| worst(row) >= self.knock_out).map_or(KnockOut::Never, KnockOut::At)
    }
}

fn worst<T: Scalar>(row: &[T]) -> T {
    row.iter().copied().fold(T::infinity(), T::min)
}

/// Present value at the valuation date of the worst-of autocallable along
/// one observed path (row-major `m x d`).
pub fn worst_of_autocall<T: Scalar>(path: &[T], spec: &AutocallSpec<T>) -> Result<T, PayoffError> {
    let m = spec.n_observations();
    if path.len() != m * spec.d {
        return Err(PayoffError::ShapeMismatch { expected: m * spec.d, found: path.len() });
    }
    if path.iter().any(|&p| p <= T::zero() || !p.is_finite()) {
        return Err(PayoffError::NonPositivePrice);
    }
    Ok(evaluate(path, spec))
}

pub(crate) fn evaluate<T: Scalar>(path: &[T], spec: &AutocallSpec<T>) -> T {
    let m = spec.n_observations();
    let coupons = spec.coupons();
    let times = &spec.observation_times;
    match spec.knock_out_time(path) {
        // Knock-out strictly before maturity pays accrued coupons at t_tau.
        KnockOut::At(j) if j + 1 < m => spec.discount(times[j]) * coupons[..=j].iter().copied().sum::<T>(),
        _ => {
            let final_worst = worst(&path[(m - 1) * spec.d..]);
            let df = spec.discount(times[m - 1]);
            if final_worst <= spec.knock_in {
                df * (final_worst - spec.strike).min(T::zero())
            } else {
                df * coupons.iter().copied().sum::<T>()
            }
        }
    }
}
