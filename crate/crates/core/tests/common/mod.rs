#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmot::lp::IndexMap;
use vmot::marginals::synthetic::random_split_system;
use vmot::marginals::{validate_system, MarginalGrid, MarginalSystem};
use vmot::payoff::{CostTensor, Direction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `{0} -> {-1, 1}`: the only martingale coupling is the symmetric split.
pub fn unique_coupling() -> MarginalSystem<f64> {
    let split = MarginalGrid::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
    validate_system(MarginalSystem::new(vec![1.0, 2.0], vec![vec![MarginalGrid::dirac(0.0)], vec![split]]).unwrap())
}

/// Two-period system with `d` assets, two atoms first and up to four after
/// a mean-preserving split, plus costs uniform on `[0, 1]`.
pub fn random_instance(seed: u64, d: usize) -> (MarginalSystem<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let system = validate_system(random_split_system(d, 2, 2, &mut r));
    let n: usize = system.dims().iter().product();
    let costs = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
    (system, costs)
}

pub fn tensor(system: &MarginalSystem<f64>, values: Vec<f64>, direction: Direction) -> CostTensor<f64> {
    CostTensor::new(values, IndexMap::new(system.dims()), direction).unwrap()
}
