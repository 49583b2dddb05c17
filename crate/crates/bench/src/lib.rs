//! Shared fixtures for the criterion benches.

use rocarc_core::data::{gen_gaussian_pair, GaussianSpec, SampleSet};

pub fn gaussian_pair(n: usize, dim: usize, seed: u64) -> SampleSet {
    let pos = GaussianSpec::isotropic(vec![1.0; dim], 1.0).unwrap();
    let neg = GaussianSpec::isotropic(vec![-1.0; dim], 1.0).unwrap();
    gen_gaussian_pair(&pos, &neg, n, n, seed).unwrap()
}
