#![allow(dead_code)]

use diffgeo::kernels::LandmarkConfig;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in `[−spread, spread]ⁿ` with pairwise distance at least
/// `min_sep`.
pub fn random_config(rng: &mut ChaCha8Rng, npts: usize, dim: usize, spread: f64, min_sep: f64) -> LandmarkConfig {
    loop {
        let m = DMatrix::from_fn(npts, dim, |_, _| rng.random_range(-spread..spread));
        let ok = (0..npts).all(|i| {
            (0..i).all(|j| (m.row(i) - m.row(j)).norm() >= min_sep)
        });
        if ok {
            return LandmarkConfig::new(m).unwrap();
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
