#![allow(dead_code)]

pub mod fd;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssid_core::linalg::{spectral_radius, Mat};
use ssid_core::model::InnovationsModel;

pub fn example2() -> InnovationsModel {
    InnovationsModel::new(
        Mat::from_row_slice(2, 2, &[0.58, 0.23, -0.39, 0.82]),
        Mat::from_row_slice(2, 2, &[0.15, 0.1, -0.25, -0.4]),
        Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]),
        Mat::from_row_slice(2, 2, &[-0.3, -0.65, 0.76, -1.1]),
    )
    .unwrap()
}

/// Lightly damped system with poles near the unit circle.
pub fn near_unit_circle() -> InnovationsModel {
    InnovationsModel::new(
        Mat::from_row_slice(2, 2, &[0.874, 0.8, -0.2, 0.96]),
        Mat::from_row_slice(2, 2, &[0.18, 0.85, -0.25, -0.4]),
        Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]),
        Mat::from_row_slice(2, 2, &[-0.3, -0.65, 0.76, -1.1]),
    )
    .unwrap()
}

pub fn scalar_example() -> InnovationsModel {
    InnovationsModel::new(
        Mat::from_element(1, 1, 0.8),
        Mat::from_element(1, 1, 0.35),
        Mat::from_element(1, 1, 0.001),
        Mat::from_element(1, 1, 0.1),
    )
    .unwrap()
}

pub fn gaussian(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random stable innovations model with spectral radius in `[0.3, 0.85]`.
pub fn random_model(rng: &mut impl Rng, nx: usize, ny: usize) -> InnovationsModel {
    let a0 = gaussian(rng, nx, nx, 1.0);
    let rho = spectral_radius(&a0).max(1e-3);
    let target = rng.random_range(0.3..0.85);
    let a = a0 * (target / rho);
    let k = gaussian(rng, nx, ny, 0.7);
    let c = gaussian(rng, ny, nx, 1.0);
    let l = gaussian(rng, ny, ny, 0.5);
    let q = &l * l.transpose() + Mat::identity(ny, ny) * 0.2;
    InnovationsModel::new(a, k, q, c).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
