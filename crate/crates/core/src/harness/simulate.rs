use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{ensure_stable, min_eigenvalue, spectral_radius, Mat};
use crate::model::InnovationsModel;
use crate::sysid::TimeSeries;

/// Name of the generator and sampler, recorded in reports.
pub const GAUSSIAN_ALGORITHM: &str = "ChaCha20Rng + rand_distr::StandardNormal (ziggurat)";

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub model: InnovationsModel,
    pub n: usize,
    pub seed: u64,
    /// Discarded prefix; `None` selects [`default_burn_in`].
    pub burn_in: Option<usize>,
}

/// `ceil(10 / (1 − ρ(A)))`, capped at 10⁴.
pub fn default_burn_in(a: &Mat) -> usize {
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return 10_000;
    }
    ((10.0 / (1.0 - rho)).ceil() as usize).min(10_000)
}

/// Draws `x⁺ = A x + B ε`, `y = C x + F ε` with `ε ~ N(0, I)` and `x₀ = 0`.
pub fn simulate(cfg: &SimulationConfig) -> Result<TimeSeries> {
    let model = &cfg.model;
    ensure_stable(&model.a)?;
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if min_eigenvalue(&model.q) < -1e-12 {
        return Err(Error::InvalidArgument("Q is not positive semidefinite".into()));
    }
    let (nx, ny) = (model.n_x(), model.n_y());
    let b = model.b();
    let f = model.f();
    let burn = cfg.burn_in.unwrap_or_else(|| default_burn_in(&model.a));
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut x = DVector::<f64>::zeros(nx);
    let mut e = DVector::<f64>::zeros(ny);
    let mut out = Mat::zeros(cfg.n, ny);
    for t in 0..burn + cfg.n {
        for v in e.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        if t >= burn {
            let y = &model.c * &x + &f * &e;
            out.set_row(t - burn, &y.transpose());
        }
        x = &model.a * &x + &b * &e;
    }
    TimeSeries::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::sample_covariances;

    #[test]
    fn zero_noise_gives_zero_output() {
        let m = InnovationsModel::new(
            Mat::from_element(1, 1, 0.5),
            Mat::from_element(1, 1, 1.0),
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, 1.0),
        )
        .unwrap();
        let ts = simulate(&SimulationConfig { model: m, n: 50, seed: 1, burn_in: None }).unwrap();
        assert!(ts.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_output_covariance_and_determinism() {
        let q = Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]);
        let m = InnovationsModel::new(Mat::zeros(1, 1), Mat::zeros(1, 2), q.clone(), Mat::zeros(2, 1))
            .unwrap();
        let n = 40_000;
        let cfg = SimulationConfig { model: m, n, seed: 17, burn_in: Some(0) };
        let ts = simulate(&cfg).unwrap();
        let r0 = &sample_covariances(&ts, 0).unwrap()[0];
        assert!((r0 - &q).amax() <= 5.0 * q.amax() / (n as f64).sqrt());
        assert_eq!(simulate(&cfg).unwrap(), ts);
    }

    #[test]
    fn burn_in_rule() {
        assert_eq!(default_burn_in(&Mat::from_element(1, 1, 0.5)), 20);
        assert_eq!(default_burn_in(&Mat::from_element(1, 1, 0.9999)), 10_000);
    }
}
