//! Chi-square calibrated Frobenius-norm bounds on the innovations-model
//! matrices, and the asymptotic variance of the transfer-function estimate.

use nalgebra::Complex;

use crate::linalg::{ckron, spectral_norm, to_complex, CMat, Mat};

use super::chi2::{chi2_cdf, chi2_quantile};
use super::covariance::AsymptoticCovariance;
use super::maps::{propagated_norm_sq, PerturbationMaps};

#[derive(Debug, Clone, PartialEq)]
pub struct FNormBounds {
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
    pub eps_f: f64,
    pub confidence: f64,
    pub chi2_quantile: f64,
    pub dof: usize,
    pub n: usize,
    /// `(‖D̂ − D̃‖_F, ‖R̂0 − R̃0‖_F)` when the repair program fired.
    pub adjustment_extra: Option<(f64, f64)>,
}

impl FNormBounds {
    /// Same bounds with every channel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        FNormBounds {
            eps_a: self.eps_a * factor,
            eps_b: self.eps_b * factor,
            eps_c: self.eps_c * factor,
            eps_f: self.eps_f * factor,
            ..self.clone()
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.eps_a, self.eps_b, self.eps_c, self.eps_f]
    }
}

/// Degrees of freedom `n_y² + m²n_y²`.
pub fn bound_dof(n_y: usize, m: usize) -> usize {
    n_y * n_y * (1 + m * m)
}

/// `ε_X² = (χ²_α/N)·‖𝒫^{1/2} M_Xᵀ M_X 𝒫^{1/2}‖₂` for `X ∈ {A, B, C, F}`.
/// Repair shifts of `D̃`/`R̃0` are pushed through the partial maps and added
/// to the `B` and `F` channels.
pub fn fnorm_bounds(
    cov: &AsymptoticCovariance,
    maps: &PerturbationMaps,
    n: usize,
    confidence: f64,
    repair_adjust: Option<(f64, f64)>,
) -> FNormBounds {
    let dof = bound_dof(maps.n_y, maps.m);
    assert_eq!(cov.dim(), dof, "covariance and maps disagree on dimensions");
    let q = chi2_quantile(dof, confidence);
    debug_assert!((chi2_cdf(dof, q) - confidence).abs() <= 1e-6);
    let ps = cov.sqrt();
    let eps = |map: &Mat| (q / n as f64 * propagated_norm_sq(map, &ps)).sqrt();
    let (extra_b, extra_f) = match repair_adjust {
        Some((dd, dr)) => (
            spectral_norm(&maps.db_dd) * dd + spectral_norm(&maps.db_dr0) * dr,
            spectral_norm(&maps.df_dd) * dd + spectral_norm(&maps.df_dr0) * dr,
        ),
        None => (0.0, 0.0),
    };
    FNormBounds {
        eps_a: eps(&maps.map_da),
        eps_b: eps(&maps.map_db) + extra_b,
        eps_c: eps(&maps.map_dc),
        eps_f: eps(&maps.map_df) + extra_f,
        confidence,
        chi2_quantile: q,
        dof,
        n,
        adjustment_extra: repair_adjust,
    }
}

/// First-order map from `(vec δR0; vec δH)` to `vec δG(e^{iω})`.
pub fn transfer_sensitivity(maps: &PerturbationMaps, omega: f64) -> CMat {
    let model = &maps.model;
    let n = model.n_x();
    let ny = model.n_y();
    let z = Complex::from_polar(1.0, omega);
    let zi_a = CMat::identity(n, n) * z - to_complex(&model.a);
    let r = zi_a.lu().try_inverse().expect("model is stable");
    let b = to_complex(&model.b());
    let c = to_complex(&model.c);
    let rb = &r * &b;
    let cr = &c * &r;
    let i_y = CMat::identity(ny, ny);
    ckron(&rb.transpose(), &i_y) * to_complex(&maps.map_dc)
        + ckron(&rb.transpose(), &cr) * to_complex(&maps.map_da)
        + ckron(&i_y, &cr) * to_complex(&maps.map_db)
        + to_complex(&maps.map_df)
}

/// `E‖G̃(e^{iω}) − G(e^{iω})‖_F²` to first order, at each frequency.
pub fn transfer_function_variance(
    maps: &PerturbationMaps,
    cov: &AsymptoticCovariance,
    n: usize,
    omegas: &[f64],
) -> Vec<f64> {
    let p = to_complex(&cov.full);
    omegas
        .iter()
        .map(|&w| {
            let j = transfer_sensitivity(maps, w);
            (&j * &p * j.adjoint()).trace().re / n as f64
        })
        .collect()
}
