//! Asymptotic covariance of `(vec R̃0, vec H̃)` for Gaussian output data.
//!
//! Each entry of the stacked statistic is a product moment `vec(X Yᵀ)` of two
//! windows of the output sequence: `X = Y = y_k` for `R̃0`, and
//! `X = [y_k; …; y_{k+m−1}]`, `Y = [y_{k−1}; …; y_{k−m}]` for `H̃`. For
//! Gaussian data
//!
//! `N·Cov(vec(A Bᵀ), vec(C Dᵀ)) → Σ_τ R_BD(τ) ⊗ R_AC(τ) + (R_BC(τ) ⊗ R_AD(τ))·Π`
//!
//! where `Π` reorders the column index from `(c, d)` to `(d, c)`. The lag sums
//! are evaluated as spectral integrals (trapezoid on a uniform grid) or, as a
//! cross-check, directly in the lag domain.

use nalgebra::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    ckron, ensure_stable, kron, min_eigenvalue, sym_sqrt_psd, symmetrize, CMat, FrequencyGrid,
    Mat,
};
use crate::model::InnovationsModel;

/// Default quadrature resolution.
pub const DEFAULT_QUADRATURE_POINTS: usize = 4096;

/// Stacked window `[y_{k+o}]` over the listed offsets `o`.
#[derive(Debug, Clone)]
struct Window {
    offsets: Vec<i64>,
}

impl Window {
    fn single() -> Self {
        Window { offsets: vec![0] }
    }

    fn future(m: usize) -> Self {
        Window {
            offsets: (0..m as i64).collect(),
        }
    }

    fn past(m: usize) -> Self {
        Window {
            offsets: (1..=m as i64).map(|o| -o).collect(),
        }
    }

    fn len(&self) -> usize {
        self.offsets.len()
    }
}

/// Product-moment statistic `vec(X Yᵀ)`.
#[derive(Debug, Clone)]
struct Channel {
    x: Window,
    y: Window,
}

/// `Σ_τ E[X_k Y_hᵀ]`-type cross spectrum of two windows at one frequency:
/// block `(o, o')` is `e^{iω(o−o')} S_y(ω)`.
fn cross_spectrum(s: &CMat, omega: f64, u: &Window, v: &Window) -> CMat {
    let ny = s.nrows();
    let mut out = CMat::zeros(u.len() * ny, v.len() * ny);
    for (i, &o) in u.offsets.iter().enumerate() {
        for (j, &p) in v.offsets.iter().enumerate() {
            let ph = Complex::from_polar(1.0, omega * (o - p) as f64);
            out.view_mut((i * ny, j * ny), (ny, ny)).copy_from(&(s * ph));
        }
    }
    out
}

/// Lag-domain analogue of [`cross_spectrum`]: block `(o, o')` is `R_y(τ + o − o')`.
fn cross_covariance(lag: &dyn Fn(i64) -> Mat, ny: usize, tau: i64, u: &Window, v: &Window) -> Mat {
    let mut out = Mat::zeros(u.len() * ny, v.len() * ny);
    for (i, &o) in u.offsets.iter().enumerate() {
        for (j, &p) in v.offsets.iter().enumerate() {
            out.view_mut((i * ny, j * ny), (ny, ny))
                .copy_from(&lag(tau + o - p));
        }
    }
    out
}

/// Moves column `(c, d)` (index `c·|D| + d`) to `(d, c)` (index `d·|C| + c`).
fn swap_columns<T: nalgebra::Scalar + Copy>(
    m: &nalgebra::DMatrix<T>,
    c_len: usize,
    d_len: usize,
) -> nalgebra::DMatrix<T> {
    let mut out = m.clone();
    for c in 0..c_len {
        for d in 0..d_len {
            out.set_column(d * c_len + c, &m.column(c * d_len + d));
        }
    }
    out
}

fn spectral_term(s: &CMat, omega: f64, p: &Channel, q: &Channel) -> CMat {
    // (A, B) = (p.x, p.y), (C, D) = (q.x, q.y)
    let s_bd = cross_spectrum(s, omega, &p.y, &q.y);
    let s_ac = cross_spectrum(s, omega, &p.x, &q.x);
    let s_bc = cross_spectrum(s, omega, &p.y, &q.x);
    let s_ad = cross_spectrum(s, omega, &p.x, &q.y);
    let ny = s.nrows();
    let first = ckron(&s_bd.conjugate(), &s_ac);
    let second = ckron(&s_bc.conjugate(), &s_ad);
    first + swap_columns(&second, q.x.len() * ny, q.y.len() * ny)
}

fn lag_term(lag: &dyn Fn(i64) -> Mat, ny: usize, tau: i64, p: &Channel, q: &Channel) -> Mat {
    let r_bd = cross_covariance(lag, ny, tau, &p.y, &q.y);
    let r_ac = cross_covariance(lag, ny, tau, &p.x, &q.x);
    let r_bc = cross_covariance(lag, ny, tau, &p.y, &q.x);
    let r_ad = cross_covariance(lag, ny, tau, &p.x, &q.y);
    kron(&r_bd, &r_ac) + swap_columns(&kron(&r_bc, &r_ad), q.x.len() * ny, q.y.len() * ny)
}

/// `𝒫_{R0,H}` and its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    pub p_r0: Mat,
    pub p_r0h: Mat,
    pub p_h: Mat,
    /// `[[P_R0, P_R0H], [P_R0Hᵀ, P_H]]`.
    pub full: Mat,
    /// Number of quadrature points (0 for the lag-domain route).
    pub n_quadrature: usize,
    /// Largest imaginary part left over by the quadrature.
    pub imag_residue: f64,
    pub n_y: usize,
    pub m: usize,
}

impl AsymptoticCovariance {
    fn assemble(p_r0: Mat, p_r0h: Mat, p_h: Mat, n_quadrature: usize, imag_residue: f64, n_y: usize, m: usize) -> Self {
        let a = p_r0.nrows();
        let b = p_h.nrows();
        let mut full = Mat::zeros(a + b, a + b);
        full.view_mut((0, 0), (a, a)).copy_from(&p_r0);
        full.view_mut((0, a), (a, b)).copy_from(&p_r0h);
        full.view_mut((a, 0), (b, a)).copy_from(&p_r0h.transpose());
        full.view_mut((a, a), (b, b)).copy_from(&p_h);
        let full = symmetrize(&full);
        AsymptoticCovariance {
            p_r0: full.view((0, 0), (a, a)).into_owned(),
            p_r0h: full.view((0, a), (a, b)).into_owned(),
            p_h: full.view((a, a), (b, b)).into_owned(),
            full,
            n_quadrature,
            imag_residue,
            n_y,
            m,
        }
    }

    /// Side length `n_y² + m²n_y²`.
    pub fn dim(&self) -> usize {
        self.full.nrows()
    }

    /// Symmetric PSD square root with negative eigenvalues clipped.
    pub fn sqrt(&self) -> Mat {
        sym_sqrt_psd(&self.full)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.full)
    }
}

fn channels(m: usize) -> (Channel, Channel) {
    (
        Channel {
            x: Window::single(),
            y: Window::single(),
        },
        Channel {
            x: Window::future(m),
            y: Window::past(m),
        },
    )
}

/// Spectral-integral route on `grid` (uniform on `[−π, π)`).
pub fn asymptotic_covariance(
    model: &InnovationsModel,
    m: usize,
    grid: &FrequencyGrid,
) -> Result<AsymptoticCovariance> {
    ensure_stable(&model.a)?;
    if m == 0 {
        return Err(Error::InvalidArgument("Hankel depth must be positive".into()));
    }
    if grid.n_points < 1024 {
        return Err(Error::InvalidArgument(format!(
            "quadrature grid of {} points is too coarse (need >= 1024)",
            grid.n_points
        )));
    }
    let g = model.transfer_function();
    let (r0c, hc) = channels(m);
    let ny = model.n_y();
    let d0 = ny * ny;
    let dh = m * m * ny * ny;

    // contiguous chunks summed in order, then reduced in chunk order, so the
    // result does not depend on the thread count
    let chunk = 256;
    let partial: Vec<(CMat, CMat, CMat)> = grid
        .omegas
        .par_chunks(chunk)
        .map(|ws| {
            let mut acc = (CMat::zeros(d0, d0), CMat::zeros(d0, dh), CMat::zeros(dh, dh));
            for &w in ws {
                let h = g.eval_freq(w);
                let s = &h * h.adjoint();
                acc.0 += spectral_term(&s, w, &r0c, &r0c);
                acc.1 += spectral_term(&s, w, &r0c, &hc);
                acc.2 += spectral_term(&s, w, &hc, &hc);
            }
            acc
        })
        .collect();
    let mut sum = (CMat::zeros(d0, d0), CMat::zeros(d0, dh), CMat::zeros(dh, dh));
    for p in partial {
        sum.0 += p.0;
        sum.1 += p.1;
        sum.2 += p.2;
    }
    let scale = 1.0 / grid.n_points as f64;
    let imag = [&sum.0, &sum.1, &sum.2]
        .iter()
        .map(|m| m.iter().map(|z| z.im.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        * scale;
    let re = |m: &CMat| m.map(|z| z.re * scale);
    Ok(AsymptoticCovariance::assemble(
        re(&sum.0),
        re(&sum.1),
        re(&sum.2),
        grid.n_points,
        imag,
        ny,
        m,
    ))
}

/// Lag-domain route: the same sums evaluated over output covariances,
/// truncated once `‖R(τ)‖ < 1e-12·‖R(0)‖`.
pub fn asymptotic_covariance_lags(model: &InnovationsModel, m: usize) -> Result<AsymptoticCovariance> {
    ensure_stable(&model.a)?;
    let cm = model.covariance_model()?;
    let ny = model.n_y();
    let r0_norm = cm.r0.norm().max(f64::MIN_POSITIVE);
    let mut lags = vec![cm.r0.clone()];
    let mut ad = cm.d.clone();
    let mut below = 0;
    // keep going until a run of negligible lags covers the window span
    while below < 2 * m + 2 {
        let r = &cm.c * &ad;
        if r.norm() < 1e-12 * r0_norm {
            below += 1;
        } else {
            below = 0;
        }
        lags.push(r);
        ad = &cm.a * ad;
        if lags.len() > 1_000_000 {
            return Err(Error::InvalidArgument("output covariances decay too slowly".into()));
        }
    }
    let max_lag = lags.len() as i64 - 1;
    let lag = |k: i64| -> Mat {
        if k.abs() > max_lag {
            Mat::zeros(ny, ny)
        } else if k >= 0 {
            lags[k as usize].clone()
        } else {
            lags[(-k) as usize].transpose()
        }
    };
    let (r0c, hc) = channels(m);
    let d0 = ny * ny;
    let dh = m * m * ny * ny;
    let mut sum = (Mat::zeros(d0, d0), Mat::zeros(d0, dh), Mat::zeros(dh, dh));
    let span = max_lag + m as i64 + 1;
    for tau in -span..=span {
        sum.0 += lag_term(&lag, ny, tau, &r0c, &r0c);
        sum.1 += lag_term(&lag, ny, tau, &r0c, &hc);
        sum.2 += lag_term(&lag, ny, tau, &hc, &hc);
    }
    Ok(AsymptoticCovariance::assemble(sum.0, sum.1, sum.2, 0, 0.0, ny, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::commutation_matrix;

    fn white(q: Mat) -> InnovationsModel {
        let ny = q.nrows();
        InnovationsModel::new(Mat::zeros(1, 1), Mat::zeros(1, ny), q, Mat::zeros(ny, 1)).unwrap()
    }

    #[test]
    fn white_noise_r0_block_closed_form() {
        let q = Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]);
        let cov = asymptotic_covariance(&white(q.clone()), 2, &FrequencyGrid::new(1024)).unwrap();
        let expected = (Mat::identity(4, 4) + commutation_matrix(2, 2)) * kron(&q, &q);
        assert!((&cov.p_r0 - expected).amax() <= 1e-10);
        assert!(cov.imag_residue <= 1e-10);
    }

    #[test]
    fn scalar_white_noise_values() {
        let cov = asymptotic_covariance(&white(Mat::identity(1, 1)), 1, &FrequencyGrid::new(1024)).unwrap();
        assert!((cov.p_r0[(0, 0)] - 2.0).abs() < 1e-12);
        // Var(y_k y_{k−1}) = E[y_k²] E[y_{k−1}²] = 1
        assert!((cov.p_h[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(cov.p_r0h[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn spectral_and_lag_routes_agree() {
        let m = InnovationsModel::new(
            Mat::from_row_slice(2, 2, &[0.58, 0.23, -0.39, 0.82]),
            Mat::from_row_slice(2, 2, &[0.15, 0.1, -0.25, -0.4]),
            Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]),
            Mat::from_row_slice(2, 2, &[-0.3, -0.65, 0.76, -1.1]),
        )
        .unwrap();
        let a = asymptotic_covariance(&m, 3, &FrequencyGrid::new(4096)).unwrap();
        let b = asymptotic_covariance_lags(&m, 3).unwrap();
        assert!((&a.full - &b.full).amax() <= 1e-10 * b.full.amax());
        assert!(a.min_eigenvalue() >= -1e-8 * a.full.norm());
    }
}
