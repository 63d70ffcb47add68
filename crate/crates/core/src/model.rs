//! Innovations and covariance model parameterizations.

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_stable, is_stable, min_eigenvalue, solve_dlyap, sym_sqrt_psd, symmetrize,
    LyapunovForm, Mat, TransferFunction,
};

/// `x⁺ = A x + K e`, `y = C x + e`, `E[eeᵀ] = Q`; equivalently
/// `x⁺ = A x + B ε`, `y = C x + F ε` with unit-covariance `ε`,
/// `B = K Q^{1/2}` and `F = Q^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationsModel {
    pub a: Mat,
    pub k: Mat,
    pub q: Mat,
    pub c: Mat,
}

impl InnovationsModel {
    pub fn new(a: Mat, k: Mat, q: Mat, c: Mat) -> Result<Self> {
        let nx = a.nrows();
        let ny = c.nrows();
        if !a.is_square() || k.shape() != (nx, ny) || q.shape() != (ny, ny) || c.ncols() != nx {
            return Err(Error::DimensionMismatch(format!(
                "innovations model: A {:?}, K {:?}, Q {:?}, C {:?}",
                a.shape(),
                k.shape(),
                q.shape(),
                c.shape()
            )));
        }
        Ok(InnovationsModel { a, k, q, c })
    }

    /// Model given in the `(A, B, C, F)` form with `F` the square root of `Q`.
    pub fn from_noise_form(a: Mat, b: Mat, c: Mat, f: Mat) -> Result<Self> {
        let q = symmetrize(&(&f * f.transpose()));
        let k = crate::linalg::lu_solve(&f.transpose(), &b.transpose())
            .map_err(|_| Error::SingularQ)?
            .transpose();
        // B = K F with F not necessarily symmetric
        let k = if (&k * &f - &b).amax() <= 1e-12 * (1.0 + b.amax()) {
            k
        } else {
            return Err(Error::SingularQ);
        };
        Self::new(a, k, q, c)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `F = Q^{1/2}` (principal symmetric root).
    pub fn f(&self) -> Mat {
        sym_sqrt_psd(&self.q)
    }

    /// `B = K Q^{1/2}`.
    pub fn b(&self) -> Mat {
        &self.k * self.f()
    }

    pub fn is_stable(&self) -> bool {
        is_stable(&self.a)
    }

    pub fn is_valid(&self) -> bool {
        self.is_stable() && min_eigenvalue(&self.q) >= -1e-10
    }

    /// `G_e(z) = C (zI − A)⁻¹ B + F`.
    pub fn transfer_function(&self) -> TransferFunction {
        TransferFunction {
            a: self.a.clone(),
            b: self.b(),
            c: self.c.clone(),
            d: self.f(),
        }
    }

    /// Stationary state covariance `P = A P Aᵀ + K Q Kᵀ`.
    pub fn state_covariance(&self) -> Result<Mat> {
        ensure_stable(&self.a)?;
        let kqk = symmetrize(&(&self.k * &self.q * self.k.transpose()));
        solve_dlyap(&self.a, &kqk, LyapunovForm::Controllability)
    }

    /// Exact covariance model: `D = A P Cᵀ + K Q`, `R0 = C P Cᵀ + Q`.
    pub fn covariance_model(&self) -> Result<CovarianceModel> {
        let p = self.state_covariance()?;
        Ok(CovarianceModel {
            a: self.a.clone(),
            d: &self.a * &p * self.c.transpose() + &self.k * &self.q,
            c: self.c.clone(),
            r0: symmetrize(&(&self.c * &p * self.c.transpose() + &self.q)),
        })
    }

    /// `R_k = E[y_{t+k} y_tᵀ]` for `k = 0..=max_lag`.
    pub fn covariances(&self, max_lag: usize) -> Result<Vec<Mat>> {
        self.covariance_model().map(|cm| cm.covariances(max_lag))
    }
}

/// Covariance model `(A, D, C, R0)` with `R_k = C A^{k−1} D` for `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub a: Mat,
    pub d: Mat,
    pub c: Mat,
    pub r0: Mat,
}

impl CovarianceModel {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn covariances(&self, max_lag: usize) -> Vec<Mat> {
        let mut out = Vec::with_capacity(max_lag + 1);
        out.push(self.r0.clone());
        let mut ad = self.d.clone();
        for _ in 1..=max_lag {
            out.push(&self.c * &ad);
            ad = &self.a * ad;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_form_round_trip() {
        let a = Mat::from_row_slice(2, 2, &[0.58, 0.23, -0.39, 0.82]);
        let k = Mat::from_row_slice(2, 2, &[0.15, 0.1, -0.25, -0.4]);
        let q = Mat::from_row_slice(2, 2, &[0.075, 0.037, 0.037, 0.068]);
        let c = Mat::from_row_slice(2, 2, &[-0.3, -0.65, 0.76, -1.1]);
        let m = InnovationsModel::new(a.clone(), k.clone(), q.clone(), c.clone()).unwrap();
        let back = InnovationsModel::from_noise_form(a, m.b(), c, m.f()).unwrap();
        assert!((back.k - k).amax() < 1e-12);
        assert!((back.q - q).amax() < 1e-15);
    }

    #[test]
    fn covariance_lags_are_markov_parameters() {
        let m = InnovationsModel::new(
            Mat::from_element(1, 1, 0.8),
            Mat::from_element(1, 1, 0.35),
            Mat::from_element(1, 1, 0.001),
            Mat::from_element(1, 1, 0.1),
        )
        .unwrap();
        let r = m.covariances(3).unwrap();
        let p = 0.35f64.powi(2) * 0.001 / (1.0 - 0.64);
        let d = 0.8 * p * 0.1 + 0.35 * 0.001;
        assert!((r[0][(0, 0)] - (0.01 * p + 0.001)).abs() < 1e-16);
        assert!((r[1][(0, 0)] - 0.1 * d).abs() < 1e-16);
        assert!((r[3][(0, 0)] - 0.1 * 0.64 * d).abs() < 1e-16);
    }
}
