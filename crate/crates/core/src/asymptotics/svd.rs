//! First-order sensitivities of the balanced factors `Ω = U_s Λ_s^{1/2}` and
//! `Γ = Λ_s^{1/2} V_sᵀ` of the Hankel matrix.

use crate::error::{Error, Result};
use crate::linalg::{kron, Mat};
use crate::sysid::Realization;

fn check_gap(real: &Realization) -> Result<()> {
    let s = &real.singular_values;
    let n = real.n_x;
    if s[n - 1] <= 0.0 || (n < s.len() && s[n - 1] <= s[n]) {
        return Err(Error::RankDeficient(if s[0] > 0.0 { s[n - 1] / s[0] } else { 0.0 }));
    }
    for i in 1..n {
        if s[i - 1] - s[i] <= 1e-14 * s[0] {
            return Err(Error::RankDeficient(s[i] / s[0]));
        }
    }
    Ok(())
}

/// `(Π1, Π2)` with `vec δΩ ≐ Π1 vec δH`, `vec δΓ ≐ Π2 vec δH`.
///
/// This is the derivative of the sign-fixed SVD used by the realization,
/// including the rotation inside the signal subspace, so it matches finite
/// differences of `realize` exactly to first order.
pub fn svd_perturbation_maps(real: &Realization) -> Result<(Mat, Mat)> {
    check_gap(real)?;
    let n = real.n_x;
    let u = crate::linalg::hstack(&[&real.us, &real.un]);
    let v = crate::linalg::hstack(&[&real.vs, &real.vn]);
    let p_rows = u.nrows();
    let p_cols = v.nrows();
    let s = &real.singular_values;
    let sigma = |j: usize| if j < s.len() { s[j] } else { 0.0 };
    let ku = u.ncols();
    let kv = v.ncols();
    let kmax = ku.max(kv);

    let mut pi1 = Mat::zeros(p_rows * n, p_rows * p_cols);
    let mut pi2 = Mat::zeros(n * p_cols, p_rows * p_cols);
    for c in 0..p_cols {
        for r in 0..p_rows {
            // δH = e_r e_cᵀ, so (Uᵀ δH V)_{ji} = U[r, j] V[c, i]
            let col = r + c * p_rows;
            let pm = |j: usize, i: usize| {
                if j < ku && i < kv {
                    u[(r, j)] * v[(c, i)]
                } else {
                    0.0
                }
            };
            for i in 0..n {
                let si = sigma(i);
                let sq = si.sqrt();
                let ds = pm(i, i);
                let mut du = real.us.column(i) * (ds / (2.0 * sq));
                let mut dv = real.vs.column(i) * (ds / (2.0 * sq));
                for j in 0..kmax {
                    if j == i {
                        continue;
                    }
                    let sj = sigma(j);
                    let den = si * si - sj * sj;
                    if j < ku {
                        let w = (si * pm(j, i) + sj * pm(i, j)) / den;
                        du += u.column(j) * (w * sq);
                    }
                    if j < kv {
                        let w = (si * pm(i, j) + sj * pm(j, i)) / den;
                        dv += v.column(j) * (w * sq);
                    }
                }
                // vec(δΩ): column i of Ω occupies rows i·p_rows..
                pi1.view_mut((i * p_rows, col), (p_rows, 1)).copy_from(&du);
                // vec(δΓ): entry (i, k) sits at i + k·n
                for k in 0..p_cols {
                    pi2[(i + k * n, col)] = dv[k];
                }
            }
        }
    }
    Ok((pi1, pi2))
}

/// The subspace-perturbation form in which the signal-subspace rotation is
/// absorbed into a symmetric `δΛ^{1/2}`:
/// `Π1 = (I⊗U_s)(I⊗Λ^{1/2} + Λ^{1/2}⊗I)⁻¹(V_sᵀ⊗U_sᵀ) + (Λ^{−1/2}V_sᵀ)⊗(U_nU_nᵀ)` and
/// `Π2 = (V_s⊗I)(I⊗Λ^{1/2} + Λ^{1/2}⊗I)⁻¹(V_sᵀ⊗U_sᵀ) + (V_nV_nᵀ)⊗(Λ^{−1/2}U_sᵀ)`.
///
/// It describes the same subspaces as [`svd_perturbation_maps`] but in a
/// basis that differs from the sign-fixed SVD by a first-order rotation.
pub fn svd_perturbation_maps_subspace(real: &Realization) -> Result<(Mat, Mat)> {
    check_gap(real)?;
    let n = real.n_x;
    let sq = Mat::from_diagonal(&real.sigma_s.map(f64::sqrt));
    let isq = Mat::from_diagonal(&real.sigma_s.map(|s| 1.0 / s.sqrt()));
    let i_n = Mat::identity(n, n);
    let lyap = kron(&i_n, &sq) + kron(&sq, &i_n);
    let lyap_inv = lyap
        .try_inverse()
        .ok_or(Error::RankDeficient(0.0))?;
    let core = &lyap_inv * kron(&real.vs.transpose(), &real.us.transpose());
    let pu = &real.un * real.un.transpose();
    let pv = &real.vn * real.vn.transpose();
    let pi1 = kron(&i_n, &real.us) * &core + kron(&(&isq * real.vs.transpose()), &pu);
    let pi2 = kron(&real.vs, &i_n) * &core + kron(&pv, &(&isq * real.us.transpose()));
    Ok((pi1, pi2))
}
