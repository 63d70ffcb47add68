//! Linear maps from `(vec δR0, vec δH)` to first-order perturbations of the
//! covariance-model and innovations-model matrices.

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, commutation_matrix, hstack, inverse, kron, lu_solve, row_selector, solve_dare,
    solve_dlyap, spectral_norm, vstack, LyapunovForm, Mat,
};
use crate::model::{CovarianceModel, InnovationsModel};
use crate::sysid::Realization;

use super::svd::svd_perturbation_maps;

/// `Ξ` and the composed maps for `δA`, `δC`, `δD`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationJacobians {
    pub xi: Mat,
    pub map_da: Mat,
    pub map_dc: Mat,
    pub map_dd: Mat,
}

/// Selector `[0 I]` picking the `δH` block out of `(vec δR0; vec δH)`.
fn h_selector(ny: usize, m: usize) -> Mat {
    let d0 = ny * ny;
    let dh = m * m * ny * ny;
    row_selector(d0, dh, d0 + dh)
}

/// Selector `[I 0]` picking the `δR0` block.
fn r0_selector(ny: usize, m: usize) -> Mat {
    let d0 = ny * ny;
    let dh = m * m * ny * ny;
    row_selector(0, d0, d0 + dh)
}

/// `Ξ = I⊗((Φ1Ω)⁺Φ2) − Aᵀ⊗((Φ1Ω)⁺Φ1)` and the maps
/// `δA = ΞΠ1[0 I]`, `δC = (I⊗Φ3)Π1[0 I]`, `δD = (Φ4ᵀ⊗I)Π2[0 I]`.
pub fn realization_jacobians(
    real: &Realization,
    cm: &CovarianceModel,
    pi1: &Mat,
    pi2: &Mat,
) -> Result<RealizationJacobians> {
    let nx = real.n_x;
    let ny = cm.n_y();
    let rows = real.omega.nrows();
    if rows % ny != 0 || cm.n_x() != nx {
        return Err(Error::DimensionMismatch(format!(
            "realization with {rows} rows and order {nx} vs covariance model {}x{}",
            cm.n_x(),
            ny
        )));
    }
    let m = rows / ny;
    if m < 2 {
        return Err(Error::InvalidArgument("Hankel depth too small".into()));
    }
    let phi1 = row_selector(0, rows - ny, rows);
    let phi2 = row_selector(ny, rows - ny, rows);
    let phi3 = row_selector(0, ny, rows);
    let o1 = &phi1 * &real.omega;
    let gram = o1.transpose() * &o1;
    let pinv = lu_solve(&gram, &o1.transpose())?;
    let i_n = Mat::identity(nx, nx);
    let xi = kron(&i_n, &(&pinv * &phi2)) - kron(&cm.a.transpose(), &(&pinv * &phi1));
    let sel = h_selector(ny, m);
    let pi1h = pi1 * &sel;
    let pi2h = pi2 * &sel;
    let map_da = &xi * &pi1h;
    let map_dc = kron(&i_n, &phi3) * &pi1h;
    // Φ4 = [I 0]ᵀ, so Φ4ᵀ⊗I_{nx} selects the first n_y columns of δΓ
    let phi4t = row_selector(0, ny, rows);
    let map_dd = kron(&phi4t, &i_n) * &pi2h;
    Ok(RealizationJacobians {
        xi,
        map_da,
        map_dc,
        map_dd,
    })
}

/// Riccati chain maps. `P = A P Aᵀ + (D − APCᵀ)(R0 − CPCᵀ)⁻¹(D − APCᵀ)ᵀ`
/// rewritten as `P = A_sᵀ P (I − SP)⁻¹ A_s + M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DareChain {
    /// `vec δP ≐ 𝒢1 (vec δR0; vec δH)`.
    pub g1: Mat,
    pub g2: Mat,
    pub g3: Mat,
    pub g4: Mat,
    pub g5: Mat,
    /// Riccati solution the chain was linearized at.
    pub p: Mat,
    /// Partial maps of `vec δP` with respect to `(δR0, δA, δC, δD)`.
    pub dp_partials: [Mat; 4],
    /// Partial maps of `vec δF` with respect to `(δR0, δA, δC, δD)`.
    pub df_partials: [Mat; 4],
    /// Partial maps of `vec δB` with respect to `(δR0, δA, δC, δD)`.
    pub db_partials: [Mat; 4],
}

pub fn dare_perturbation_chain(
    cm: &CovarianceModel,
    jac: &RealizationJacobians,
    m: usize,
) -> Result<DareChain> {
    let nx = cm.n_x();
    let ny = cm.n_y();
    let sol = solve_dare(&cm.a, &cm.d, &cm.c, &cm.r0)?;
    let p = sol.p;
    let (a, c, d) = (&cm.a, &cm.c, &cm.d);
    let r0_inv = inverse(&cm.r0)?;
    let dr = d * &r0_inv;
    let ctr = c.transpose() * &r0_inv;
    let a_s = a.transpose() - &ctr * d.transpose();
    let s = &ctr * c;
    let i_x = Mat::identity(nx, nx);
    let i_y = Mat::identity(ny, ny);
    let a_c = lu_solve(&(&i_x - &s * &p), &a_s)?;
    let k_xx = commutation_matrix(nx, nx);
    let k_xy = commutation_matrix(nx, ny);
    let k_yx = commutation_matrix(ny, nx);

    let act = a_c.transpose();
    let j1 = Mat::identity(nx * nx, nx * nx) - kron(&act, &act);
    let j1_lu = j1.clone().lu();
    let j1_inv = j1_lu.try_inverse().ok_or(Error::SingularJ1)?;
    let acp = &act * &p;
    let j2 = kron(&acp, &i_x) * &k_xx + kron(&i_x, &acp);
    let j3 = kron(&acp, &acp);
    let j4 = -kron(&dr, &dr);
    let j5 = kron(&i_x, &dr) * &k_xy + kron(&dr, &i_x);
    let j6 = -(kron(&dr, &i_x) * &k_yx);
    let j7 = kron(&dr, &ctr);
    let j8 = -(kron(&i_x, &ctr) * &k_xy);
    let j9 = -kron(&ctr, &ctr);
    let j10 = kron(&ctr, &i_x) * &k_yx + kron(&i_x, &ctr);

    let dp_r0 = &j1_inv * (&j4 + &j2 * &j7 + &j3 * &j9);
    let dp_a = &j1_inv * &j2 * &k_xx;
    let dp_c = &j1_inv * (&j2 * &j6 + &j3 * &j10);
    let dp_d = &j1_inv * (&j5 + &j2 * &j8);

    let sel0 = r0_selector(ny, m);
    let g1 = &dp_r0 * &sel0 + &dp_a * &jac.map_da + &dp_c * &jac.map_dc + &dp_d * &jac.map_dd;

    // Q = R0 − CPCᵀ, F = Q^{1/2}, B = (D − APCᵀ)F⁻¹
    let q = crate::linalg::symmetrize(&(&cm.r0 - c * &p * c.transpose()));
    let f = crate::linalg::sym_sqrt_psd(&q);
    let f_inv = inverse(&f)?;
    let b = (d - a * &p * c.transpose()) * &f_inv;
    let l = kron(&i_y, &f) + kron(&f, &i_y);
    let l_inv = inverse(&l)?;
    let cp = c * &p;
    let dq_dc = kron(&cp, &i_y) + kron(&i_y, &cp) * &k_yx;
    let cc = kron(c, c);

    let g2 = &l_inv * (&sel0 - &dq_dc * &jac.map_dc);
    let g3 = &l_inv * &cc;
    let fb = kron(&f_inv, &b);
    let db_dd_direct = kron(&f_inv, &i_x);
    let db_da_direct = -kron(&(&f_inv * &cp), &i_x);
    let db_dc_direct = -(kron(&f_inv, &(a * &p)) * &k_yx);
    let db_dp = -kron(&(&f_inv * c), a);
    let g4 = &db_dd_direct * &jac.map_dd + &db_da_direct * &jac.map_da + &db_dc_direct * &jac.map_dc
        - &fb * &g2;
    let g5 = &fb * &g3 + &db_dp;

    // partials with δP and δF eliminated
    let df_dp = -&g3;
    let df_r0 = &l_inv + &df_dp * &dp_r0;
    let df_a = &df_dp * &dp_a;
    let df_c = -(&l_inv * &dq_dc) + &df_dp * &dp_c;
    let df_d = &df_dp * &dp_d;
    let db_r0 = &db_dp * &dp_r0 - &fb * &df_r0;
    let db_a = &db_da_direct + &db_dp * &dp_a - &fb * &df_a;
    let db_c = &db_dc_direct + &db_dp * &dp_c - &fb * &df_c;
    let db_d = &db_dd_direct + &db_dp * &dp_d - &fb * &df_d;

    Ok(DareChain {
        g1,
        g2,
        g3,
        g4,
        g5,
        p,
        dp_partials: [dp_r0, dp_a, dp_c, dp_d],
        df_partials: [df_r0, df_a, df_c, df_d],
        db_partials: [db_r0, db_a, db_c, db_d],
    })
}

/// `vec δP1 ≐ M1 (vec δR0; vec δH)` for the error-system observability
/// gramian, linearized at `(A, C)`.
pub fn delta_p1_map(a: &Mat, c: &Mat, jac: &RealizationJacobians) -> Result<(Mat, Mat)> {
    let nx = a.nrows();
    let ny = c.nrows();
    let a_bar = block_diag(&[a, a]);
    let c_bar = hstack(&[c, &(-c)]);
    let p_bar = solve_dlyap(&a_bar, &(c_bar.transpose() * &c_bar), LyapunovForm::Observability)?;
    let n2 = 2 * nx;
    let i2 = Mat::identity(n2, n2);
    let abt = a_bar.transpose();
    let lhs = kron(&abt, &abt) - Mat::identity(n2 * n2, n2 * n2);
    let lhs_inv = inverse(&lhs).map_err(|_| Error::SingularJ1)?;
    let e = vstack(&[&Mat::zeros(nx, nx), &Mat::identity(nx, nx)]);
    let atp = &abt * &p_bar;
    let via_a = (kron(&atp, &i2) * commutation_matrix(n2, n2) + kron(&i2, &atp)) * kron(&e, &e);
    let via_c = (kron(&i2, &c_bar.transpose())
        + kron(&c_bar.transpose(), &i2) * commutation_matrix(ny, n2))
        * (-kron(&e, &Mat::identity(ny, ny)));
    let m1 = -(&lhs_inv * (via_a * &jac.map_da + via_c * &jac.map_dc));
    Ok((m1, p_bar))
}

/// Everything needed to propagate `𝒫_{R0,H}` to the model matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMaps {
    pub n_x: usize,
    pub n_y: usize,
    pub m: usize,
    pub pi1: Mat,
    pub pi2: Mat,
    pub xi: Mat,
    pub map_da: Mat,
    pub map_dc: Mat,
    pub map_dd: Mat,
    pub g1: Mat,
    pub g2: Mat,
    pub g3: Mat,
    pub g4: Mat,
    pub g5: Mat,
    /// `𝒢4 + 𝒢5𝒢1`.
    pub map_db: Mat,
    /// `𝒢2 − 𝒢3𝒢1`.
    pub map_df: Mat,
    /// `δP1` map of the error-system gramian.
    pub m1: Mat,
    /// `P̄ = [[X, −X], [−X, X]]`.
    pub p_bar: Mat,
    /// `(∂δB/∂δD, ∂δB/∂δR0)` used for deterministic repair shifts.
    pub db_dd: Mat,
    pub db_dr0: Mat,
    pub df_dd: Mat,
    pub df_dr0: Mat,
    /// Innovations model the maps were evaluated at.
    pub model: InnovationsModel,
}

impl PerturbationMaps {
    /// Input dimension `n_y² + m²n_y²`.
    pub fn input_dim(&self) -> usize {
        self.n_y * self.n_y * (1 + self.m * self.m)
    }
}

/// Builds all maps at the given realization / covariance model. `model`
/// must be the innovations model of `cm` (its `A`, `C` enter `M1`).
pub fn perturbation_maps(
    real: &Realization,
    cm: &CovarianceModel,
    model: &InnovationsModel,
) -> Result<PerturbationMaps> {
    let ny = cm.n_y();
    let m = real.omega.nrows() / ny;
    if m <= real.n_x.div_ceil(ny) {
        return Err(Error::InvalidArgument(format!(
            "Hankel depth {m} is too small for order {}",
            real.n_x
        )));
    }
    let (pi1, pi2) = svd_perturbation_maps(real)?;
    let jac = realization_jacobians(real, cm, &pi1, &pi2)?;
    let chain = dare_perturbation_chain(cm, &jac, m)?;
    let (m1, p_bar) = delta_p1_map(&model.a, &model.c, &jac)?;
    let map_db = &chain.g4 + &chain.g5 * &chain.g1;
    let map_df = &chain.g2 - &chain.g3 * &chain.g1;
    let [df_r0, _, _, df_d] = chain.df_partials;
    let [db_r0, _, _, db_d] = chain.db_partials;
    Ok(PerturbationMaps {
        n_x: real.n_x,
        n_y: ny,
        m,
        pi1,
        pi2,
        xi: jac.xi,
        map_da: jac.map_da,
        map_dc: jac.map_dc,
        map_dd: jac.map_dd,
        g1: chain.g1,
        g2: chain.g2,
        g3: chain.g3,
        g4: chain.g4,
        g5: chain.g5,
        map_db,
        map_df,
        m1,
        p_bar,
        db_dd: db_d,
        db_dr0: db_r0,
        df_dd: df_d,
        df_dr0: df_r0,
        model: model.clone(),
    })
}

/// `‖M 𝒫^{1/2}‖₂²`, i.e. `‖𝒫^{1/2} Mᵀ M 𝒫^{1/2}‖₂`.
pub fn propagated_norm_sq(map: &Mat, p_sqrt: &Mat) -> f64 {
    let s = spectral_norm(&(map * p_sqrt));
    s * s
}
