use super::{asymmetry, max_abs, min_eigenvalue, symmetrize, Mat};
use crate::error::{Error, Result};

const CONVERGENCE_TOL: f64 = 1e-12;
const MAX_DOUBLING_STEPS: usize = 200;
const MAX_FIXED_POINT_STEPS: usize = 200_000;
const DIVERGENCE_LIMIT: f64 = 1e12;

/// Solution of the covariance-form Riccati equation
/// `P = A P Aᵀ + (D − A P Cᵀ)(R0 − C P Cᵀ)⁻¹(D − A P Cᵀ)ᵀ`
/// together with the innovations parameters it induces.
#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: Mat,
    /// Innovations covariance `R0 − C P Cᵀ`.
    pub q: Mat,
    /// Kalman gain `(D − A P Cᵀ) Q⁻¹`.
    pub k: Mat,
    /// Relative residual `‖P − Ric(P)‖ / (1 + ‖P‖)` (max norm).
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the Riccati equation of a covariance model `(A, D, C, R0)`.
///
/// Structure-preserving doubling is run on the equivalent form
/// `P = A_sᵀ P (I − S P)⁻¹ A_s + M` with `A_s = Aᵀ − Cᵀ R0⁻¹ Dᵀ`,
/// `S = Cᵀ R0⁻¹ C`, `M = D R0⁻¹ Dᵀ`; its iterates are the doubled steps of the
/// forward covariance recursion started at `P = 0`, so a limit is the
/// minimal solution. If doubling breaks down, the plain recursion is tried.
pub fn solve_dare(a: &Mat, d: &Mat, c: &Mat, r0: &Mat) -> Result<DareSolution> {
    let nx = a.nrows();
    let ny = c.nrows();
    if !a.is_square() || d.nrows() != nx || d.ncols() != ny || c.ncols() != nx || r0.nrows() != ny
        || r0.ncols() != ny
    {
        return Err(Error::DimensionMismatch(format!(
            "dare: A {}x{}, D {}x{}, C {}x{}, R0 {}x{}",
            a.nrows(),
            a.ncols(),
            d.nrows(),
            d.ncols(),
            c.nrows(),
            c.ncols(),
            r0.nrows(),
            r0.ncols()
        )));
    }
    let asym = asymmetry(r0);
    if asym > 1e-12 * (1.0 + max_abs(r0)) {
        return Err(Error::NonSymmetricInput(asym));
    }
    let r0 = symmetrize(r0);
    if min_eigenvalue(&r0) <= 0.0 {
        return Err(Error::DareInfeasible("R0 is not positive definite".into()));
    }

    let (p, iterations) = match doubling(a, d, c, &r0) {
        Some(sol) => sol,
        None => fixed_point(a, d, c, &r0)?,
    };
    finish(a, d, c, &r0, p, iterations)
}

fn doubling(a: &Mat, d: &Mat, c: &Mat, r0: &Mat) -> Option<(Mat, usize)> {
    let nx = a.nrows();
    let r0_inv = r0.clone().try_inverse()?;
    let mut ak = a.transpose() - c.transpose() * &r0_inv * d.transpose();
    let mut gk = -(c.transpose() * &r0_inv * c);
    let mut hk = symmetrize(&(d * &r0_inv * d.transpose()));
    let eye = Mat::identity(nx, nx);
    for it in 1..=MAX_DOUBLING_STEPS {
        let w = &eye + &gk * &hk;
        let lu = w.lu();
        let w_inv_a = lu.solve(&ak)?;
        let w_inv_g = lu.solve(&gk)?;
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &w_inv_a));
        let g_next = symmetrize(&(&gk + &ak * &w_inv_g * ak.transpose()));
        let a_next = &ak * &w_inv_a;
        if !h_next.iter().all(|x| x.is_finite()) || max_abs(&h_next) > DIVERGENCE_LIMIT {
            return None;
        }
        let step = max_abs(&(&h_next - &hk));
        hk = h_next;
        gk = g_next;
        ak = a_next;
        if step <= CONVERGENCE_TOL * (1.0 + max_abs(&hk)) {
            return Some((hk, it));
        }
    }
    None
}

fn fixed_point(a: &Mat, d: &Mat, c: &Mat, r0: &Mat) -> Result<(Mat, usize)> {
    let nx = a.nrows();
    let mut p = Mat::zeros(nx, nx);
    for it in 1..=MAX_FIXED_POINT_STEPS {
        let q = r0 - c * &p * c.transpose();
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::DareInfeasible("R0 − C P Cᵀ lost definiteness".into()))?;
        let g = d - a * &p * c.transpose();
        let next = symmetrize(&(a * &p * a.transpose() + &g * chol.solve(&g.transpose())));
        if !next.iter().all(|x| x.is_finite()) || max_abs(&next) > DIVERGENCE_LIMIT {
            return Err(Error::DareInfeasible("Riccati recursion diverged".into()));
        }
        let step = max_abs(&(&next - &p));
        p = next;
        if step <= CONVERGENCE_TOL * (1.0 + max_abs(&p)) {
            return Ok((p, it));
        }
    }
    Err(Error::DareInfeasible("Riccati recursion did not converge".into()))
}

fn finish(a: &Mat, d: &Mat, c: &Mat, r0: &Mat, p: Mat, iterations: usize) -> Result<DareSolution> {
    let scale = 1.0 + max_abs(&p);
    if min_eigenvalue(&p) < -1e-10 * scale {
        return Err(Error::DareInfeasible(format!(
            "solution is indefinite (min eigenvalue {:.3e})",
            min_eigenvalue(&p)
        )));
    }
    let q = symmetrize(&(r0 - c * &p * c.transpose()));
    let q_min = min_eigenvalue(&q);
    if q_min < -1e-8 {
        return Err(Error::DareInfeasible(format!(
            "innovations covariance is indefinite (min eigenvalue {q_min:.3e})"
        )));
    }
    if q_min <= 1e-13 * (1.0 + max_abs(r0)) {
        return Err(Error::SingularQ);
    }
    let g = d - a * &p * c.transpose();
    let q_inv = q.clone().try_inverse().ok_or(Error::SingularQ)?;
    let k = &g * &q_inv;
    let ric = a * &p * a.transpose() + &g * &q_inv * g.transpose();
    let residual = max_abs(&(&p - ric)) / scale;
    if residual > 1e-8 {
        return Err(Error::DareInfeasible(format!("residual {residual:.3e} too large")));
    }
    Ok(DareSolution {
        p,
        q,
        k,
        residual,
        iterations,
    })
}
