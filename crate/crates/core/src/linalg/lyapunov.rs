use super::{asymmetry, ensure_stable, kron, max_abs, symmetrize, unvec, vec, Mat};
use crate::error::{Error, Result};

/// Which of the two discrete Lyapunov conventions to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovForm {
    /// `X = A X Aᵀ + Q` (state covariance / controllability gramian).
    Controllability,
    /// `Aᵀ X A − X + Q = 0` (observability gramian).
    Observability,
}

/// Above this state dimension the Kronecker system gets too large and the
/// squared Smith iteration is used instead.
const KRONECKER_MAX_DIM: usize = 20;

/// Solves the discrete Lyapunov equation in the requested form.
pub fn solve_dlyap(a: &Mat, q: &Mat, form: LyapunovForm) -> Result<Mat> {
    let n = a.nrows();
    if !a.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "dlyap: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let asym = asymmetry(q);
    if asym > 1e-12 * (1.0 + max_abs(q)) {
        return Err(Error::NonSymmetricInput(asym));
    }
    ensure_stable(a)?;
    let a = match form {
        LyapunovForm::Controllability => a.clone(),
        LyapunovForm::Observability => a.transpose(),
    };
    let q = symmetrize(q);
    let x = if n <= KRONECKER_MAX_DIM {
        kronecker_solve(&a, &q)?
    } else {
        smith_doubling(&a, &q)
    };
    Ok(symmetrize(&x))
}

fn kronecker_solve(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let lhs = Mat::identity(n * n, n * n) - kron(a, a);
    let rhs = vec(q);
    let lu = lhs.lu();
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::UnstableMatrix(super::spectral_radius(a)))?;
    // one step of iterative refinement
    let xm = unvec(&x, n, n);
    let r = q + a * &xm * a.transpose() - &xm;
    if let Some(dx) = lu.solve(&vec(&r)) {
        x += dx;
    }
    Ok(unvec(&x, n, n))
}

fn smith_doubling(a: &Mat, q: &Mat) -> Mat {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let inc = &ak * &x * ak.transpose();
        let done = max_abs(&inc) <= 1e-17 * (1.0 + max_abs(&x));
        x += inc;
        if done {
            break;
        }
        ak = &ak * &ak;
    }
    x
}
