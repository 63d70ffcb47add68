//! Dense structured linear algebra shared by every stage of the pipeline:
//! vectorization, Kronecker products, commutation matrices, symmetric
//! matrix functions and the discrete-time control solvers.

mod lyapunov;
mod riccati;
mod transfer;

pub use lyapunov::{solve_dlyap, LyapunovForm};
pub use riccati::{solve_dare, DareSolution};
pub use transfer::{
    bounded_real_feasible, h2_norm, hinf_norm, hinf_norm_grid, spectral_density, FrequencyGrid, TransferFunction,
};

use nalgebra::{Complex, DMatrix, DVector, Scalar};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;

/// Stability threshold on the spectral radius used throughout the crate.
pub const STABILITY_TOL: f64 = 1e-10;

/// Columnwise vectorization.
pub fn vec<T: Scalar + Copy>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

/// Inverse of [`vec`].
pub fn unvec<T: Scalar + Copy>(v: &DVector<T>, rows: usize, cols: usize) -> DMatrix<T> {
    assert_eq!(v.len(), rows * cols, "unvec: length {} != {rows}x{cols}", v.len());
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Complex Kronecker product.
pub fn ckron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Permutation `K_{p,q}` with `K_{p,q} vec(M) = vec(Mᵀ)` for every `p×q` matrix `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommutationMatrix {
    pub p: usize,
    pub q: usize,
}

impl CommutationMatrix {
    pub fn new(p: usize, q: usize) -> Self {
        assert!(p >= 1 && q >= 1, "commutation matrix needs p, q >= 1");
        Self { p, q }
    }

    /// 0-based source index (into `vec(M)`) of output entry `k` of `vec(Mᵀ)`.
    pub fn source_index(&self, k: usize) -> usize {
        // vec(Mᵀ)[k] = Mᵀ[r, c] with r = k % q, c = k / q, i.e. M[c, r].
        let r = k % self.q;
        let c = k / self.q;
        c + r * self.p
    }

    pub fn to_matrix(&self) -> Mat {
        let n = self.p * self.q;
        let mut k = Mat::zeros(n, n);
        for row in 0..n {
            k[(row, self.source_index(row))] = 1.0;
        }
        k
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.p * self.q;
        assert_eq!(v.len(), n);
        DVector::from_fn(n, |row, _| v[self.source_index(row)])
    }
}

/// Dense `K_{p,q}` (see [`CommutationMatrix`]).
pub fn commutation_matrix(p: usize, q: usize) -> Mat {
    CommutationMatrix::new(p, q).to_matrix()
}

/// Maximum absolute asymmetry `max|M - Mᵀ|`.
pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// True when `m` is square and symmetric within `1e-12·(1 + max|m|)`.
pub fn is_symmetric(m: &Mat) -> bool {
    m.is_square() && asymmetry(m) <= 1e-12 * (1.0 + max_abs(m))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Applies `f` to the eigenvalues of the symmetric part of `m`.
pub fn sym_function(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let d = Mat::from_diagonal(&eig.eigenvalues.map(f));
    let v = &eig.eigenvectors;
    symmetrize(&(v * d * v.transpose()))
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues are clipped to 0.
pub fn sym_sqrt_psd(m: &Mat) -> Mat {
    sym_function(m, |x| x.max(0.0).sqrt())
}

/// Inverse principal square root of a symmetric PD matrix.
pub fn sym_inv_sqrt(m: &Mat) -> Result<Mat> {
    let lo = min_eigenvalue(m);
    if lo <= 0.0 {
        return Err(Error::SingularQ);
    }
    Ok(sym_function(m, |x| 1.0 / x.sqrt()))
}

/// Spectral radius via complex eigenvalues.
pub fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn is_stable(a: &Mat) -> bool {
    spectral_radius(a) < 1.0 - STABILITY_TOL
}

pub fn ensure_stable(a: &Mat) -> Result<()> {
    let rho = spectral_radius(a);
    if rho < 1.0 - STABILITY_TOL {
        Ok(())
    } else {
        Err(Error::UnstableMatrix(rho))
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |acc, s| acc.max(*s))
}

pub fn cspectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |acc, s| acc.max(*s))
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex::new(x, 0.0))
}

/// Solves `a x = b` by LU, reporting singular systems as a dimension error.
pub fn lu_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::DimensionMismatch("singular linear system".into()))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::DimensionMismatch("matrix is singular".into()))
}

/// `[I 0]`-style selector picking `count` rows starting at `start` out of `total`.
pub fn row_selector(start: usize, count: usize, total: usize) -> Mat {
    let mut s = Mat::zeros(count, total);
    for i in 0..count {
        s[(i, start + i)] = 1.0;
    }
    s
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks matrices vertically.
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Stacks matrices horizontally.
pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack: row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}
