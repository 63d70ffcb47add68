//! Small dense semidefinite programs in LMI form.
//!
//! A program is `min cᵀy` subject to `F_j(y) = F_j0 + Σ_i y_i F_ji ⪰ 0` for a
//! list of symmetric blocks. Programs are assembled from [`Affine`] matrix
//! expressions through [`SdpBuilder`] and solved by [`solve_sdp`].

mod solver;

pub use solver::{solve_sdp, solve_sdp_with, SdpSettings, SdpSolution, SdpStatus};

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;

use crate::linalg::{asymmetry, max_abs, Mat};

/// Matrix expression `M0 + Σ_i y_i M_i`, affine in the scalar decision variables.
#[derive(Debug, Clone)]
pub struct Affine {
    pub constant: Mat,
    pub terms: BTreeMap<usize, Mat>,
}

impl Affine {
    pub fn constant(m: Mat) -> Self {
        Affine {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Mat::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn scale(&self, s: f64) -> Self {
        Affine {
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(&i, m)| (i, m * s)).collect(),
        }
    }

    /// `e · M` for a 1×1 expression `e`.
    pub fn times(&self, m: &Mat) -> Self {
        assert_eq!(self.constant.shape(), (1, 1), "times needs a scalar expression");
        Affine {
            constant: m * self.constant[(0, 0)],
            terms: self.terms.iter().map(|(&i, c)| (i, m * c[(0, 0)])).collect(),
        }
    }

    /// `L · self`.
    pub fn lmul(&self, l: &Mat) -> Self {
        Affine {
            constant: l * &self.constant,
            terms: self.terms.iter().map(|(&i, m)| (i, l * m)).collect(),
        }
    }

    /// `self · R`.
    pub fn rmul(&self, r: &Mat) -> Self {
        Affine {
            constant: &self.constant * r,
            terms: self.terms.iter().map(|(&i, m)| (i, m * r)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Affine {
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(&i, m)| (i, m.transpose())).collect(),
        }
    }

    /// Sub-expression of the given rows and columns.
    pub fn view(&self, start: (usize, usize), shape: (usize, usize)) -> Self {
        Affine {
            constant: self.constant.view(start, shape).into_owned(),
            terms: self
                .terms
                .iter()
                .map(|(&i, m)| (i, m.view(start, shape).into_owned()))
                .collect(),
        }
    }

    /// Columnwise vectorization as an `(rows·cols)×1` expression.
    pub fn vectorize(&self) -> Self {
        let n = self.constant.len();
        let flat = |m: &Mat| Mat::from_column_slice(n, 1, m.as_slice());
        Affine {
            constant: flat(&self.constant),
            terms: self.terms.iter().map(|(&i, m)| (i, flat(m))).collect(),
        }
    }

    /// Block assembly; every row of `rows` must have the same number of
    /// blocks with consistent heights and widths.
    pub fn bmat(rows: &[Vec<Affine>]) -> Self {
        let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
        let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
        let (h, w) = (heights.iter().sum(), widths.iter().sum());
        let mut out = Affine::zeros(h, w);
        let mut r0 = 0;
        for (bi, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "bmat: ragged block row");
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                assert_eq!(blk.nrows(), heights[bi], "bmat: height mismatch");
                assert_eq!(blk.ncols(), widths[bj], "bmat: width mismatch");
                out.constant
                    .view_mut((r0, c0), blk.constant.shape())
                    .copy_from(&blk.constant);
                for (&i, m) in &blk.terms {
                    out.terms
                        .entry(i)
                        .or_insert_with(|| Mat::zeros(h, w))
                        .view_mut((r0, c0), m.shape())
                        .copy_from(m);
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    /// Block-diagonal assembly.
    pub fn block_diag(blocks: &[Affine]) -> Self {
        let rows: Vec<Vec<Affine>> = (0..blocks.len())
            .map(|i| {
                (0..blocks.len())
                    .map(|j| {
                        if i == j {
                            blocks[i].clone()
                        } else {
                            Affine::zeros(blocks[i].nrows(), blocks[j].ncols())
                        }
                    })
                    .collect()
            })
            .collect();
        Self::bmat(&rows)
    }

    /// Evaluates the expression at `y`.
    pub fn eval(&self, y: &DVector<f64>) -> Mat {
        let mut out = self.constant.clone();
        for (&i, m) in &self.terms {
            out += m * y[i];
        }
        out
    }

    fn combine(&self, other: &Affine, sign: f64) -> Affine {
        assert_eq!(
            self.constant.shape(),
            other.constant.shape(),
            "affine expressions have different shapes"
        );
        let mut out = self.clone();
        out.constant += &other.constant * sign;
        for (&i, m) in &other.terms {
            let e = out
                .terms
                .entry(i)
                .or_insert_with(|| Mat::zeros(m.nrows(), m.ncols()));
            *e += m * sign;
        }
        out
    }
}

impl Add<&Affine> for &Affine {
    type Output = Affine;
    fn add(self, rhs: &Affine) -> Affine {
        self.combine(rhs, 1.0)
    }
}

impl Sub<&Affine> for &Affine {
    type Output = Affine;
    fn sub(self, rhs: &Affine) -> Affine {
        self.combine(rhs, -1.0)
    }
}

impl Add<Affine> for Affine {
    type Output = Affine;
    fn add(self, rhs: Affine) -> Affine {
        self.combine(&rhs, 1.0)
    }
}

impl Sub<Affine> for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self.combine(&rhs, -1.0)
    }
}

impl Neg for &Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scale(-1.0)
    }
}

impl Mul<&Affine> for &Mat {
    type Output = Affine;
    fn mul(self, rhs: &Affine) -> Affine {
        rhs.lmul(self)
    }
}

impl Mul<&Mat> for &Affine {
    type Output = Affine;
    fn mul(self, rhs: &Mat) -> Affine {
        self.rmul(rhs)
    }
}

/// One LMI block `F0 + Σ y_i F_i ⪰ 0`; `coeffs[i]` is `None` when variable `i`
/// does not enter the block.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub constant: Mat,
    pub coeffs: Vec<Option<Mat>>,
}

impl LmiBlock {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, y: &DVector<f64>) -> Mat {
        let mut out = self.constant.clone();
        for (i, f) in self.coeffs.iter().enumerate() {
            if let Some(f) = f {
                out += f * y[i];
            }
        }
        out
    }
}

/// A program `min cᵀy` over LMI blocks.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: DVector<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl SdpProblem {
    /// Largest negative eigenvalue over all blocks at `y` (0 when feasible).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| (-crate::linalg::min_eigenvalue(&b.eval(y))).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Incremental construction of an [`SdpProblem`].
#[derive(Debug, Default)]
pub struct SdpBuilder {
    n_vars: usize,
    objective: Vec<(usize, f64)>,
    constraints: Vec<Affine>,
}

impl SdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn fresh(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    /// A new scalar variable as a 1×1 expression.
    pub fn scalar(&mut self) -> Affine {
        let i = self.fresh();
        let mut e = Affine::zeros(1, 1);
        e.terms.insert(i, Mat::from_element(1, 1, 1.0));
        e
    }

    /// A new symmetric `n×n` matrix variable (`n(n+1)/2` scalars).
    pub fn symmetric(&mut self, n: usize) -> Affine {
        let mut e = Affine::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.fresh();
                let mut m = Mat::zeros(n, n);
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                e.terms.insert(v, m);
            }
        }
        e
    }

    /// A new unstructured `r×c` matrix variable.
    pub fn full(&mut self, rows: usize, cols: usize) -> Affine {
        let mut e = Affine::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let v = self.fresh();
                let mut m = Mat::zeros(rows, cols);
                m[(i, j)] = 1.0;
                e.terms.insert(v, m);
            }
        }
        e
    }

    /// Adds the 1×1 expression `e` to the objective (constants are ignored).
    pub fn minimize(&mut self, e: &Affine) {
        assert_eq!(e.constant.shape(), (1, 1), "objective must be scalar");
        for (&i, m) in &e.terms {
            self.objective.push((i, m[(0, 0)]));
        }
    }

    /// Requires the symmetric expression `e` to be positive semidefinite.
    pub fn psd(&mut self, e: Affine) {
        assert!(e.constant.is_square(), "psd constraint must be square");
        debug_assert!(
            asymmetry(&e.constant) <= 1e-9 * (1.0 + max_abs(&e.constant)),
            "psd constraint is not symmetric"
        );
        self.constraints.push(e);
    }

    pub fn build(self) -> SdpProblem {
        let n = self.n_vars;
        let mut c = DVector::zeros(n);
        for (i, v) in self.objective {
            c[i] += v;
        }
        let blocks = self
            .constraints
            .into_iter()
            .map(|e| {
                let sym = |m: &Mat| (m + m.transpose()) * 0.5;
                let mut coeffs = vec![None; n];
                for (i, m) in &e.terms {
                    if max_abs(m) > 0.0 {
                        coeffs[*i] = Some(sym(m));
                    }
                }
                LmiBlock {
                    constant: sym(&e.constant),
                    coeffs,
                }
            })
            .collect();
        SdpProblem {
            n_vars: n,
            objective: c,
            blocks,
        }
    }
}
