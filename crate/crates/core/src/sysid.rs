//! Covariance-driven subspace identification: sample covariances, block
//! Hankel matrix, SVD realization, shift-equation least squares and the
//! Riccati step to innovations form.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{ensure_stable, solve_dare, symmetrize, Mat};
use crate::model::{CovarianceModel, InnovationsModel};

/// Output-only time series stored one sample per row (`N × n_y`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub data: Mat,
}

impl TimeSeries {
    pub fn new(data: Mat) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("time series has non-finite entries".into()));
        }
        Ok(TimeSeries { data })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn n_y(&self) -> usize {
        self.data.ncols()
    }

    pub fn sample(&self, t: usize) -> DVector<f64> {
        self.data.row(t).transpose()
    }
}

/// `R̃_k = 1/(N−k) Σ_t y_t y_{t−k}ᵀ` for `k = 0..=max_lag`; `R̃_0` is symmetrized.
pub fn sample_covariances(ts: &TimeSeries, max_lag: usize) -> Result<Vec<Mat>> {
    let n = ts.len();
    if max_lag >= n {
        return Err(Error::InsufficientData(format!(
            "lag {max_lag} needs more than {n} samples"
        )));
    }
    let ny = ts.n_y();
    let y = &ts.data;
    let mut out = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let late = y.view((k, 0), (n - k, ny));
        let early = y.view((0, 0), (n - k, ny));
        let r = late.transpose() * early / (n - k) as f64;
        out.push(if k == 0 { symmetrize(&r) } else { r });
    }
    Ok(out)
}

/// Sample covariances `R̃_0 … R̃_{2m−1}` and the block-Hankel matrix whose
/// 0-based block `(i, j)` is `R̃_{i+j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelEstimate {
    pub m: usize,
    pub covariances: Vec<Mat>,
    pub h: Mat,
}

impl HankelEstimate {
    pub fn n_y(&self) -> usize {
        self.covariances[0].nrows()
    }

    pub fn r0(&self) -> &Mat {
        &self.covariances[0]
    }
}

pub fn build_hankel(covs: &[Mat], m: usize) -> Result<HankelEstimate> {
    if m == 0 || covs.len() < 2 * m {
        return Err(Error::InsufficientLags {
            needed: 2 * m,
            available: covs.len(),
        });
    }
    let ny = covs[0].nrows();
    let mut h = Mat::zeros(m * ny, m * ny);
    for i in 0..m {
        for j in 0..m {
            h.view_mut((i * ny, j * ny), (ny, ny))
                .copy_from(&covs[i + j + 1]);
        }
    }
    Ok(HankelEstimate {
        m,
        covariances: covs[..2 * m].to_vec(),
        h,
    })
}

/// Rank-`n_x` factorization `H ≈ Ω Γ` from the sign-fixed SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub n_x: usize,
    pub us: Mat,
    pub sigma_s: DVector<f64>,
    pub vs: Mat,
    pub un: Mat,
    pub vn: Mat,
    pub omega: Mat,
    pub gamma: Mat,
    pub singular_values: DVector<f64>,
}

/// Full SVD with singular values in descending order and each left singular
/// vector's largest-magnitude entry made positive.
pub fn sign_fixed_svd(h: &Mat) -> (Mat, DVector<f64>, Mat) {
    assert!(h.is_square(), "sign_fixed_svd expects a square matrix");
    let n = h.nrows();
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v").transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let mut us = Mat::zeros(n, n);
    let mut vs = Mat::zeros(n, n);
    let mut ss = DVector::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        let mut uc = u.column(i).into_owned();
        let mut vc = v.column(i).into_owned();
        let mut imax = 0;
        for r in 0..n {
            if uc[r].abs() > uc[imax].abs() {
                imax = r;
            }
        }
        if uc[imax] < 0.0 {
            uc = -uc;
            vc = -vc;
        }
        us.set_column(k, &uc);
        vs.set_column(k, &vc);
        ss[k] = s[i];
    }
    (us, ss, vs)
}

pub fn realize(hankel: &HankelEstimate, n_x: usize) -> Result<Realization> {
    realize_matrix(&hankel.h, n_x)
}

/// [`realize`] on a bare Hankel matrix.
pub fn realize_matrix(h: &Mat, n_x: usize) -> Result<Realization> {
    let n = h.nrows();
    if n_x == 0 || n_x > n {
        return Err(Error::InvalidArgument(format!(
            "order {n_x} outside 1..={n}"
        )));
    }
    let (u, s, v) = sign_fixed_svd(h);
    let ratio = if s[0] > 0.0 { s[n_x - 1] / s[0] } else { 0.0 };
    if ratio < 1e-12 {
        return Err(Error::RankDeficient(ratio));
    }
    let us = u.columns(0, n_x).into_owned();
    let vs = v.columns(0, n_x).into_owned();
    let sigma_s = s.rows(0, n_x).into_owned();
    let sq = Mat::from_diagonal(&sigma_s.map(f64::sqrt));
    Ok(Realization {
        n_x,
        omega: &us * &sq,
        gamma: &sq * vs.transpose(),
        un: u.columns(n_x, n - n_x).into_owned(),
        vn: v.columns(n_x, n - n_x).into_owned(),
        us,
        sigma_s,
        vs,
        singular_values: s,
    })
}

/// Order at the largest ratio `σ_i / σ_{i+1}` among `i ≤ max_order`,
/// ignoring singular values at rounding level.
pub fn select_order(singular_values: &DVector<f64>, max_order: usize) -> usize {
    let top = max_order.min(singular_values.len().saturating_sub(1)).max(1);
    let floor = 1e-10 * singular_values[0];
    let mut best = (1, 0.0f64);
    for i in 1..=top {
        if singular_values[i - 1] <= floor {
            break;
        }
        let next = singular_values[i].max(f64::MIN_POSITIVE);
        let r = singular_values[i - 1] / next;
        if r > best.1 {
            best = (i, r);
        }
    }
    best.0
}

/// Least squares for `Ω̄ A = Ω̲` via a thin QR factorization.
pub fn solve_shift(omega: &Mat, n_y: usize) -> Result<Mat> {
    let rows = omega.nrows();
    if rows < 2 * n_y {
        return Err(Error::InsufficientLags {
            needed: 2,
            available: rows / n_y.max(1),
        });
    }
    let upper = omega.rows(0, rows - n_y).into_owned();
    let lower = omega.rows(n_y, rows - n_y).into_owned();
    let sv = upper.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > 1e10 {
        return Err(Error::IllConditionedShift(cond));
    }
    let qr = upper.qr();
    let rhs = qr.q().transpose() * lower;
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::IllConditionedShift(cond))
}

/// `C` = first `n_y` rows of `Ω`, `D` = first `n_y` columns of `Γ`, `A` from
/// the shift equation, `R0 = R̃0`.
pub fn extract_covariance_model(real: &Realization, r0: &Mat) -> Result<CovarianceModel> {
    let ny = r0.nrows();
    if real.omega.nrows() < 2 * ny {
        return Err(Error::InvalidArgument(
            "Hankel depth m >= 2 is required for the shift equation".into(),
        ));
    }
    let a = solve_shift(&real.omega, ny)?;
    Ok(CovarianceModel {
        a,
        d: real.gamma.columns(0, ny).into_owned(),
        c: real.omega.rows(0, ny).into_owned(),
        r0: symmetrize(r0),
    })
}

/// Solves the Riccati equation of `cm` and returns the innovations model.
pub fn covariance_to_innovations(cm: &CovarianceModel) -> Result<InnovationsModel> {
    ensure_stable(&cm.a)?;
    let sol = solve_dare(&cm.a, &cm.d, &cm.c, &cm.r0)?;
    InnovationsModel::new(cm.a.clone(), sol.k, sol.q, cm.c.clone())
}
