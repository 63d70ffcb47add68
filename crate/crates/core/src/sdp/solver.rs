//! Infeasible-start primal-dual path following with the HKM search direction
//! and Mehrotra predictor-corrector steps.
//!
//! The LMI program `min cᵀy, F0 + Σ y_i F_i ⪰ 0` is the dual of the standard
//! pair with `C = F0`, `A_i = −F_i`, `b = −c`:
//!
//! ```text
//! (P)  min ⟨C, X⟩  s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0
//! (D)  max bᵀy     s.t. Σ y_i A_i + S = C, S ⪰ 0
//! ```

use nalgebra::DVector;

use super::SdpProblem;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Solved,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpSettings {
    /// Target for relative gap and relative primal/dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            tol: 1e-9,
            max_iter: 120,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: DVector<f64>,
    /// `cᵀy` at the returned point.
    pub objective: f64,
    pub relative_gap: f64,
    /// Largest negative eigenvalue of any block at `y`.
    pub violation: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn value(&self, e: &super::Affine) -> Mat {
        e.eval(&self.y)
    }

    /// Maps non-solved statuses to errors.
    pub fn into_result(self) -> Result<SdpSolution> {
        match self.status {
            SdpStatus::Solved => Ok(self),
            SdpStatus::Infeasible => Err(Error::SolverFailure("program is infeasible".into())),
            SdpStatus::NumericalFailure => Err(Error::SolverFailure(format!(
                "no convergence after {} iterations (gap {:.2e}, violation {:.2e})",
                self.iterations, self.relative_gap, self.violation
            ))),
        }
    }
}

pub fn solve_sdp(prob: &SdpProblem) -> SdpSolution {
    solve_sdp_with(prob, &SdpSettings::default())
}

struct Blocks(Vec<Mat>);

impl Blocks {
    fn dot(&self, other: &Blocks) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum()
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

struct Data<'a> {
    c: Vec<&'a Mat>,
    /// `a[block][var]`, already negated.
    a: Vec<Vec<Option<Mat>>>,
    b: DVector<f64>,
    sizes: Vec<usize>,
}

impl Data<'_> {
    fn op(&self, x: &[Mat]) -> DVector<f64> {
        let m = self.b.len();
        let mut out = DVector::zeros(m);
        for (blk, xb) in self.a.iter().zip(x) {
            for (i, ai) in blk.iter().enumerate() {
                if let Some(ai) = ai {
                    out[i] += ai.dot(xb);
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<Mat> {
        self.a
            .iter()
            .zip(&self.sizes)
            .map(|(blk, &n)| {
                let mut s = Mat::zeros(n, n);
                for (i, ai) in blk.iter().enumerate() {
                    if let Some(ai) = ai {
                        s += ai * y[i];
                    }
                }
                s
            })
            .collect()
    }
}

fn sym(m: Mat) -> Mat {
    (&m + m.transpose()) * 0.5
}

/// Largest `α ∈ (0, ∞]` with `X + αΔ ⪰ 0`, given `X ≻ 0`.
fn max_step(x: &Mat, d: &Mat) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(t) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lam = min_eigenvalue(&t);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn step_length(x: &[Mat], dx: &[Mat], fraction: f64) -> f64 {
    let amax = x
        .iter()
        .zip(dx)
        .map(|(x, d)| max_step(x, d))
        .fold(f64::INFINITY, f64::min);
    (fraction * amax).min(1.0)
}

pub fn solve_sdp_with(prob: &SdpProblem, settings: &SdpSettings) -> SdpSolution {
    let m = prob.n_vars;
    let data = Data {
        c: prob.blocks.iter().map(|b| &b.constant).collect(),
        a: prob
            .blocks
            .iter()
            .map(|b| b.coeffs.iter().map(|f| f.as_ref().map(|f| -f)).collect())
            .collect(),
        b: -&prob.objective,
        sizes: prob.blocks.iter().map(|b| b.size()).collect(),
    };
    let n_total: usize = data.sizes.iter().sum();
    let fail = |y: DVector<f64>, it: usize, gap: f64, status: SdpStatus| {
        let violation = prob.violation(&y);
        SdpSolution {
            status,
            objective: prob.objective.dot(&y),
            y,
            relative_gap: gap,
            violation,
            iterations: it,
        }
    };
    if n_total == 0 {
        return fail(DVector::zeros(m), 0, 0.0, SdpStatus::Solved);
    }

    // SDPT3-style starting point.
    let mut a_norm = vec![0.0f64; m];
    for blk in &data.a {
        for (i, ai) in blk.iter().enumerate() {
            if let Some(ai) = ai {
                a_norm[i] += ai.norm_squared();
            }
        }
    }
    let a_norm: Vec<f64> = a_norm.iter().map(|v| v.sqrt()).collect();
    let c_norm = data.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();
    let b_norm = data.b.norm();
    let nf = n_total as f64;
    let mut xi = 10.0f64.max(nf.sqrt());
    let mut eta = 10.0f64.max(nf.sqrt()).max(c_norm);
    for i in 0..m {
        xi = xi.max(nf * (1.0 + data.b[i].abs()) / (1.0 + a_norm[i]));
        eta = eta.max(a_norm[i]);
    }
    let mut x = Blocks(data.sizes.iter().map(|&n| Mat::identity(n, n) * xi).collect());
    let mut s = Blocks(data.sizes.iter().map(|&n| Mat::identity(n, n) * eta).collect());
    let mut y = DVector::<f64>::zeros(m);

    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    let mut gap = f64::INFINITY;
    for it in 0..settings.max_iter {
        let ax = data.op(&x.0);
        let rp = &data.b - &ax;
        let aty = data.adjoint(&y);
        let rd = Blocks(
            (0..data.c.len())
                .map(|k| data.c[k] - &s.0[k] - &aty[k])
                .collect(),
        );
        let pobj: f64 = data.c.iter().zip(&x.0).map(|(c, x)| c.dot(x)).sum();
        let dobj = data.b.dot(&y);
        let mu = x.dot(&s) / nf;
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.norm() / (1.0 + c_norm);

        let merit = gap.max(pinf).max(dinf);
        if best.as_ref().is_none_or(|(bm, _, _)| merit < *bm) {
            best = Some((merit, y.clone(), gap));
        }
        if gap <= settings.tol && pinf <= settings.tol && dinf <= settings.tol {
            return fail(y, it, gap, SdpStatus::Solved);
        }
        // X is (close to) a ray: ⟨C, X⟩ < 0 with 𝒜(X) ≈ 0 certifies that no
        // y makes all blocks PSD.
        if pobj < 0.0 && ax.norm() <= 1e-8 * (-pobj) * (1.0 + a_norm.iter().cloned().fold(0.0, f64::max)) / (1.0 + c_norm)
            && dinf > settings.tol
        {
            return fail(y, it, gap, SdpStatus::Infeasible);
        }
        if !mu.is_finite() || !pobj.is_finite() || !dobj.is_finite() {
            break;
        }

        let Some(s_inv) = s
            .0
            .iter()
            .map(|sb| sb.clone().cholesky().map(|c| c.inverse()))
            .collect::<Option<Vec<Mat>>>()
        else {
            break;
        };

        // Schur complement M_ij = tr(A_i X A_j S⁻¹).
        let mut schur = Mat::zeros(m, m);
        for (k, blk) in data.a.iter().enumerate() {
            for j in 0..m {
                let Some(aj) = &blk[j] else { continue };
                let g = &x.0[k] * aj * &s_inv[k];
                for i in 0..=j {
                    if let Some(ai) = &blk[i] {
                        let v = ai.dot(&g);
                        schur[(i, j)] += v;
                        if i != j {
                            schur[(j, i)] += v;
                        }
                    }
                }
            }
        }
        let schur = sym(schur);
        let tr = schur.trace().abs().max(1e-300);
        let chol = match schur.clone().cholesky() {
            Some(c) => c,
            None => {
                let reg = &schur + Mat::identity(m, m) * (1e-13 * tr / m.max(1) as f64);
                match reg.cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let x_rd_sinv: Vec<Mat> = (0..x.0.len())
            .map(|k| &x.0[k] * &rd.0[k] * &s_inv[k])
            .collect();
        let a_x_rd_sinv = data.op(&x_rd_sinv);
        let a_sinv = data.op(&s_inv);

        let direction = |rhs: DVector<f64>, target: f64, corr: Option<&[Mat]>| {
            let mut dy = chol.solve(&rhs);
            for _ in 0..2 {
                let r = &rhs - &schur * &dy;
                dy += chol.solve(&r);
            }
            let atdy = data.adjoint(&dy);
            let ds: Vec<Mat> = (0..rd.0.len()).map(|k| &rd.0[k] - &atdy[k]).collect();
            let dx: Vec<Mat> = (0..x.0.len())
                .map(|k| {
                    let mut t = &s_inv[k] * target - &x.0[k] - &x.0[k] * &ds[k] * &s_inv[k];
                    if let Some(c) = corr {
                        t -= &c[k];
                    }
                    sym(t)
                })
                .collect();
            (dx, dy, ds)
        };

        // predictor
        let (dxa, _, dsa) = direction(&data.b + &a_x_rd_sinv, 0.0, None);
        let ap = step_length(&x.0, &dxa, 1.0);
        let ad = step_length(&s.0, &dsa, 1.0);
        let mut mu_aff = 0.0;
        for k in 0..x.0.len() {
            mu_aff += (&x.0[k] + &dxa[k] * ap).dot(&(&s.0[k] + &dsa[k] * ad));
        }
        mu_aff /= nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let corr: Vec<Mat> = (0..x.0.len())
            .map(|k| &dxa[k] * &dsa[k] * &s_inv[k])
            .collect();
        let a_corr = data.op(&corr);
        let rhs = &data.b - &a_sinv * (sigma * mu) + &a_x_rd_sinv + a_corr;
        let (dx, dy, ds) = direction(rhs, sigma * mu, Some(&corr));
        let ap = step_length(&x.0, &dx, settings.step_fraction);
        let ad = step_length(&s.0, &ds, settings.step_fraction);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            break;
        }
        for k in 0..x.0.len() {
            x.0[k] += &dx[k] * ap;
            s.0[k] += &ds[k] * ad;
        }
        y += dy * ad;
    }

    match best {
        Some((merit, yb, g)) if merit <= 1e-7 => {
            let sol = fail(yb, settings.max_iter, g, SdpStatus::Solved);
            if sol.violation <= 1e-8 * (1.0 + c_norm) {
                sol
            } else {
                SdpSolution {
                    status: SdpStatus::NumericalFailure,
                    ..sol
                }
            }
        }
        Some((_, yb, g)) => fail(yb, settings.max_iter, g, SdpStatus::NumericalFailure),
        None => fail(y, settings.max_iter, gap, SdpStatus::NumericalFailure),
    }
}
