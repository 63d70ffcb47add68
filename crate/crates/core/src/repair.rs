//! Validity repair of an estimated covariance model: stability projection of
//! `Ã`, positive-realness check, and the semidefinite program that adjusts
//! `D̃` and `R̃0` so that the Riccati equation has a valid solution.

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_stable, is_stable, max_abs, min_eigenvalue, solve_dare, solve_dlyap,
    spectral_norm, spectral_radius, sym_function, symmetrize, LyapunovForm, Mat, STABILITY_TOL,
};
use crate::model::{CovarianceModel, InnovationsModel};
use crate::sdp::{solve_sdp, Affine, SdpBuilder, SdpProblem, SdpStatus};
use crate::sysid::{
    build_hankel, covariance_to_innovations, extract_covariance_model, realize,
    sample_covariances, HankelEstimate, Realization, TimeSeries,
};

/// Spectral radius bound imposed on the projected state matrix.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1.0 - 1e-4;

/// Strictness slack `δ = 1e-8·(1 + ‖R̃0‖)`.
pub fn strictness_slack(r0: &Mat) -> f64 {
    1e-8 * (1.0 + spectral_norm(r0))
}

fn solve_checked(prob: &SdpProblem) -> Result<crate::sdp::SdpSolution> {
    let sol = solve_sdp(prob);
    match sol.status {
        SdpStatus::Solved => Ok(sol),
        _ => sol.into_result(),
    }
}

/// Projects `Ã` onto matrices with spectral radius at most `margin`:
/// `min ‖Z − ÃW‖_F` over `W ⪰ I` and `[[margin²W, Z], [Zᵀ, W]] ⪰ 0`, then
/// `Â = Z W⁻¹`. Stable inputs are returned unchanged.
pub fn stabilize_with_margin(a_tilde: &Mat, margin: f64) -> Result<Mat> {
    if is_stable(a_tilde) {
        return Ok(a_tilde.clone());
    }
    let n = a_tilde.nrows();
    let mut sb = SdpBuilder::new();
    let w = sb.symmetric(n);
    let z = sb.full(n, n);
    let t = sb.scalar();
    sb.minimize(&t);
    let resid = (&z - &w.lmul(a_tilde)).vectorize();
    let nn = n * n;
    sb.psd(Affine::bmat(&[
        vec![t.clone(), resid.transpose()],
        vec![resid.clone(), t.times(&Mat::identity(nn, nn))],
    ]));
    sb.psd(Affine::bmat(&[
        vec![w.scale(margin * margin), z.clone()],
        vec![z.transpose(), w.clone()],
    ]));
    sb.psd(&w - &Affine::identity(n));
    let prob = sb.build();
    let sol = solve_sdp(&prob);
    // a feasible iterate is enough here; the stability check below guards it
    let usable = match sol.status {
        SdpStatus::Solved => true,
        SdpStatus::NumericalFailure => sol.violation <= 1e-8 && sol.relative_gap <= 1e-3,
        SdpStatus::Infeasible => false,
    };
    if !usable {
        return Err(Error::SolverFailure(format!(
            "stabilization program: {:?}, gap {:.2e}",
            sol.status, sol.relative_gap
        )));
    }
    let wv = symmetrize(&sol.value(&w));
    let zv = sol.value(&z);
    let w_inv = wv
        .cholesky()
        .ok_or_else(|| Error::SolverFailure("stabilization returned singular W".into()))?
        .inverse();
    let a_hat = zv * w_inv;
    let rho = spectral_radius(&a_hat);
    if rho >= 1.0 - STABILITY_TOL {
        return Err(Error::SolverFailure(format!(
            "stabilization left spectral radius {rho:.12}"
        )));
    }
    Ok(a_hat)
}

pub fn stabilize(a_tilde: &Mat) -> Result<Mat> {
    stabilize_with_margin(a_tilde, DEFAULT_STABILITY_MARGIN)
}

/// Outcome of the positive-realness test.
#[derive(Debug, Clone, PartialEq)]
pub enum PositiveReal {
    /// A member of `𝒫`.
    Valid(Mat),
    Invalid,
}

/// Gap matrix `[[P − APAᵀ, D − APCᵀ], [Dᵀ − CPAᵀ, R0 − CPCᵀ]]` as an affine
/// expression in `P`.
fn gap_expression(cm: &CovarianceModel, p: &Affine, d: &Mat, r0: &Mat) -> Affine {
    let g11 = p - &(&(&cm.a * p) * &cm.a.transpose());
    let g12 = &Affine::constant(d.clone()) - &(&(&cm.a * p) * &cm.c.transpose());
    let g22 = &Affine::constant(r0.clone()) - &(&(&cm.c * p) * &cm.c.transpose());
    Affine::bmat(&[vec![g11, g12.clone()], vec![g12.transpose(), g22]])
}

/// Numerical value of the gap matrix at `p`.
pub fn gap_matrix(cm: &CovarianceModel, p: &Mat) -> Mat {
    let (a, c) = (&cm.a, &cm.c);
    let g11 = p - a * p * a.transpose();
    let g12 = &cm.d - a * p * c.transpose();
    let g22 = &cm.r0 - c * p * c.transpose();
    let n = a.nrows();
    let ny = c.nrows();
    let mut g = Mat::zeros(n + ny, n + ny);
    g.view_mut((0, 0), (n, n)).copy_from(&g11);
    g.view_mut((0, n), (n, ny)).copy_from(&g12);
    g.view_mut((n, 0), (ny, n)).copy_from(&g12.transpose());
    g.view_mut((n, n), (ny, ny)).copy_from(&g22);
    symmetrize(&g)
}

/// Decides whether `𝒫` is nonempty: the Riccati equation is tried first and
/// the LMI feasibility problem is solved when it fails.
pub fn check_positive_real(cm: &CovarianceModel) -> Result<PositiveReal> {
    ensure_stable(&cm.a)?;
    if let Ok(sol) = solve_dare(&cm.a, &cm.d, &cm.c, &cm.r0) {
        return Ok(PositiveReal::Valid(sol.p));
    }
    let s = spectral_norm(&cm.r0).max(f64::MIN_POSITIVE);
    let (d, r0) = (&cm.d / s, &cm.r0 / s);
    let n = cm.n_x();
    let delta = strictness_slack(&cm.r0) / s;
    let mut sb = SdpBuilder::new();
    let p = sb.symmetric(n);
    let t = sb.scalar();
    sb.minimize(&-&t);
    let gap = gap_expression(cm, &p, &d, &r0);
    let k = gap.nrows();
    sb.psd(&gap - &t.times(&Mat::identity(k, k)));
    sb.psd(&(&p - &Affine::constant(Mat::identity(n, n) * delta)) - &t.times(&Mat::identity(n, n)));
    sb.psd(&Affine::identity(1) - &t);
    let sol = solve_checked(&sb.build())?;
    let tv = sol.value(&t)[(0, 0)];
    if tv >= -1e-9 {
        Ok(PositiveReal::Valid(sol.value(&p) * s))
    } else {
        Ok(PositiveReal::Invalid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormChoice {
    #[default]
    TwoNorm,
    FNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    /// `P` returned by the program.
    pub p: Mat,
    /// Solution of `P̄ = Â P̄ Âᵀ + Φ11`.
    pub p_bar: Mat,
    pub phi11: Mat,
    pub phi12: Mat,
    pub phi22: Mat,
    /// Optimal objective: the spectral (or Frobenius) norm of the residual
    /// gap, in the units of `R̃0`.
    pub lambda: f64,
    pub d_hat: Mat,
    pub r0_hat: Mat,
    /// `(‖D̂ − D̃‖_F, ‖R̂0 − R̃0‖_F)`.
    pub adjustment_norms: (f64, f64),
}

impl RepairOutcome {
    pub fn delta_d(&self, cm: &CovarianceModel) -> Mat {
        &self.d_hat - &cm.d
    }

    pub fn delta_r0(&self, cm: &CovarianceModel) -> Mat {
        &self.r0_hat - &cm.r0
    }

    pub fn adjusted(&self, cm: &CovarianceModel) -> CovarianceModel {
        CovarianceModel {
            a: cm.a.clone(),
            d: self.d_hat.clone(),
            c: cm.c.clone(),
            r0: self.r0_hat.clone(),
        }
    }
}

/// Closest valid gap: finds `P ⪰ δI` and `Φ ⪰ 0` minimizing the chosen norm
/// of `gap(P) − Φ`, then rebuilds `D̂`, `R̂0` from `Φ`.
pub fn repair(cm: &CovarianceModel, norm_choice: NormChoice) -> Result<RepairOutcome> {
    ensure_stable(&cm.a)?;
    let s = spectral_norm(&cm.r0).max(f64::MIN_POSITIVE);
    let (d, r0) = (&cm.d / s, &cm.r0 / s);
    let n = cm.n_x();
    let ny = cm.n_y();
    let k = n + ny;
    let delta = strictness_slack(&cm.r0) / s;

    let mut sb = SdpBuilder::new();
    let p = sb.symmetric(n);
    let phi = sb.symmetric(k);
    let lam = sb.scalar();
    sb.minimize(&lam);
    let resid = &gap_expression(cm, &p, &d, &r0) - &phi;
    match norm_choice {
        NormChoice::TwoNorm => sb.psd(Affine::bmat(&[
            vec![lam.times(&Mat::identity(k, k)), resid.clone()],
            vec![resid.transpose(), lam.times(&Mat::identity(k, k))],
        ])),
        NormChoice::FNorm => {
            let g = resid.vectorize();
            sb.psd(Affine::bmat(&[
                vec![lam.clone(), g.transpose()],
                vec![g.clone(), lam.times(&Mat::identity(k * k, k * k))],
            ]));
        }
    }
    sb.psd(phi.clone());
    sb.psd(&p - &Affine::constant(Mat::identity(n, n) * delta));
    let sol = solve_checked(&sb.build())?;

    // clip rounding-level negative eigenvalues so Φ is exactly PSD
    let phi_v = sym_function(&sol.value(&phi), |x| x.max(0.0)) * s;
    let phi11 = symmetrize(&phi_v.view((0, 0), (n, n)).into_owned());
    let phi12 = phi_v.view((0, n), (n, ny)).into_owned();
    let phi22 = symmetrize(&phi_v.view((n, n), (ny, ny)).into_owned());
    let p_bar = solve_dlyap(&cm.a, &phi11, LyapunovForm::Controllability)?;
    let d_hat = &cm.a * &p_bar * cm.c.transpose() + &phi12;
    let r0_hat = symmetrize(&(&cm.c * &p_bar * cm.c.transpose() + &phi22));
    let adjustment_norms = ((&d_hat - &cm.d).norm(), (&r0_hat - &cm.r0).norm());
    Ok(RepairOutcome {
        p: symmetrize(&sol.value(&p)) * s,
        p_bar,
        phi11,
        phi12,
        phi22,
        lambda: sol.objective * s,
        d_hat,
        r0_hat,
        adjustment_norms,
    })
}

/// Everything recorded by [`full_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub model: InnovationsModel,
    pub hankel: HankelEstimate,
    pub realization: Realization,
    /// Covariance model straight from the realization.
    pub raw: CovarianceModel,
    /// Model after stabilization (if any), before repair.
    pub stabilized_model: CovarianceModel,
    /// Model actually passed to the final Riccati solve.
    pub final_model: CovarianceModel,
    pub stabilized: bool,
    pub repair: Option<RepairOutcome>,
    /// `‖Â − Ã‖_F` when stabilization fired.
    pub stabilization_shift: f64,
}

impl PipelineResult {
    pub fn repaired(&self) -> bool {
        self.repair.is_some()
    }
}

/// Identification from data: covariances, Hankel realization, stabilization
/// when needed, Riccati solve and, on failure, the repair program.
pub fn full_pipeline(ts: &TimeSeries, m: usize, n_x: usize) -> Result<PipelineResult> {
    let covs = sample_covariances(ts, 2 * m - 1)?;
    let hankel = build_hankel(&covs, m)?;
    identify_from_hankel(hankel, n_x)
}

/// Knobs of the identification pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub norm: NormChoice,
    pub stability_margin: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            norm: NormChoice::TwoNorm,
            stability_margin: DEFAULT_STABILITY_MARGIN,
        }
    }
}

pub fn identify_from_hankel(hankel: HankelEstimate, n_x: usize) -> Result<PipelineResult> {
    identify_with(hankel, n_x, &PipelineOptions::default())
}

pub fn identify_with(
    hankel: HankelEstimate,
    n_x: usize,
    opts: &PipelineOptions,
) -> Result<PipelineResult> {
    let realization = realize(&hankel, n_x)?;
    let raw = extract_covariance_model(&realization, hankel.r0())?;
    let mut cm = raw.clone();
    let mut stabilized = false;
    let mut stabilization_shift = 0.0;
    if !is_stable(&cm.a) {
        let a_hat = stabilize_with_margin(&cm.a, opts.stability_margin)?;
        stabilization_shift = (&a_hat - &raw.a).norm();
        cm.a = a_hat;
        stabilized = true;
    }
    let stabilized_model = cm.clone();
    let direct = if min_eigenvalue(&cm.r0) > 0.0 {
        covariance_to_innovations(&cm)
    } else {
        Err(Error::DareInfeasible("R0 is not positive definite".into()))
    };
    let (model, repair_outcome, final_model) = match direct {
        Ok(model) => (model, None, cm),
        Err(Error::DareInfeasible(_)) | Err(Error::SingularQ) => {
            let out = repair(&cm, opts.norm)?;
            let adjusted = out.adjusted(&cm);
            let model = covariance_to_innovations(&adjusted)
                .map_err(|e| Error::PostRepairDareFailure(e.to_string()))?;
            (model, Some(out), adjusted)
        }
        Err(e) => return Err(e),
    };
    debug_assert!(max_abs(&model.q).is_finite());
    Ok(PipelineResult {
        model,
        hankel,
        realization,
        raw,
        stabilized_model,
        final_model,
        stabilized,
        repair: repair_outcome,
        stabilization_shift,
    })
}
