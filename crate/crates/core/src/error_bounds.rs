//! Model-error bounds for an identified innovations model: the explicit H2
//! bound built on the error-system gramian, the perturbative H∞ bound, and
//! the robust bounded-real program over the Frobenius-norm uncertainty box.

use crate::asymptotics::{
    asymptotic_covariance, fnorm_bounds, perturbation_maps, propagated_norm_sq,
    AsymptoticCovariance, FNormBounds, PerturbationMaps, DEFAULT_QUADRATURE_POINTS,
};
use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, ensure_stable, h2_norm, hinf_norm, hstack, inverse, kron, max_abs, spectral_norm,
    vstack, FrequencyGrid, Mat, TransferFunction,
};
use crate::model::InnovationsModel;
use crate::sdp::{solve_sdp, Affine, SdpBuilder, SdpStatus};
use crate::sysid::{
    build_hankel, covariance_to_innovations, extract_covariance_model, realize, Realization,
};

/// Relative accuracy used for every H∞ norm evaluation in this module.
pub const HINF_REL_TOL: f64 = 1e-6;

/// `G_e − G̃_e` as one state-space system.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub f: Mat,
}

impl ErrorSystem {
    pub fn new(true_model: &InnovationsModel, model_hat: &InnovationsModel) -> Result<Self> {
        if true_model.n_y() != model_hat.n_y() {
            return Err(Error::DimensionMismatch(format!(
                "outputs {} vs {}",
                true_model.n_y(),
                model_hat.n_y()
            )));
        }
        Ok(ErrorSystem {
            a: block_diag(&[&true_model.a, &model_hat.a]),
            b: vstack(&[&true_model.b(), &model_hat.b()]),
            c: hstack(&[&true_model.c, &(-&model_hat.c)]),
            f: true_model.f() - model_hat.f(),
        })
    }

    pub fn from_parts(truth: [&Mat; 4], hat: [&Mat; 4]) -> Self {
        ErrorSystem {
            a: block_diag(&[truth[0], hat[0]]),
            b: vstack(&[truth[1], hat[1]]),
            c: hstack(&[truth[2], &(-hat[2])]),
            f: truth[3] - hat[3],
        }
    }

    pub fn is_stable(&self) -> bool {
        crate::linalg::is_stable(&self.a)
    }

    pub fn transfer_function(&self) -> TransferFunction {
        TransferFunction {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.f.clone(),
        }
    }
}

/// `(‖G_e − G̃_e‖_{H2}, ‖G_e − G̃_e‖_∞)`.
pub fn exact_error_norms(
    true_model: &InnovationsModel,
    model_hat: &InnovationsModel,
) -> Result<(f64, f64)> {
    ensure_stable(&true_model.a)?;
    ensure_stable(&model_hat.a)?;
    let sys = ErrorSystem::new(true_model, model_hat)?;
    system_norms(&sys)
}

/// H2 and H∞ norms of an error system given by its parts.
pub fn system_norms(sys: &ErrorSystem) -> Result<(f64, f64)> {
    let g = sys.transfer_function();
    let h2 = h2_norm(&g)?;
    if h2 == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((h2, hinf_norm(&g, HINF_REL_TOL)?))
}

/// Result of the H2 bound with its intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct H2Bound {
    pub bound: f64,
    pub dp1_bound: f64,
    pub dp2_bound: f64,
    pub p_bar_norm: f64,
    pub b_bar_norm: f64,
}

/// H2 bound at the linearization point stored in `maps`:
/// `‖δF‖² + ‖δB‖²‖P̄‖_F + 2‖B̄‖_F‖δB‖‖δP1‖ + ‖B̄‖_F²‖δP2‖`, each norm
/// replaced by its bound.
pub fn h2_error_bound(
    bounds: &FNormBounds,
    cov: &AsymptoticCovariance,
    maps: &PerturbationMaps,
) -> Result<H2Bound> {
    let model = &maps.model;
    ensure_stable(&model.a)?;
    let a_bar = block_diag(&[&model.a, &model.a]);
    let b = model.b();
    let b_bar = vstack(&[&b, &b]);
    let p_bar_norm = maps.p_bar.norm();
    let b_bar_norm = b_bar.norm();
    let scale = bounds.chi2_quantile / bounds.n as f64;
    let dp1 = (scale * propagated_norm_sq(&maps.m1, &cov.sqrt())).sqrt();
    let n2 = a_bar.nrows();
    let abt = a_bar.transpose();
    let lyap = kron(&abt, &abt) - Mat::identity(n2 * n2, n2 * n2);
    let lyap_inv_norm = spectral_norm(&inverse(&lyap).map_err(|_| Error::SingularJ1)?);
    let (ea, eb, ec, ef) = (bounds.eps_a, bounds.eps_b, bounds.eps_c, bounds.eps_f);
    let dp2 = lyap_inv_norm * (2.0 * a_bar.norm() * dp1 * ea + p_bar_norm * ea * ea + ec * ec);
    let sq = ef * ef + eb * eb * p_bar_norm + 2.0 * b_bar_norm * eb * dp1 + b_bar_norm.powi(2) * dp2;
    Ok(H2Bound {
        bound: sq.max(0.0).sqrt(),
        dp1_bound: dp1,
        dp2_bound: dp2,
        p_bar_norm,
        b_bar_norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeHinf {
    pub bound: f64,
    /// `‖C̃(e^{iω}I − Ã)⁻¹‖_∞`.
    pub cr_norm: f64,
    /// `‖(e^{iω}I − Ã)⁻¹B̃‖_∞`.
    pub rb_norm: f64,
}

/// `‖C̃R‖_∞ ε_A ‖RB̃‖_∞ + ε_F + ε_C ‖RB̃‖_∞ + ‖C̃R‖_∞ ε_B` with
/// `R = (e^{iω}I − Ã)⁻¹`.
pub fn hinf_error_bound_perturbative(
    model_hat: &InnovationsModel,
    bounds: &FNormBounds,
) -> Result<PerturbativeHinf> {
    ensure_stable(&model_hat.a)?;
    let n = model_hat.n_x();
    let ny = model_hat.n_y();
    let cr = TransferFunction::new(
        model_hat.a.clone(),
        Mat::identity(n, n),
        model_hat.c.clone(),
        Mat::zeros(ny, n),
    )?;
    let rb = TransferFunction::new(
        model_hat.a.clone(),
        model_hat.b(),
        Mat::identity(n, n),
        Mat::zeros(n, ny),
    )?;
    let cr_norm = hinf_norm(&cr, HINF_REL_TOL)?;
    let rb_norm = hinf_norm(&rb, HINF_REL_TOL)?;
    let bound = cr_norm * bounds.eps_a * rb_norm
        + bounds.eps_f
        + bounds.eps_c * rb_norm
        + cr_norm * bounds.eps_b;
    Ok(PerturbativeHinf {
        bound,
        cr_norm,
        rb_norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiHinf {
    pub gamma: f64,
    /// Multipliers of the active channels, in `(A, B, C, F)` order.
    pub mu: Vec<f64>,
    pub p: Mat,
    /// Largest constraint violation at the returned point.
    pub violation: f64,
}

/// Robust bounded-real program: minimize `γ̄²` over `P ≻ 0`, `μ_k > 0` such
/// that the robust bounded-real LMI holds for `M̃ = [[𝒜̃, ℬ̃], [𝒞̃, 0]]` with
/// `𝒜̃ = diag(Ã, Ã)`, `ℬ̃ = [B̃; B̃]`, `𝒞̃ = [C̃, −C̃]` and one uncertainty
/// channel per nonzero `ε_k`.
pub fn hinf_error_bound_lmi(model_hat: &InnovationsModel, bounds: &FNormBounds) -> Result<LmiHinf> {
    ensure_stable(&model_hat.a)?;
    let n = model_hat.n_x();
    let ny = model_hat.n_y();
    let s = 2 * n + ny;
    let eps = bounds.as_array();
    if eps.iter().all(|&e| e == 0.0) {
        return Ok(LmiHinf {
            gamma: 0.0,
            mu: Vec::new(),
            p: Mat::zeros(2 * n, 2 * n),
            violation: 0.0,
        });
    }
    let a = &model_hat.a;
    let b = model_hat.b();
    let c = &model_hat.c;
    let mut m_tilde = Mat::zeros(s, s);
    m_tilde.view_mut((0, 0), (n, n)).copy_from(a);
    m_tilde.view_mut((n, n), (n, n)).copy_from(a);
    m_tilde.view_mut((0, 2 * n), (n, ny)).copy_from(&b);
    m_tilde.view_mut((n, 2 * n), (n, ny)).copy_from(&b);
    m_tilde.view_mut((2 * n, 0), (ny, n)).copy_from(c);
    m_tilde.view_mut((2 * n, n), (ny, n)).copy_from(&(-c));

    // (row block, width, column block, height) of δA, δB, δC, δF in M̃
    let row_start = [0, 0, 2 * n, 2 * n];
    let row_dim = [n, n, ny, ny];
    let col_start = [0, 2 * n, 0, 2 * n];
    let col_dim = [n, ny, n, ny];
    let mut hs = Vec::new();
    let mut es = Vec::new();
    for k in 0..4 {
        if eps[k] == 0.0 {
            continue;
        }
        let r = eps[k].sqrt();
        let mut h = Mat::zeros(s, row_dim[k]);
        h.view_mut((row_start[k], 0), (row_dim[k], row_dim[k]))
            .copy_from(&(Mat::identity(row_dim[k], row_dim[k]) * r));
        let mut e = Mat::zeros(col_dim[k], s);
        e.view_mut((0, col_start[k]), (col_dim[k], col_dim[k]))
            .copy_from(&(Mat::identity(col_dim[k], col_dim[k]) * r));
        hs.push(h);
        es.push(e);
    }
    let kk = hs.len();

    let mut sb = SdpBuilder::new();
    let p = sb.symmetric(2 * n);
    let g = sb.scalar();
    let mus: Vec<Affine> = (0..kk).map(|_| sb.scalar()).collect();
    sb.minimize(&g);
    let w = Affine::block_diag(&[p.clone(), Affine::identity(ny)]);
    let mut lower = -&Affine::block_diag(&[p.clone(), g.times(&Mat::identity(ny, ny))]);
    for (mu, e) in mus.iter().zip(&es) {
        lower = &lower + &mu.times(&(e.transpose() * e));
    }
    let wm = w.rmul(&m_tilde);
    let mut first = vec![-&w, wm.clone()];
    let mut second = vec![wm.transpose(), lower];
    for h in &hs {
        first.push(w.rmul(h));
        second.push(Affine::zeros(s, h.ncols()));
    }
    let mut rows = vec![first, second];
    for (i, h) in hs.iter().enumerate() {
        let mut row = vec![w.rmul(h).transpose(), Affine::zeros(h.ncols(), s)];
        for (j, hj) in hs.iter().enumerate() {
            if i == j {
                row.push(-&mus[i].times(&Mat::identity(h.ncols(), h.ncols())));
            } else {
                row.push(Affine::zeros(h.ncols(), hj.ncols()));
            }
        }
        rows.push(row);
    }
    let lmi = Affine::bmat(&rows);
    let size = lmi.nrows();
    let delta = 1e-8 * (1.0 + max_abs(&m_tilde));
    sb.psd(&(-&lmi) - &Affine::constant(Mat::identity(size, size) * delta));
    sb.psd(&p - &Affine::constant(Mat::identity(2 * n, 2 * n) * delta));
    for mu in &mus {
        sb.psd(mu - &Affine::constant(Mat::from_element(1, 1, delta)));
    }
    let prob = sb.build();
    let sol = solve_sdp(&prob);
    let usable = match sol.status {
        SdpStatus::Solved => true,
        // any strictly feasible point certifies its own γ̄
        SdpStatus::NumericalFailure => sol.violation <= 1e-9 && sol.relative_gap <= 1e-4,
        SdpStatus::Infeasible => return Err(Error::InfeasibleAtAnyGamma),
    };
    if !usable {
        return Err(Error::SolverFailure(format!(
            "robust bounded-real program: gap {:.2e}, violation {:.2e}",
            sol.relative_gap, sol.violation
        )));
    }
    let gsq = sol.value(&g)[(0, 0)];
    Ok(LmiHinf {
        gamma: gsq.max(0.0).sqrt(),
        mu: mus.iter().map(|mu| sol.value(mu)[(0, 0)]).collect(),
        p: sol.value(&p),
        violation: prob.violation(&sol.y),
    })
}

/// Exact covariances of `model`, their Hankel realization of order `n_x`
/// and the covariance model extracted from it. The realized model is in the
/// singular-vector basis used by identification.
pub fn realize_exact(model: &InnovationsModel, m: usize) -> Result<(Realization, InnovationsModel, PerturbationMaps)> {
    let covs = model.covariances(2 * m)?;
    let hankel = build_hankel(&covs, m)?;
    let real = realize(&hankel, model.n_x())?;
    let cm = extract_covariance_model(&real, hankel.r0())?;
    let inn = covariance_to_innovations(&cm)?;
    let maps = perturbation_maps(&real, &cm, &inn)?;
    Ok((real, inn, maps))
}

/// Where the covariance and the perturbation maps are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluationMode {
    /// At the identified model (deployment).
    Identified,
    /// At the generating model (simulation studies).
    TrueModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub n: usize,
    pub m: usize,
    pub confidence: f64,
    pub quadrature_points: usize,
    /// `(‖D̂ − D̃‖_F, ‖R̂0 − R̃0‖_F)` when repair fired.
    pub repair_adjust: Option<(f64, f64)>,
}

impl BoundConfig {
    pub fn new(n: usize, m: usize, confidence: f64) -> Self {
        BoundConfig {
            n,
            m,
            confidence,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
            repair_adjust: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub h2_bound: f64,
    pub hinf_bound_perturbative: f64,
    pub hinf_bound_lmi: f64,
    pub confidence: f64,
    pub eps: FNormBounds,
    pub h2: H2Bound,
    pub perturbative: PerturbativeHinf,
    /// `None` when no robust bounded-real certificate exists or the solver
    /// could not produce one; `hinf_bound_lmi` is then infinite.
    pub lmi: Option<LmiHinf>,
    pub lmi_failure: Option<String>,
    pub p_bar: Mat,
    pub mode: EvaluationMode,
    /// Exact `(H2, H∞)` error when the true model is supplied.
    pub exact: Option<(f64, f64)>,
    /// `exact ≤ bound` for (H2, perturbative H∞, LMI H∞).
    pub covered: Option<[bool; 3]>,
}

/// F-norm bounds, the H2 bound and both H∞ bounds for `model_hat`.
/// With `truth` given, exact error norms and coverage flags are recorded;
/// [`EvaluationMode::TrueModel`] additionally evaluates the covariance and
/// maps at the truth.
pub fn compute_bounds(
    model_hat: &InnovationsModel,
    truth: Option<&InnovationsModel>,
    mode: EvaluationMode,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    ensure_stable(&model_hat.a)?;
    let at = match (mode, truth) {
        (EvaluationMode::TrueModel, Some(t)) => t,
        (EvaluationMode::TrueModel, None) => {
            return Err(Error::InvalidArgument(
                "true-model evaluation needs the true model".into(),
            ))
        }
        (EvaluationMode::Identified, _) => model_hat,
    };
    let (_, inn, maps) = realize_exact(at, cfg.m)?;
    let cov = asymptotic_covariance(&inn, cfg.m, &FrequencyGrid::new(cfg.quadrature_points))?;
    let eps = fnorm_bounds(&cov, &maps, cfg.n, cfg.confidence, cfg.repair_adjust);
    let h2 = h2_error_bound(&eps, &cov, &maps)?;
    let perturbative = hinf_error_bound_perturbative(model_hat, &eps)?;
    let (lmi, lmi_failure) = match hinf_error_bound_lmi(model_hat, &eps) {
        Ok(l) => (Some(l), None),
        Err(e @ (Error::InfeasibleAtAnyGamma | Error::SolverFailure(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let lmi_gamma = lmi.as_ref().map_or(f64::INFINITY, |l| l.gamma);
    let exact = match truth {
        Some(t) => Some(exact_error_norms(t, model_hat)?),
        None => None,
    };
    let covered = exact.map(|(e2, einf)| {
        [
            e2 <= h2.bound,
            einf <= perturbative.bound,
            einf <= lmi_gamma,
        ]
    });
    Ok(BoundReport {
        h2_bound: h2.bound,
        hinf_bound_perturbative: perturbative.bound,
        hinf_bound_lmi: lmi_gamma,
        confidence: cfg.confidence,
        p_bar: maps.p_bar.clone(),
        eps,
        h2,
        perturbative,
        lmi,
        lmi_failure,
        mode,
        exact,
        covered,
    })
}
