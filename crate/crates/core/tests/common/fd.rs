//! Directional finite differences of the first-order maps against the
//! nonlinear identification pipeline.

use nalgebra::DVector;
use rand::Rng;
use ssid_core::asymptotics::{perturbation_maps, PerturbationMaps};
use ssid_core::linalg::{
    block_diag, hstack, spectral_radius, solve_dare, solve_dlyap, sym_sqrt_psd, symmetrize, vec, LyapunovForm, Mat,
};
use ssid_core::model::{CovarianceModel, InnovationsModel};
use ssid_core::sysid::{
    build_hankel, covariance_to_innovations, extract_covariance_model, realize_matrix,
    solve_shift, Realization,
};

const STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

pub struct Point {
    pub real: Realization,
    pub cm: CovarianceModel,
    pub p: Mat,
    pub f: Mat,
    pub b: Mat,
}

pub fn evaluate(r0: &Mat, h: &Mat, nx: usize) -> Point {
    let real = realize_matrix(h, nx).unwrap();
    let cm = extract_covariance_model(&real, r0).unwrap();
    let sol = solve_dare(&cm.a, &cm.d, &cm.c, &cm.r0).unwrap();
    let q = symmetrize(&(&cm.r0 - &cm.c * &sol.p * cm.c.transpose()));
    let f = sym_sqrt_psd(&q);
    let f_inv = f.clone().try_inverse().unwrap();
    let b = (&cm.d - &cm.a * &sol.p * cm.c.transpose()) * f_inv;
    Point {
        real,
        cm,
        p: sol.p,
        f,
        b,
    }
}

pub struct Case {
    pub nx: usize,
    pub ny: usize,
    pub m: usize,
    pub r0: Mat,
    pub h: Mat,
    pub base: Point,
    pub model: InnovationsModel,
    pub maps: PerturbationMaps,
    pub d_r0: Mat,
    pub d_h: Mat,
}

impl Case {
    pub fn input(&self) -> DVector<f64> {
        let mut v = vec(&self.d_r0).as_slice().to_vec();
        v.extend_from_slice(vec(&self.d_h).as_slice());
        DVector::from_vec(v)
    }

    pub fn at(&self, eps: f64) -> Point {
        evaluate(
            &(&self.r0 + &self.d_r0 * eps),
            &(&self.h + &self.d_h * eps),
            self.nx,
        )
    }

    pub fn error_gramian(&self, a_t: &Mat, c_t: &Mat) -> Mat {
        let a_bar = block_diag(&[&self.model.a, a_t]);
        let c_bar = hstack(&[&self.model.c, &(-c_t)]);
        solve_dlyap(&a_bar, &(c_bar.transpose() * &c_bar), LyapunovForm::Observability).unwrap()
    }
}

pub fn min_relative_gap(s: &DVector<f64>, nx: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..nx {
        let next = if i + 1 < s.len() { s[i + 1] } else { 0.0 };
        gap = gap.min((s[i] - next) / s[0]);
    }
    gap
}

pub fn build_case(rng: &mut impl Rng) -> Option<Case> {
    let nx: usize = rng.random_range(1..=3);
    let ny: usize = rng.random_range(1..=2);
    let m_min = (nx.div_ceil(ny) + 1).max(2);
    if m_min > 4 {
        return None;
    }
    let m = rng.random_range(m_min..=4);
    let model = super::random_model(rng, nx, ny);
    let covs = model.covariances(2 * m).ok()?;
    let hankel = build_hankel(&covs, m).ok()?;
    let r0 = covs[0].clone();
    let h = hankel.h;
    let real = realize_matrix(&h, nx).ok()?;
    if min_relative_gap(&real.singular_values, nx) < 0.05 {
        return None;
    }
    let base = evaluate(&r0, &h, nx);
    let model = covariance_to_innovations(&base.cm).ok()?;
    // keep the Riccati map well conditioned: closed loop away from the circle
    if spectral_radius(&(&model.a - &model.k * &model.c)) > 0.9 {
        return None;
    }
    let maps = perturbation_maps(&base.real, &base.cm, &model).ok()?;
    let scale = h.norm().max(r0.norm());
    let g = super::gaussian(rng, ny, ny, 1.0);
    let mut d_r0 = symmetrize(&g);
    let mut d_h = super::gaussian(rng, m * ny, m * ny, 1.0);
    let total = (d_r0.norm_squared() + d_h.norm_squared()).sqrt();
    d_r0 *= scale / total;
    d_h *= scale / total;
    // the largest step must stay inside the set of valid covariance sequences
    let r0_big = &r0 + &d_r0 * STEPS[0];
    let h_big = &h + &d_h * STEPS[0];
    let cm_big = extract_covariance_model(&realize_matrix(&h_big, nx).ok()?, &r0_big).ok()?;
    solve_dare(&cm_big.a, &cm_big.d, &cm_big.c, &cm_big.r0).ok()?;
    Some(Case {
        nx,
        ny,
        m,
        r0,
        h,
        base,
        model,
        maps,
        d_r0,
        d_h,
    })
}

pub fn random_cases(count: usize) -> Vec<Case> {
    let mut rng = super::seeded(20240611);
    let mut out = Vec::new();
    while out.len() < count {
        if let Some(c) = build_case(&mut rng) {
            out.push(c);
        }
    }
    out
}

/// Relative first-order residual `‖Δf − ε·pred‖ / (ε‖pred‖)` at each step.
pub fn residuals(
    pred: &DVector<f64>,
    mut diff: impl FnMut(f64) -> DVector<f64>,
) -> [f64; 3] {
    STEPS.map(|eps| (diff(eps) - pred * eps).norm() / (eps * pred.norm()))
}

pub fn decays_linearly(r: &[f64; 3]) -> bool {
    let ok = |a: f64, b: f64| {
        let ratio = a / b;
        (6.0..=16.0).contains(&ratio)
    };
    ok(r[0], r[1]) && ok(r[1], r[2])
}

pub fn vdiff(a: &Mat, b: &Mat) -> DVector<f64> {
    vec(&(a - b))
}

pub fn failures(cases: &[Case], mut res: impl FnMut(&Case) -> [f64; 3]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let r = res(c);
        if !decays_linearly(&r) {
            out.push(format!(
                "case {i} (nx={}, ny={}, m={}): {:?}",
                c.nx, c.ny, c.m, r
            ));
        }
    }
    out
}

pub fn check(name: &str, cases: &[Case], res: impl FnMut(&Case) -> [f64; 3]) {
    let f = failures(cases, res);
    assert!(f.is_empty(), "{name}: {}", f.join("; "));
}

/// Named maps covered by [`map_residuals`].
pub const MAPS: [&str; 11] = [
    "Pi1", "Pi2", "Xi", "dA", "dC", "dD", "G1", "G2-G3G1", "G4+G5G1", "G2,G3", "G4,G5",
];

/// Residuals of the map called `name` on case `c`. `Xi` draws its input
/// direction from `rng`.
pub fn map_residuals(name: &str, c: &Case, rng: &mut impl Rng) -> [f64; 3] {
    match name {
        "Pi1" => {
            let pred = &c.maps.pi1 * vec(&c.d_h);
            residuals(&pred, |e| vdiff(&c.at(e).real.omega, &c.base.real.omega))
        }
        "Pi2" => {
            let pred = &c.maps.pi2 * vec(&c.d_h);
            residuals(&pred, |e| vdiff(&c.at(e).real.gamma, &c.base.real.gamma))
        }
        "Xi" => {
            let omega = &c.base.real.omega;
            let d_omega = super::gaussian(rng, omega.nrows(), omega.ncols(), omega.norm());
            let a0 = solve_shift(omega, c.ny).unwrap();
            let pred = &c.maps.xi * vec(&d_omega);
            residuals(&pred, |e| {
                vdiff(&solve_shift(&(omega + &d_omega * e), c.ny).unwrap(), &a0)
            })
        }
        "dA" => residuals(&(&c.maps.map_da * c.input()), |e| vdiff(&c.at(e).cm.a, &c.base.cm.a)),
        "dC" => residuals(&(&c.maps.map_dc * c.input()), |e| vdiff(&c.at(e).cm.c, &c.base.cm.c)),
        "dD" => residuals(&(&c.maps.map_dd * c.input()), |e| vdiff(&c.at(e).cm.d, &c.base.cm.d)),
        "G1" => residuals(&(&c.maps.g1 * c.input()), |e| vdiff(&c.at(e).p, &c.base.p)),
        "G2-G3G1" => residuals(&(&c.maps.map_df * c.input()), |e| vdiff(&c.at(e).f, &c.base.f)),
        "G4+G5G1" => residuals(&(&c.maps.map_db * c.input()), |e| vdiff(&c.at(e).b, &c.base.b)),
        // partial maps fed with the exact δP reproduce δF and δB to second order
        "G2,G3" | "G4,G5" => STEPS.map(|eps| {
            let pt = c.at(eps);
            let dp = vdiff(&pt.p, &c.base.p);
            let x = c.input() * eps;
            let (actual, pred) = if name == "G2,G3" {
                (vdiff(&pt.f, &c.base.f), &c.maps.g2 * &x - &c.maps.g3 * &dp)
            } else {
                (vdiff(&pt.b, &c.base.b), &c.maps.g4 * &x + &c.maps.g5 * &dp)
            };
            (&actual - &pred).norm() / pred.norm()
        }),
        _ => panic!("unknown map {name}"),
    }
}

/// Residuals of `M1` against the perturbed error gramian.
pub fn m1_residuals(c: &Case) -> [f64; 3] {
    let pred = &c.maps.m1 * c.input();
    let base = c.error_gramian(&c.base.cm.a, &c.base.cm.c);
    assert!((&base - &c.maps.p_bar).amax() < 1e-10);
    residuals(&pred, |e| {
        let pt = c.at(e);
        vdiff(&c.error_gramian(&pt.cm.a, &pt.cm.c), &base)
    })
}
