//! Seeded Monte Carlo identification studies.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::error_bounds::{compute_bounds, exact_error_norms, BoundConfig, EvaluationMode};
use crate::linalg::{h2_norm, hinf_norm};
use crate::model::InnovationsModel;
use crate::repair::{identify_with, PipelineOptions};
use crate::sysid::{build_hankel, sample_covariances};

use super::simulate::{simulate, SimulationConfig, GAUSSIAN_ALGORITHM};

/// Seed of run `index`: the first output of a ChaCha20 stream keyed by
/// `base_seed` and selected by `index`.
pub fn run_seed(base_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub model: InnovationsModel,
    pub n: usize,
    pub m: usize,
    /// Identified order; defaults to the generating order.
    pub n_x: Option<usize>,
    pub runs: usize,
    pub confidence: f64,
    pub base_seed: u64,
    pub burn_in: Option<usize>,
    /// Compute the three error bounds for every run.
    pub bounds: Option<EvaluationMode>,
    pub quadrature_points: usize,
    pub pipeline: PipelineOptions,
}

impl MonteCarloConfig {
    pub fn new(model: InnovationsModel, n: usize, m: usize, runs: usize, base_seed: u64) -> Self {
        MonteCarloConfig {
            model,
            n,
            m,
            n_x: None,
            runs,
            confidence: 0.95,
            base_seed,
            burn_in: None,
            bounds: None,
            quadrature_points: crate::asymptotics::DEFAULT_QUADRATURE_POINTS,
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunBounds {
    pub eps: [f64; 4],
    pub h2: f64,
    pub hinf_perturbative: f64,
    /// `None` when the LMI program produced no certificate.
    pub hinf_lmi: Option<f64>,
    /// `exact ≤ bound` for (H2, perturbative H∞, LMI H∞).
    pub covered: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    /// Stable model with PSD `Q` returned by the pipeline.
    pub valid: bool,
    pub error: Option<String>,
    pub stabilized: bool,
    pub repaired: bool,
    pub repair_adjustment: Option<(f64, f64)>,
    pub h2_error: Option<f64>,
    pub hinf_error: Option<f64>,
    pub e2: Option<f64>,
    pub e_inf: Option<f64>,
    pub bounds: Option<RunBounds>,
    pub bounds_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub failures: usize,
    pub valid: usize,
    pub stabilized: usize,
    pub repaired: usize,
    pub mean_e2: f64,
    pub std_e2: f64,
    pub mean_e_inf: f64,
    pub std_e_inf: f64,
    pub bound_runs: usize,
    /// Fractions of bound runs with exact ≤ bound, in (H2, perturbative, LMI) order.
    pub coverage: [f64; 3],
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Summary {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let e2: Vec<f64> = records.iter().filter_map(|r| r.e2).collect();
        let einf: Vec<f64> = records.iter().filter_map(|r| r.e_inf).collect();
        let (mean_e2, std_e2) = mean_std(&e2);
        let (mean_e_inf, std_e_inf) = mean_std(&einf);
        let with_bounds: Vec<&RunBounds> = records.iter().filter_map(|r| r.bounds.as_ref()).collect();
        let mut coverage = [f64::NAN; 3];
        if !with_bounds.is_empty() {
            for (k, c) in coverage.iter_mut().enumerate() {
                *c = with_bounds.iter().filter(|b| b.covered[k]).count() as f64
                    / with_bounds.len() as f64;
            }
        }
        Summary {
            runs: records.len(),
            failures: records.iter().filter(|r| r.error.is_some()).count(),
            valid: records.iter().filter(|r| r.valid).count(),
            stabilized: records.iter().filter(|r| r.stabilized).count(),
            repaired: records.iter().filter(|r| r.repaired).count(),
            mean_e2,
            std_e2,
            mean_e_inf,
            std_e_inf,
            bound_runs: with_bounds.len(),
            coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub gaussian_algorithm: String,
    pub n: usize,
    pub hankel_depth: usize,
    pub order: usize,
    pub runs: usize,
    pub confidence: f64,
    pub base_seed: u64,
    pub burn_in: Option<usize>,
    pub true_h2: f64,
    pub true_hinf: f64,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

fn run_one(cfg: &MonteCarloConfig, index: usize, norms: (f64, f64)) -> RunRecord {
    let seed = run_seed(cfg.base_seed, index as u64);
    let mut rec = RunRecord {
        index,
        seed,
        valid: false,
        error: None,
        stabilized: false,
        repaired: false,
        repair_adjustment: None,
        h2_error: None,
        hinf_error: None,
        e2: None,
        e_inf: None,
        bounds: None,
        bounds_error: None,
    };
    let n_x = cfg.n_x.unwrap_or(cfg.model.n_x());
    let sim = SimulationConfig {
        model: cfg.model.clone(),
        n: cfg.n,
        seed,
        burn_in: cfg.burn_in,
    };
    let identified = simulate(&sim).and_then(|ts| {
        let covs = sample_covariances(&ts, 2 * cfg.m - 1)?;
        identify_with(build_hankel(&covs, cfg.m)?, n_x, &cfg.pipeline)
    });
    let res = match identified {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.valid = res.model.is_valid();
    rec.stabilized = res.stabilized;
    rec.repaired = res.repaired();
    rec.repair_adjustment = res.repair.as_ref().map(|o| o.adjustment_norms);
    match exact_error_norms(&cfg.model, &res.model) {
        Ok((h2, hinf)) => {
            rec.h2_error = Some(h2);
            rec.hinf_error = Some(hinf);
            rec.e2 = Some(h2 / norms.0);
            rec.e_inf = Some(hinf / norms.1);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    if let Some(mode) = cfg.bounds {
        let mut bc = BoundConfig::new(cfg.n, cfg.m, cfg.confidence);
        bc.quadrature_points = cfg.quadrature_points;
        bc.repair_adjust = rec.repair_adjustment;
        match compute_bounds(&res.model, Some(&cfg.model), mode, &bc) {
            Ok(b) => {
                rec.bounds = Some(RunBounds {
                    eps: b.eps.as_array(),
                    h2: b.h2_bound,
                    hinf_perturbative: b.hinf_bound_perturbative,
                    hinf_lmi: b.lmi.as_ref().map(|l| l.gamma),
                    covered: b.covered.unwrap_or([false; 3]),
                })
            }
            Err(e) => rec.bounds_error = Some(e.to_string()),
        }
    }
    rec
}

pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    run_monte_carlo_with(cfg, true)
}

/// Runs every seed-indexed replication, on the rayon pool when `parallel`.
/// Records are returned in index order either way.
pub fn run_monte_carlo_with(cfg: &MonteCarloConfig, parallel: bool) -> Result<MonteCarloReport> {
    let g = cfg.model.transfer_function();
    let norms = (h2_norm(&g)?, hinf_norm(&g, crate::error_bounds::HINF_REL_TOL)?);
    let records: Vec<RunRecord> = if parallel {
        (0..cfg.runs)
            .into_par_iter()
            .map(|i| run_one(cfg, i, norms))
            .collect()
    } else {
        (0..cfg.runs).map(|i| run_one(cfg, i, norms)).collect()
    };
    let summary = Summary::from_records(&records);
    Ok(MonteCarloReport {
        gaussian_algorithm: GAUSSIAN_ALGORITHM.into(),
        n: cfg.n,
        hankel_depth: cfg.m,
        order: cfg.n_x.unwrap_or(cfg.model.n_x()),
        runs: cfg.runs,
        confidence: cfg.confidence,
        base_seed: cfg.base_seed,
        burn_in: cfg.burn_in,
        true_h2: norms.0,
        true_hinf: norms.1,
        records,
        summary,
    })
}
