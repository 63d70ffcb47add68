use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ssid_core::asymptotics::{asymptotic_covariance, transfer_function_variance};
use ssid_core::error_bounds::{compute_bounds, exact_error_norms, realize_exact, BoundConfig, ErrorSystem, EvaluationMode};
use ssid_core::harness::io::{
    read_model, read_timeseries, write_frequency_response, write_json, write_model,
    write_timeseries, IdentificationInfo,
};
use ssid_core::harness::{run_monte_carlo_with, simulate, MonteCarloConfig, SimulationConfig};
use ssid_core::linalg::FrequencyGrid;
use ssid_core::repair::{identify_with, NormChoice, PipelineOptions};
use ssid_core::sysid::{build_hankel, sample_covariances};
use ssid_core::Error;

#[derive(Parser)]
#[command(name = "ssid", version, about = "Stochastic subspace identification with validity repair and model-error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Two,
    Frobenius,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Identified,
    True,
    None,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an innovations model and write the output series as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Discarded prefix (default: ceil(10/(1-rho)), capped at 10000).
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Identify an innovations model from a CSV time series.
    Identify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        hankel_depth: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Norm::Two)]
        norm: Norm,
    },
    /// F-norm, H2 and H-infinity error bounds for a model.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data_size: usize,
        #[arg(long)]
        confidence: f64,
        #[arg(long)]
        hankel_depth: usize,
        /// Generating model; enables exact errors and coverage flags.
        #[arg(long = "true")]
        truth: Option<PathBuf>,
        /// Where the covariance and perturbation maps are evaluated.
        #[arg(long, value_enum, default_value_t = Mode::Identified)]
        mode: Mode,
        #[arg(long, default_value_t = 4096)]
        quadrature: usize,
        /// Write `omega variance` of the transfer-function estimate.
        #[arg(long)]
        variance_out: Option<PathBuf>,
    },
    /// Seeded Monte Carlo identification study.
    Montecarlo {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        hankel_depth: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        /// Per-run bounds and where they are evaluated.
        #[arg(long, value_enum, default_value_t = Mode::Identified)]
        bounds: Mode,
        #[arg(long)]
        sequential: bool,
    },
    /// Exact H2 and H-infinity norms of the error between two models.
    Norms {
        #[arg(long = "true")]
        truth: PathBuf,
        #[arg(long)]
        identified: PathBuf,
        /// Write `omega gain` of the error system.
        #[arg(long)]
        response_out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch(_)
        | Error::NonSymmetricInput(_)
        | Error::InsufficientData(_)
        | Error::InsufficientLags { .. }
        | Error::Io(_) => 2,
        Error::SolverFailure(_) | Error::PostRepairDareFailure(_) => 3,
        Error::UnstableMatrix(_)
        | Error::DareInfeasible(_)
        | Error::SingularQ
        | Error::RankDeficient(_)
        | Error::IllConditionedShift(_)
        | Error::SingularJ1
        | Error::InfeasibleAtAnyGamma => 4,
    }
}

fn fired(b: bool) -> &'static str {
    if b {
        "fired"
    } else {
        "not fired"
    }
}

fn check_confidence(c: f64) -> ssid_core::Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence {c} is not in (0, 1)")))
    }
}

fn run(cli: Cli) -> ssid_core::Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            n,
            seed,
            out,
            burn_in,
        } => {
            let model = read_model(&model)?;
            let ts = simulate(&SimulationConfig {
                model,
                n,
                seed,
                burn_in,
            })?;
            write_timeseries(&out, &ts)?;
            println!("wrote {} samples of {} channels to {}", ts.len(), ts.n_y(), out.display());
        }
        Command::Identify {
            data,
            order,
            hankel_depth,
            out,
            norm,
        } => {
            let ts = read_timeseries(&data)?;
            if hankel_depth < 2 {
                return Err(Error::InvalidArgument("hankel depth must be at least 2".into()));
            }
            let covs = sample_covariances(&ts, 2 * hankel_depth - 1)?;
            let opts = PipelineOptions {
                norm: match norm {
                    Norm::Two => NormChoice::TwoNorm,
                    Norm::Frobenius => NormChoice::FNorm,
                },
                ..PipelineOptions::default()
            };
            let res = identify_with(build_hankel(&covs, hankel_depth)?, order, &opts)?;
            let info = IdentificationInfo {
                samples: ts.len(),
                hankel_depth,
                singular_values: res.realization.singular_values.iter().copied().collect(),
                stabilized: res.stabilized,
                stabilization_shift: res.stabilization_shift,
                repaired: res.repaired(),
                repair_adjustment: res.repair.as_ref().map(|r| r.adjustment_norms),
            };
            println!("stabilization: {}", fired(res.stabilized));
            if res.stabilized {
                println!("  |A_hat - A_tilde|_F = {:e}", res.stabilization_shift);
            }
            println!("repair: {}", fired(res.repaired()));
            if let Some(r) = &res.repair {
                println!(
                    "  lambda = {:e}, |D_hat - D_tilde|_F = {:e}, |R0_hat - R0_tilde|_F = {:e}",
                    r.lambda, r.adjustment_norms.0, r.adjustment_norms.1
                );
            }
            write_model(&out, &res.model, Some(info))?;
            println!("wrote model of order {} to {}", res.model.n_x(), out.display());
        }
        Command::Bounds {
            model,
            data_size,
            confidence,
            hankel_depth,
            truth,
            mode,
            quadrature,
            variance_out,
        } => {
            check_confidence(confidence)?;
            let doc: ssid_core::harness::io::ModelDoc = ssid_core::harness::io::read_json(&model)?;
            let model_hat = doc.model()?;
            let truth = truth.map(read_model).transpose()?;
            let mode = match mode {
                Mode::True => EvaluationMode::TrueModel,
                Mode::Identified => EvaluationMode::Identified,
                Mode::None => return Err(Error::InvalidArgument("mode none is not valid for bounds".into())),
            };
            let mut cfg = BoundConfig::new(data_size, hankel_depth, confidence);
            cfg.quadrature_points = quadrature;
            cfg.repair_adjust = doc.identification.as_ref().and_then(|i| i.repair_adjustment);
            let r = compute_bounds(&model_hat, truth.as_ref(), mode, &cfg)?;
            println!("confidence {} (chi2 quantile {:.6}, dof {})", r.confidence, r.eps.chi2_quantile, r.eps.dof);
            println!("eps_A {:e}", r.eps.eps_a);
            println!("eps_B {:e}", r.eps.eps_b);
            println!("eps_C {:e}", r.eps.eps_c);
            println!("eps_F {:e}", r.eps.eps_f);
            println!("h2_bound {:.6}", r.h2_bound);
            println!("hinf_bound_perturbative {:.6}", r.hinf_bound_perturbative);
            match &r.lmi_failure {
                None => println!("hinf_bound_lmi {:.6}", r.hinf_bound_lmi),
                Some(why) => println!("hinf_bound_lmi inf ({why})"),
            }
            if let (Some((e2, einf)), Some(cov)) = (r.exact, r.covered) {
                println!("exact_h2_error {e2:.6}");
                println!("exact_hinf_error {einf:.6}");
                println!("covered h2 {} perturbative {} lmi {}", cov[0], cov[1], cov[2]);
            }
            if let Some(path) = variance_out {
                let at = match mode {
                    EvaluationMode::TrueModel => truth.as_ref().expect("checked above"),
                    EvaluationMode::Identified => &model_hat,
                };
                let (_, inn, maps) = realize_exact(at, hankel_depth)?;
                let cov = asymptotic_covariance(&inn, hankel_depth, &FrequencyGrid::new(quadrature))?;
                let omegas: Vec<f64> = (0..512).map(|k| std::f64::consts::PI * k as f64 / 511.0).collect();
                let var = transfer_function_variance(&maps, &cov, data_size, &omegas);
                let pts: Vec<(f64, f64)> = omegas.into_iter().zip(var).collect();
                write_frequency_response(&path, &pts)?;
            }
        }
        Command::Montecarlo {
            model,
            n,
            runs,
            hankel_depth,
            confidence,
            seed,
            out,
            order,
            burn_in,
            bounds,
            sequential,
        } => {
            check_confidence(confidence)?;
            if hankel_depth < 2 {
                return Err(Error::InvalidArgument("hankel depth must be at least 2".into()));
            }
            let model = read_model(&model)?;
            let mut cfg = MonteCarloConfig::new(model, n, hankel_depth, runs, seed);
            cfg.confidence = confidence;
            cfg.n_x = order;
            cfg.burn_in = burn_in;
            cfg.bounds = match bounds {
                Mode::Identified => Some(EvaluationMode::Identified),
                Mode::True => Some(EvaluationMode::TrueModel),
                Mode::None => None,
            };
            let report = run_monte_carlo_with(&cfg, !sequential)?;
            write_json(&out, &report)?;
            let s = &report.summary;
            println!("runs {} valid {} failures {}", s.runs, s.valid, s.failures);
            println!("stabilized {} repaired {}", s.stabilized, s.repaired);
            println!("E2 mean {:.4} std {:.4}", s.mean_e2, s.std_e2);
            println!("Einf mean {:.4} std {:.4}", s.mean_e_inf, s.std_e_inf);
            if s.bound_runs > 0 {
                println!(
                    "coverage over {} runs: h2 {:.3} perturbative {:.3} lmi {:.3}",
                    s.bound_runs, s.coverage[0], s.coverage[1], s.coverage[2]
                );
            }
        }
        Command::Norms {
            truth,
            identified,
            response_out,
        } => {
            let truth = read_model(&truth)?;
            let hat = read_model(&identified)?;
            let (h2, hinf) = exact_error_norms(&truth, &hat)?;
            println!("h2_error {h2:.6}");
            println!("hinf_error {hinf:.6}");
            if let Some(path) = response_out {
                let g = ErrorSystem::new(&truth, &hat)?.transfer_function();
                let pts: Vec<(f64, f64)> = (0..512)
                    .map(|k| {
                        let w = std::f64::consts::PI * k as f64 / 511.0;
                        (w, g.gain(w))
                    })
                    .collect();
                write_frequency_response(&path, &pts)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
