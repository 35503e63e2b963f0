//! Command-line pipeline: analyze -> synthesize -> verify -> simulate on
//! JSON plant and controller files.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 structural assumption
//! violation, 3 verification failure, 4 simulation divergence.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coprime::{is_detectable, is_stabilizable, CoprimeFactors, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::geometry::{build_coords, output_degrees, relative_degree};
use crate::model::{to_canonical_json, ControllerFile, PlantFile};
use crate::retrofit::{check_output_rectifying, check_retrofit, synthesize};
use crate::sim::{close_loop, simulate, write_csv, InputSignal};

/// Environment variable overriding the default tolerance for zero tests
/// and residual comparisons.
pub const TOL_ENV_VAR: &str = "RETROFIT_TOL";

const EXIT_OK: i32 = 0;
const EXIT_IO: i32 = 1;
const EXIT_ASSUMPTION: i32 = 2;
const EXIT_VERIFICATION: i32 = 3;
const EXIT_DIVERGENCE: i32 = 4;

#[derive(Parser)]
#[command(
    name = "retrofit",
    about = "Synthesis and verification of retrofit controllers for interconnected linear systems"
)]
struct Cli {
    /// Emit machine-readable JSON reports instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative-degree profile, reordering transform, and coordinate
    /// conditioning of a plant model.
    Analyze {
        model: PathBuf,
        /// Tolerance for Markov-parameter zero tests.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Synthesize a retrofit controller and write it as JSON.
    Synthesize {
        model: PathBuf,
        /// Output controller file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        /// Requested closed-loop decay margin for synthesized gains.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Verify a controller file against a plant model.
    Verify {
        model: PathBuf,
        controller: PathBuf,
        /// Monte Carlo environments to sample.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Base seed for the environment sampler.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Close the loop with a sampled environment and integrate it.
    Simulate {
        model: PathBuf,
        controller: PathBuf,
        #[arg(long, default_value_t = 1)]
        env_seed: u64,
        #[arg(long, default_value_t = 2)]
        env_order: usize,
        /// Initial plant state as comma-separated numbers; a deterministic
        /// pseudo-random state from the environment seed when omitted.
        #[arg(long)]
        x0: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Default tolerance, overridable through the environment.
fn default_tol() -> f64 {
    std::env::var(TOL_ENV_VAR)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1e-8)
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze { model, tol } => {
            cmd_analyze(model, tol.unwrap_or_else(default_tol), cli.json)
        }
        Command::Synthesize {
            model,
            out,
            tol,
            margin,
        } => cmd_synthesize(
            model,
            out,
            tol.unwrap_or_else(default_tol),
            margin.unwrap_or(DEFAULT_MARGIN),
            cli.json,
        ),
        Command::Verify {
            model,
            controller,
            trials,
            seed,
            tol,
        } => cmd_verify(
            model,
            controller,
            *trials,
            *seed,
            tol.unwrap_or_else(default_tol),
            cli.json,
        ),
        Command::Simulate {
            model,
            controller,
            env_seed,
            env_order,
            x0,
            dt,
            t_final,
            out,
        } => cmd_simulate(
            model,
            controller,
            *env_seed,
            *env_order,
            x0.as_deref(),
            *dt,
            *t_final,
            out,
            cli.json,
        ),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::AssumptionViolation(_)
        | Error::Unstabilizable(_)
        | Error::Undetectable(_)
        | Error::NumericalDegeneracy(_) => EXIT_ASSUMPTION,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_IO,
    }
}

fn print_report<T: Serialize>(report: &T, human: &str, json: bool) -> Result<()> {
    if json {
        print!("{}", to_canonical_json(report)?);
    } else {
        println!("{human}");
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    original_degrees: Vec<Option<usize>>,
    reordered_degrees: Vec<usize>,
    capped: Vec<bool>,
    reorder: Vec<Vec<f64>>,
    interconnection_stabilizable: bool,
    interconnection_detectable: bool,
    coordinate_condition: f64,
    assumptions_satisfied: bool,
    message: String,
}

fn cmd_analyze(model: &Path, tol: f64, json: bool) -> Result<i32> {
    let plant = PlantFile::load(model)?;
    let original = output_degrees(&plant, tol);
    let stab = is_stabilizable(plant.a(), plant.l())?;
    let det = is_detectable(plant.a(), plant.gamma())?;

    if plant.v_dim() >= plant.y_dim() {
        let report = AnalyzeReport {
            original_degrees: original,
            reordered_degrees: vec![],
            capped: vec![],
            reorder: vec![],
            interconnection_stabilizable: stab,
            interconnection_detectable: det,
            coordinate_condition: f64::NAN,
            assumptions_satisfied: false,
            message: format!(
                "rectifier synthesis requires m < p (got m = {}, p = {})",
                plant.v_dim(),
                plant.y_dim()
            ),
        };
        print_report(&report, &report.message, json)?;
        return Ok(EXIT_ASSUMPTION);
    }

    match relative_degree(&plant, tol).and_then(|profile| {
        let coords = build_coords(&plant, &profile)?;
        Ok((profile, coords))
    }) {
        Ok((profile, coords)) => {
            let human = format!(
                "relative degrees (original order): {:?}\n\
                 relative degrees (reordered):     {:?} (capped: {:?})\n\
                 reorder transform: {:?}\n\
                 (A, L) stabilizable: {stab}, (Gamma, A) detectable: {det}\n\
                 coordinate condition number: {:.3e}\n\
                 ordering assumptions satisfied",
                original, profile.r, profile.capped, profile.t, coords.cond
            );
            let report = AnalyzeReport {
                original_degrees: original,
                reordered_degrees: profile.r.clone(),
                capped: profile.capped.clone(),
                reorder: (0..profile.t.nrows())
                    .map(|i| (0..profile.t.ncols()).map(|j| profile.t[(i, j)]).collect())
                    .collect(),
                interconnection_stabilizable: stab,
                interconnection_detectable: det,
                coordinate_condition: coords.cond,
                assumptions_satisfied: true,
                message: "ordering assumptions satisfied".into(),
            };
            print_report(&report, &human, json)?;
            Ok(EXIT_OK)
        }
        Err(Error::AssumptionViolation(msg)) | Err(Error::NumericalDegeneracy(msg)) => {
            let report = AnalyzeReport {
                original_degrees: original,
                reordered_degrees: vec![],
                capped: vec![],
                reorder: vec![],
                interconnection_stabilizable: stab,
                interconnection_detectable: det,
                coordinate_condition: f64::NAN,
                assumptions_satisfied: false,
                message: msg.clone(),
            };
            print_report(&report, &msg, json)?;
            Ok(EXIT_ASSUMPTION)
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct SynthesizeReport {
    out: PathBuf,
    kg_yv_residual: f64,
    qhat_abscissa: f64,
    qhat_ghat_yv_abscissa: f64,
    q_identity_residual: f64,
    annihilation_residual: f64,
    design_model_agreement: f64,
    controller_states: usize,
}

fn cmd_synthesize(model: &Path, out: &Path, tol: f64, margin: f64, json: bool) -> Result<i32> {
    let plant = PlantFile::load(model)?;
    let ctrl = synthesize(&plant, tol, margin)?;
    let file = ControllerFile::from_controller(&ctrl, tol, margin);
    file.save(out)?;
    let report = SynthesizeReport {
        out: out.to_path_buf(),
        kg_yv_residual: ctrl.kg_yv_residual,
        qhat_abscissa: ctrl.qhat_abscissa,
        qhat_ghat_yv_abscissa: ctrl.qhat_ghat_yv_abscissa,
        q_identity_residual: ctrl.q_identity_residual,
        annihilation_residual: ctrl.rect.annihilation_residual,
        design_model_agreement: ctrl.rect.ghat_yu_agreement,
        controller_states: ctrl.k.state_dim(),
    };
    let human = format!(
        "controller written to {}\n\
         measurement annihilation residual: {:.3e}\n\
         internal free-parameter abscissa:  {:.3e}\n\
         cross-channel loop abscissa:       {:.3e}\n\
         free-parameter identity residual:  {:.3e}\n\
         controller states: {}",
        out.display(),
        report.kg_yv_residual,
        report.qhat_abscissa,
        report.qhat_ghat_yv_abscissa,
        report.q_identity_residual,
        report.controller_states
    );
    print_report(&report, &human, json)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyReport {
    rectifying_residual: f64,
    rectifying_q_abscissa: f64,
    rectifying_pass: bool,
    constraint_residual: f64,
    qtilde_abscissa: f64,
    invariance_residual: f64,
    trials: usize,
    worst_closed_loop_abscissa: f64,
    sweep_counterexample: Option<SweepReport>,
    pass: bool,
}

#[derive(Serialize)]
struct SweepReport {
    gain: f64,
    row: usize,
    col: usize,
    abscissa: f64,
}

fn cmd_verify(
    model: &Path,
    controller: &Path,
    trials: usize,
    seed: u64,
    tol: f64,
    json: bool,
) -> Result<i32> {
    let plant = PlantFile::load(model)?;
    let k = ControllerFile::load(controller)?.into_realization()?;
    let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN)?;

    let rectifying = check_output_rectifying(&k, &plant, tol)?;
    let verdict = check_retrofit(&k, &plant, &f_wv, tol, trials, seed)?;
    let pass = rectifying.pass && verdict.overall;

    let report = VerifyReport {
        rectifying_residual: rectifying.kg_yv_residual,
        rectifying_q_abscissa: rectifying.q_stability.spectral_abscissa,
        rectifying_pass: rectifying.pass,
        constraint_residual: verdict.constraint_residual,
        qtilde_abscissa: verdict.qtilde_stable.spectral_abscissa,
        invariance_residual: verdict.mwv_invariance_residual,
        trials,
        worst_closed_loop_abscissa: verdict.worst_abscissa(),
        sweep_counterexample: verdict.sweep_counterexample.map(|h| SweepReport {
            gain: h.gain,
            row: h.row,
            col: h.col,
            abscissa: h.abscissa,
        }),
        pass,
    };
    let sweep_line = match &report.sweep_counterexample {
        Some(h) => format!(
            "\ndestabilizing static environment: gain {:.2} at ({}, {}), abscissa {:.3e}",
            h.gain, h.row, h.col, h.abscissa
        ),
        None => String::new(),
    };
    let human = format!(
        "measurement annihilation: residual {:.3e} ({})\n\
         free parameter abscissa: {:.3e}\n\
         constraint residual: {:.3e}\n\
         modified free parameter abscissa: {:.3e}\n\
         interconnection invariance residual: {:.3e}\n\
         Monte Carlo: {} trials, worst closed-loop abscissa {:.3e}{}\n\
         verdict: {}",
        report.rectifying_residual,
        if report.rectifying_pass { "pass" } else { "fail" },
        report.rectifying_q_abscissa,
        report.constraint_residual,
        report.qtilde_abscissa,
        report.invariance_residual,
        trials,
        report.worst_closed_loop_abscissa,
        sweep_line,
        if pass { "PASS" } else { "FAIL" },
    );
    print_report(&report, &human, json)?;
    Ok(if pass { EXIT_OK } else { EXIT_VERIFICATION })
}

#[derive(Serialize)]
struct SimulateReport {
    out: PathBuf,
    steps: usize,
    closed_loop_abscissa: f64,
    final_state_norm: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: &Path,
    controller: &Path,
    env_seed: u64,
    env_order: usize,
    x0: Option<&str>,
    dt: f64,
    t_final: f64,
    out: &Path,
    json: bool,
) -> Result<i32> {
    let plant = PlantFile::load(model)?;
    let k = ControllerFile::load(controller)?.into_realization()?;
    let f_wv = CoprimeFactors::doubly_coprime(&plant.g_wv(), DEFAULT_MARGIN)?;
    let env = f_wv.sample_environment(env_order, env_seed)?;
    let cl = close_loop(&plant, &env.gbar, &k)?;

    let n_total = cl.realization.state_dim();
    let x0_plant: Vec<f64> = match x0 {
        Some(text) => text
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Model(format!("invalid state entry '{tok}'")))
            })
            .collect::<Result<_>>()?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(env_seed ^ 0x5DEECE66D);
            (0..plant.n()).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    };
    if x0_plant.len() != plant.n() {
        return Err(Error::Model(format!(
            "initial state has {} entries, plant has {} states",
            x0_plant.len(),
            plant.n()
        )));
    }
    let mut x0_full = DVector::zeros(n_total);
    for (i, v) in x0_plant.iter().enumerate() {
        x0_full[i] = *v;
    }

    let traj = simulate(&cl, &x0_full, &InputSignal::Zero, dt, t_final)?;
    let mut file = std::fs::File::create(out)?;
    write_csv(&traj, &cl, &mut file)?;

    let report = SimulateReport {
        out: out.to_path_buf(),
        steps: traj.times.len(),
        closed_loop_abscissa: cl.realization.is_hurwitz()?.spectral_abscissa,
        final_state_norm: traj.states.last().map(|x| x.norm()).unwrap_or(0.0),
    };
    let human = format!(
        "trajectory written to {} ({} samples)\n\
         closed-loop spectral abscissa: {:.4}\n\
         final state norm: {:.6e}",
        out.display(),
        report.steps,
        report.closed_loop_abscissa,
        report.final_state_norm
    );
    print_report(&report, &human, json)?;
    Ok(EXIT_OK)
}
