mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use fo_imc::{check_disturbance_rejection, step_response, tune, Error};

use crate::config::{Emit, RunConfig};

/// Tune a fractional-order IMC filter for a first-order-plus-dead-time
/// process so that the loop meets a gain and a phase margin.
#[derive(Debug, Parser)]
#[command(name = "fo-imc", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,

    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,

    /// Outputs to write; overrides `emit` in the configuration.
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Option<Vec<Emit>>,

    /// Print progress and solver diagnostics to stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NO_INTERSECTION: u8 = 4;
const EXIT_MISMATCH: u8 = 5;
const EXIT_OTHER: u8 = 1;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InfeasibleSpec(_) | Error::EmptyFeasibleSet { .. } => EXIT_INFEASIBLE,
        Error::NoIntersection { .. } => EXIT_NO_INTERSECTION,
        Error::VerificationMismatch(_) => EXIT_MISMATCH,
        Error::Domain(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_OTHER,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), u8> {
    std::fs::write(dir.join(name), contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", dir.join(name).display());
        EXIT_OTHER
    })
}

fn run(cli: Cli) -> Result<(), u8> {
    let mut config = RunConfig::load(&cli.config).map_err(|e| {
        eprintln!("error: invalid configuration: {e}");
        EXIT_INVALID_CONFIG
    })?;
    if let Some(dir) = cli.output_dir {
        config.output_dir = dir;
    }
    if let Some(emit) = cli.emit {
        config.emit = emit;
    }
    let verbose = cli.verbose > 0;
    let fail = |e: Error| {
        eprintln!("error: {e}");
        exit_code(&e)
    };

    let spec = config.spec().map_err(fail)?;
    let model = config.model;
    let result = tune(&model, &spec, &config.solver).map_err(fail)?;
    if verbose {
        eprintln!(
            "tuned beta = {:?}, lambda = {:?} ({} root)",
            result.params.beta, result.params.lambda, result.root
        );
        for d in &result.diagnostics {
            eprintln!("  {d}");
        }
    }

    std::fs::create_dir_all(&config.output_dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", config.output_dir.display());
        EXIT_OTHER
    })?;
    let dir = config.output_dir.clone();
    for emit in &config.emit {
        match emit {
            Emit::Report => {
                let disturbance = check_disturbance_rejection(&result.params, model.theta).map_err(fail)?;
                write(&dir, "report.txt", &output::report(&config, &spec, &result, &disturbance, verbose))?;
            }
            Emit::CurvesCsv => {
                write(&dir, "curves.csv", &output::curves_csv(&spec, &model, &result, config.solver.grid_points))?;
            }
            Emit::BodeCsv => write(&dir, "bode.csv", &output::bode_csv(&model, &result).map_err(fail)?)?,
            Emit::StepCsv => {
                let settle = result.params.lambda.powf(1.0 / result.params.beta);
                let horizon = config.step_horizon.unwrap_or(20.0 * model.theta.max(settle));
                let step = step_response(&result.params, model.theta, horizon, config.step_samples).map_err(fail)?;
                write(&dir, "step.csv", &output::step_csv(&step))?;
            }
        }
        if verbose {
            eprintln!("wrote {emit:?}");
        }
    }

    if let Some(msg) = result.margin_mismatch(&spec) {
        eprintln!("error: verification mismatch: {msg}");
        return Err(EXIT_MISMATCH);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
