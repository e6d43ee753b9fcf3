use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fo_imc::{ProcessModel, RobustnessSpec, SolverOptions};
use serde::Deserialize;

/// Outputs that can be written by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Emit {
    Report,
    BodeCsv,
    StepCsv,
    CurvesCsv,
}

impl Emit {
    pub const ALL: [Emit; 4] = [Emit::Report, Emit::CurvesCsv, Emit::BodeCsv, Emit::StepCsv];
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Gain margin with its unit tag: `"3 abs"` or `"9.54 dB"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain {
    Absolute(f64),
    Decibel(f64),
}

impl Gain {
    pub fn absolute(self) -> f64 {
        match self {
            Gain::Absolute(a) => a,
            Gain::Decibel(db) => 10f64.powf(db / 20.0),
        }
    }
}

/// Phase margin with its unit tag: `"65 deg"` or `"1.1345 rad"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Degrees(f64),
    Radians(f64),
}

impl Phase {
    pub fn radians(self) -> f64 {
        match self {
            Phase::Degrees(d) => d * PI / 180.0,
            Phase::Radians(r) => r,
        }
    }
}

fn split_tagged(s: &str) -> Result<(f64, &str), ConfigError> {
    let mut parts = s.split_whitespace();
    let (Some(value), Some(unit), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(ConfigError(format!("expected \"<number> <unit>\", got {s:?}")));
    };
    let value = value
        .parse::<f64>()
        .map_err(|e| ConfigError(format!("invalid number {value:?} in {s:?}: {e}")))?;
    Ok((value, unit))
}

impl FromStr for Gain {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match split_tagged(s)? {
            (v, "abs") => Ok(Gain::Absolute(v)),
            (v, "dB" | "db") => Ok(Gain::Decibel(v)),
            (_, unit) => Err(ConfigError(format!("unknown gain unit {unit:?}; use \"abs\" or \"dB\""))),
        }
    }
}

impl FromStr for Phase {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match split_tagged(s)? {
            (v, "deg") => Ok(Phase::Degrees(v)),
            (v, "rad") => Ok(Phase::Radians(v)),
            (_, unit) => Err(ConfigError(format!("unknown phase unit {unit:?}; use \"deg\" or \"rad\""))),
        }
    }
}

/// On-disk layout: a flat TOML table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    k: f64,
    tau: f64,
    theta: f64,
    gain_margin: String,
    phase_margin: String,
    grid_points: Option<usize>,
    refine_tol: Option<f64>,
    max_bisections: Option<usize>,
    complementary_root: Option<bool>,
    output_dir: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
    step_horizon: Option<f64>,
    step_samples: Option<usize>,
}

/// Validated run configuration. Spec validation is left to the solver so
/// infeasible margins surface with their own exit code.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ProcessModel,
    pub gain: Gain,
    pub phase: Phase,
    pub solver: SolverOptions,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
    pub step_horizon: Option<f64>,
    pub step_samples: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        let model = ProcessModel::new(raw.k, raw.tau, raw.theta).map_err(|e| ConfigError(e.to_string()))?;
        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            grid_points: raw.grid_points.unwrap_or(defaults.grid_points),
            refine_tol: raw.refine_tol.unwrap_or(defaults.refine_tol),
            max_bisections: raw.max_bisections.unwrap_or(defaults.max_bisections),
            complementary_root: raw.complementary_root.unwrap_or(defaults.complementary_root),
        };
        solver.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(RunConfig {
            model,
            gain: raw.gain_margin.parse()?,
            phase: raw.phase_margin.parse()?,
            solver,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            emit: raw.emit.unwrap_or_else(|| Emit::ALL.to_vec()),
            step_horizon: raw.step_horizon,
            step_samples: raw.step_samples.unwrap_or(1001),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn spec(&self) -> fo_imc::Result<RobustnessSpec> {
        RobustnessSpec::new(self.gain.absolute(), self.phase.radians())
    }
}
