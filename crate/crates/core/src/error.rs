use thiserror::Error;

/// Advice printed when the λ curves fail to intersect.
pub const NO_INTERSECTION_GUIDANCE: &str =
    "reducing the phase margin and/or increasing the gain margin may result in an intersection \
     of the lambda_a and lambda_b curves";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The open-loop denominator vanished at the requested frequency.
    #[error("open-loop denominator is singular at omega = {omega}")]
    Singularity { omega: f64 },

    /// The robustness specification cannot be designed for.
    #[error("infeasible specification: {0}")]
    InfeasibleSpec(String),

    /// The closed-form gain crossover is not real for this order.
    #[error(
        "gain crossover is not real at beta = {beta} (sin(beta*pi/2) / (2 sin(phi_m/2)) = {ratio} > 1)"
    )]
    NotReal { beta: f64, ratio: f64 },

    /// A boundary function was evaluated exactly on its singular point.
    #[error("branch error: {0}")]
    Branch(String),

    /// The requested boundary does not exist for this phase margin.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A curve sample produced a non-positive filter constant.
    #[error("infeasible sample at beta = {beta}: lambda = {lambda} is not positive")]
    InfeasibleSample { beta: f64, lambda: f64 },

    /// The feasible order set collapsed to nothing.
    #[error("empty feasible beta set for phi_m = {phi_m}")]
    EmptyFeasibleSet { phi_m: f64 },

    #[error("lambda_a and lambda_b curves do not intersect ({detail}); {guidance}")]
    NoIntersection { detail: String, guidance: &'static str },

    #[error("no gain crossover (|L| = 1) inside the sweep")]
    NoGainCrossover,

    #[error("no phase crossover (arg L = -pi) inside the sweep")]
    NoPhaseCrossover,

    /// Achieved margins do not reproduce the requested ones.
    #[error("verification mismatch: {0}")]
    VerificationMismatch(String),

    /// The brute-force oracle could not find an acceptable design.
    #[error("oracle failure: best objective {objective} exceeds {threshold}")]
    OracleFailure { objective: f64, threshold: f64 },

    #[error("quadrature did not converge at t = {time}: estimate {estimate}, change {change}")]
    Integration { time: f64, estimate: f64, change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
