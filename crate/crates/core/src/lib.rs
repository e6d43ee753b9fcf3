//! Fractional-order IMC filter tuning for first-order-plus-dead-time
//! processes from gain and phase margin requirements.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feasibility;
pub mod model;
pub mod solver;
pub mod verification;

pub use error::{Error, Result, NO_INTERSECTION_GUIDANCE};
pub use feasibility::{feasible_beta_set, BetaFeasibleSet, BetaInterval, FeasibleCase};
pub use model::{FoFilter, ProcessModel, RobustnessSpec};
pub use solver::{tune, SolverOptions, TuningResult};
pub use verification::{
    brute_force_tune, check_disturbance_rejection, measure_margins, step_response, FrequencySweep, MarginReport,
};
