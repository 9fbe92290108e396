//! One-dimensional Hughes-type crowd evacuation with a moving turning point.

// `!(a <= b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod godunov;
pub mod io;
pub mod mesh;
pub mod model;
pub mod operators;
pub mod pwl;
pub mod riemann;

pub use coupled::{picard_iterate, run_coupled, CoupledRun, Diagnostics, PicardResult};
pub use diagnostics::{convergence_study, ConvergenceTable};
pub use error::{Error, Result};
pub use evolution::{run_frozen_xi, RunOutput};
pub use io::{load_scenario, parse_scenario, simulate_to_dir};
pub use model::{validate_scenario, CorridorModel, FluxModel, Scenario};
pub use riemann::exact_lwr_riemann;
