//! Time evolution and static solvers.

mod evolve;
mod multiscale;
mod newton;
mod schedule;

pub use evolve::{euler_step, evolve, evolve_observed, EvolveOptions, EvolveOutcome, Snapshot, StepStats};
pub use multiscale::{multiscale_solve, multiscale_solve_observed, MultiscaleOutcome, SolveRecord};
pub use newton::{newton_solve, newton_to_tolerance, SolverLogEntry, NewtonOutcome, StoppingPolicy};
pub use schedule::{build_schedule, TimeGroups};

use crate::error::Result;
use crate::grid::QuadtreeGrid;
use crate::operators::OperatorSpec;

/// Builds the operator for a given grid; called again after every regrid.
pub type OperatorFactory<'a> = dyn Fn(&QuadtreeGrid) -> Result<OperatorSpec> + 'a;
