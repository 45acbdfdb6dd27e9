//! Command-line front end for `arznet`: scenario files, single-junction
//! solves, network simulations, the capacity-drop sweep at a merge and dumps
//! of the admissible flux set.

pub mod commands;
pub mod error;
pub mod scenario;

pub use commands::{
    capacity_drop, cmd_capacity_drop, cmd_pareto_dump, cmd_simulate, cmd_solve, CapacityDropRow, DropMode,
    SimOverrides, CAPACITY_DROP_SWEEP,
};
pub use error::{CliError, CliResult};
pub use scenario::{capacity_drop_scenario, ScenarioFile};
