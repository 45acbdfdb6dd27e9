//! Aw-Rascle-Zhang second-order traffic flow on road networks.
//!
//! - [`fundamental`]: pressure law, demand/supply and state conversions per road.
//! - [`junction`]: Riemann solvers for 1-to-1, 1-to-m diverge and 2-to-1 merge junctions.
//! - [`oracle`]: brute-force references for the junction solvers.
//! - [`sim`]: first-order Godunov simulation of a network.

pub mod error;
pub mod fundamental;
pub mod junction;
mod numerics;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use fundamental::{Conserved, RoadParams, TrafficState, VACUUM_DENSITY};
pub use junction::{
    solve, Branch, JunctionInput, JunctionKind, JunctionSolution, JunctionSpec, RoadId,
};
