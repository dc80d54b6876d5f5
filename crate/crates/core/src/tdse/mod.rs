//! Numerical propagation of a single packet on a uniform 1-D grid.

mod grid;
mod observables;
mod snapshot;
mod solver;

pub use grid::{init_from_packet, init_from_packet_with_tolerance, Boundary, EDGE_AMPLITUDE_TOL, Grid1D, GridState};
pub use observables::{bohmian_trajectories_from_grid, grid_observables, GridField, GridObservables};
pub use snapshot::{from_binary, snapshots_to_csv, to_binary, MAGIC};
pub use solver::{propagate, step, Propagator, StencilOrder};
