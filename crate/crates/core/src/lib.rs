//! Bohmian trajectories and interference of Gaussian wave packets in one dimension.
//!
//! The crate covers analytic free packets and their two-packet superpositions,
//! trajectory ensembles integrated through any [`VelocityField`], effective
//! wall/well potentials, a Crank-Nicolson grid solver, and the scenario layer
//! used by the `qtraj` command line tool.

pub mod error;
pub mod field;
pub mod integrator;
pub mod io;
pub mod potential;
pub mod quadrature;
pub mod scenario;
pub mod superposition;
pub mod tdse;
pub mod trajectory;
pub mod wavepacket;

pub use error::{FieldError, ParamError, PotentialError, SuperpositionError, TdseError, TrajectoryError};
pub use field::{VelocityField, RHO_FLOOR};
pub use integrator::IntegratorConfig;
pub use potential::{PotentialSpec, Segment, SegmentKind, TimeDependence};
pub use superposition::{BoundaryLine, FieldSample, Strictness, Superposition, SymmetricParams};
pub use tdse::{Boundary, Grid1D, GridState};
pub use trajectory::{SamplingKind, SamplingStrategy, TrajectoryEnsemble};
pub use wavepacket::{GaussianPacket, Regime, RegimeThresholds, UnitSystem};
