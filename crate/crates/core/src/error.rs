use thiserror::Error;

/// A physical or numerical parameter failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter `{field}`: {message}")]
pub struct ParamError {
    pub field: String,
    pub message: String,
}

impl ParamError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Errors raised while evaluating a velocity field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("density {rho:e} below node floor at x={x}, t={t}")]
    NearNode { x: f64, t: f64, rho: f64 },
    #[error("point x={x}, t={t} lies outside the field domain")]
    OutOfDomain { x: f64, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuperpositionError {
    #[error("centroids move in parallel; they never coincide")]
    ParallelCentroids,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("trajectory {index}: node encountered at t={t}, x={x}")]
    NodeEncounter { index: usize, x: f64, t: f64 },
    #[error("trajectory {index}: step control failed at t={t}: {reason}")]
    StepFailure { index: usize, t: f64, reason: String },
    #[error("trajectory {index}: left the field domain at t={t}, x={x}")]
    OutOfDomain { index: usize, x: f64, t: f64 },
    #[error("initial overlap {overlap:e} exceeds threshold {threshold:e}")]
    OverlapTooLarge { overlap: f64, threshold: f64 },
    #[error("fit window holds {samples} samples; at least 5 are required")]
    WindowTooShort { samples: usize },
    #[error("{} trajectories failed; first: {}", .0.len(), .0[0])]
    Ensemble(Vec<TrajectoryError>),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("momentum must be positive, got {0}")]
    NonpositiveMomentum(f64),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdseError {
    #[error("packet tail reaches the grid boundary (|psi|={amplitude:e} at x={x})")]
    PacketTouchesBoundary { x: f64, amplitude: f64 },
    #[error("linear solver hit a zero pivot at row {row}")]
    SolverSingular { row: usize },
    #[error("time step too large: dt*max|V|/hbar = {ratio} >= 0.5")]
    StepTooLarge { ratio: f64 },
    #[error("snapshots are not on a common grid or are out of time order")]
    IncompatibleSnapshots,
    #[error(transparent)]
    Param(#[from] ParamError),
}
