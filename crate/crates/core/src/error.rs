use thiserror::Error;

/// Errors raised by the spectral operators, the flow-map machinery and the integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("multiplier is not finite at lattice mode {mode:?}")]
    InvalidMultiplier { mode: Vec<i64> },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("chart exit: min det(dphi) = {min_det:.6e} <= floor {floor}")]
    ChartExit { min_det: f64, floor: f64 },

    #[error("Newton inversion did not converge at {failed} grid point(s) (worst residual {worst_residual:.3e})")]
    InversionDiverged { failed: usize, worst_residual: f64 },

    #[error("conjugated elliptic solve did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    EllipticSolveDiverged { iterations: usize, residual: f64 },

    #[error("velocity is not divergence free (||div u|| = {norm:.3e}, tolerance {tol:.1e})")]
    NotDivergenceFree { norm: f64, tol: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("polynomial fit of degree {degree} is ill-conditioned: {reason}")]
    DegreeTooHigh { degree: usize, reason: String },

    #[error("velocity provider has no sample at t = {0}")]
    MissingSample(f64),

    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl FlowError {
    /// Short tag used in diagnostics and run manifests.
    pub fn tag(&self) -> &'static str {
        match self {
            FlowError::InvalidGrid(_) => "InvalidGrid",
            FlowError::InvalidField(_) => "InvalidField",
            FlowError::InvalidMultiplier { .. } => "InvalidMultiplier",
            FlowError::GridMismatch => "GridMismatch",
            FlowError::ChartExit { .. } => "ChartExit",
            FlowError::InversionDiverged { .. } => "InversionDiverged",
            FlowError::EllipticSolveDiverged { .. } => "EllipticSolveDiverged",
            FlowError::NotDivergenceFree { .. } => "NotDivergenceFree",
            FlowError::NonFinite { .. } => "NonFinite",
            FlowError::DegreeTooHigh { .. } => "DegreeTooHigh",
            FlowError::MissingSample(_) => "MissingSample",
            FlowError::Snapshot(_) => "Snapshot",
        }
    }
}

pub type Result<T> = std::result::Result<T, FlowError>;
