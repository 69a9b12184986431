use thiserror::Error;

/// Errors produced by the simulator and its tooling.
#[derive(Debug, Error)]
pub enum QtmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wave packet does not fit in the domain: {0}")]
    PacketDoesNotFit(String),

    #[error("states live on different grids")]
    GridMismatch,

    #[error(
        "boundary contamination at t = {time:.4}: edge density fraction {fraction:.3e} exceeds {tolerance:.1e}"
    )]
    BoundaryContamination {
        time: f64,
        fraction: f64,
        tolerance: f64,
    },

    #[error("inconsistent time steps: {0}")]
    StepSize(String),

    #[error("no echo: kick strength {lambda} does not exceed the threshold {lambda_min}")]
    NoEcho { lambda: f64, lambda_min: f64 },

    #[error("insufficient samples after the pulse: {0}")]
    InsufficientSamples(String),

    #[error("bracket [{lo}, {hi}] does not contain an echo threshold crossing")]
    NoBracket { lo: f64, hi: f64 },

    #[error("analytic overlay undefined: {0}")]
    OverlayUndefined(String),

    #[error("sweep failed: {failed} of {total} cells failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("{0}")]
    Config(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QtmError {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            QtmError::InvalidGrid(_)
            | QtmError::InvalidParameter(_)
            | QtmError::PacketDoesNotFit(_)
            | QtmError::StepSize(_)
            | QtmError::OverlayUndefined(_)
            | QtmError::NoBracket { .. }
            | QtmError::Config(_) => 1,
            QtmError::BoundaryContamination { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, QtmError>;
