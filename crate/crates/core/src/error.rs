use thiserror::Error;

/// Errors produced by the relaxation, gradient and harness routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("activation `{0}` has no second derivative")]
    UnsupportedActivation(&'static str),

    #[error("non-finite value during {phase} at step {step}")]
    Divergence { phase: &'static str, step: usize },

    #[error("{phase} phase did not converge after {steps} steps (residual {residual:e})")]
    NotConverged {
        phase: &'static str,
        steps: usize,
        residual: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("error process unstable: norm grew for {streak} consecutive steps (step {step})")]
    Instability { step: usize, streak: usize },

    #[error("perturbed relaxation for {entry} left the basin (distance {distance:e})")]
    BasinJump { entry: String, distance: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}, sample {sample}")]
    TrainingDiverged { epoch: usize, sample: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(what: impl Into<String>, expected: usize, got: usize) -> Error {
    Error::Shape {
        what: what.into(),
        expected,
        got,
    }
}
