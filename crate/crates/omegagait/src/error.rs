//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape has {got} joint angles, robot has {expected} joints")]
    ShapeLength { expected: usize, got: usize },

    #[error("joint index {index} out of range for {n_joints} joints")]
    JointIndex { index: usize, n_joints: usize },

    #[error("mean body axis undefined: module headings cancel (|sum| = {norm:.3e})")]
    DegenerateAxis { norm: f64 },

    #[error("force balance did not converge after {iterations} iterations (scaled residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("integration step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("gait path is not closed on the grid axes")]
    OpenPath,

    #[error("trajectory spans {cycles} full cycles; at least 1 required")]
    TooFewCycles { cycles: usize },
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
