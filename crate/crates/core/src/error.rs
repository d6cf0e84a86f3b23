use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {required} correspondences, got {got}")]
    NotEnoughPoints { required: usize, got: usize },

    /// One 2-column block of the design matrix vanishes; the angles are unobservable.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// The two constraint rows of a minimal sample are linearly dependent.
    #[error("degenerate minimal sample")]
    DegenerateSample,

    /// Neither parameterization branch produced an admissible real root.
    #[error("no real solution on either parameterization branch")]
    NoSolution,

    #[error("robust estimation failed: best hypothesis had {best_inliers} inliers (need {required}) after {iterations} iterations, {solver_failures} solver failures")]
    RobustFailure {
        best_inliers: usize,
        required: usize,
        iterations: usize,
        solver_failures: usize,
    },

    #[error("scene generation failed: {0}")]
    Generation(String),
}

pub type Result<T, E = PoseError> = std::result::Result<T, E>;
