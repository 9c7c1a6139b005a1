use crate::C64;

/// Every failure mode of the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shifted matrix sI - A is numerically singular at s = {shift}")]
    SingularShift { shift: C64 },

    #[error("eigenvalues are not numerically distinct (gap {gap:e} below {tol:e})")]
    DefectiveSystem { gap: f64, tol: f64 },

    #[error("point {point} is not in the open pole domain")]
    OutsideDomain { point: C64 },

    #[error("point {point} lies on a branch cut")]
    BranchCutHit { point: C64 },

    #[error("point {point} is a pole")]
    PoleHit { point: C64 },

    #[error("wrong regime: {0}")]
    WrongRegime(String),

    #[error("quadrature did not converge within {evaluations} evaluations (error estimate {estimate:e})")]
    QuadratureNoConvergence { evaluations: usize, estimate: f64 },

    #[error("projection basis has numerical rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("W*V is ill conditioned (condition number {condition:e})")]
    IllConditionedProjection { condition: f64 },

    #[error("reduced pole {pole} left the pole domain at iteration {iteration}")]
    PoleEscapedDomain { iteration: usize, pole: C64 },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid shifts: {0}")]
    InvalidShifts(String),

    #[error("grid with {n_grid} interior nodes is too coarse (need at least {min})")]
    InvalidGrid { n_grid: usize, min: usize },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("trajectory is empty or malformed")]
    EmptyTrajectory,

    #[error("order r = {r} is odd but the shift recipe produces mirrored pairs")]
    OddOrderForMirroredRecipe { r: usize },

    #[error("config error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), if field.is_empty() { String::new() } else { format!(" ({field})") })]
    Config {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(line: Option<usize>, field: &str, message: impl Into<String>) -> Self {
        Error::Config { line, field: field.to_string(), message: message.into() }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ (Error::PoleEscapedDomain { .. } | Error::AtIteration { .. }) => e,
            e => Error::AtIteration { iteration, source: Box::new(e) },
        }
    }

    /// Strips any iteration wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
