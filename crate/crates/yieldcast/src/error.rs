use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at {path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },

    #[error("series `{0}` has no usable rows")]
    EmptySeries(String),

    #[error("duplicate date {date} in series `{name}`")]
    DuplicateDate { name: String, date: String },

    #[error("series `{name}` too short: {len} observations, need at least {need}")]
    SeriesTooShort {
        name: String,
        len: usize,
        need: usize,
    },

    #[error("panel alignment produced an empty calendar intersection")]
    EmptyIntersection,

    #[error("duplicate column name `{0}` in panel")]
    DuplicateColumn(String),

    #[error("column `{0}` not found in panel")]
    ColumnNotFound(String),

    #[error("column `{0}` is constant; scale would be zero")]
    ConstantColumn(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("regressor matrix is singular or ill-conditioned: {0}")]
    SingularMatrix(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("optimizer failed to converge after {iterations} iterations (last objective {objective})")]
    NoConvergence { iterations: usize, objective: f64 },

    #[error("non-stationary sample, k undefined (AR(1) coefficient {0} >= 1)")]
    NonStationarySample(f64),

    #[error("degenerate innovation variance ({0:.3e}); series is effectively deterministic")]
    DegenerateVariance(f64),

    #[error("estimated model violates {0} at the optimum")]
    InvariantViolation(String),

    #[error("residual mean {mean:.6} is not negligible relative to sd {sd:.6}; demean before GARCH")]
    ResidualMeanNotZero { mean: f64, sd: f64 },

    #[error("explosive VAR fit: companion spectral radius {0:.4} >= 1")]
    ExplosiveFit(f64),

    #[error("future exogenous values required for a fit that used exogenous regressors")]
    MissingExogFuture,

    #[error("walk-forward fit failed at test step {step}: {source}")]
    WalkForwardStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown plot stage `{0}`")]
    UnknownStage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
