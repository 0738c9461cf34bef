use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("json error: {0}")]
    Json(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric value {value:?} in column `{column}` at data row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("duplicate role for column `{0}`")]
    DuplicateRole(String),
    #[error("calibration controls required (empty W1 role)")]
    NoCalibrationControls,
    #[error("too few rows: n = {rows} but {columns} columns need at least {needed}")]
    TooFewRows {
        rows: usize,
        columns: usize,
        needed: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid moment matrix: {0}")]
    InvalidMoments(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("R²_long exceeds 1 (resolved value {0})")]
    R2LongAboveOne(f64),
    #[error("R²_long = {value} is below R²_med = {r2_med}")]
    R2LongBelowMed { value: f64, r2_med: f64 },
    #[error("the identified-set polynomial vanishes identically (inconsistent moments)")]
    ZeroPolynomial,
    #[error("b = {0} makes the long-regression W1 coefficient zero")]
    NullControlPoint(f64),
    #[error("no finite delta reaches b = {0} at this R²_long")]
    NoFiniteDelta(f64),
    #[error("delta is indeterminate at b = {0}")]
    IndeterminateDelta(f64),
    #[error("beta_med is zero; the sign-change breakdown point is undefined")]
    ZeroBaseline,
    #[error("beta_short equals beta_med")]
    NoSelectionOnObservables,
    #[error("R²_med equals R²_short")]
    EqualR2,
    #[error("pi1 is zero")]
    ZeroPi,
    #[error("identified set is empty")]
    EmptySet,
    #[error("zero control coefficient: {0}")]
    ZeroControlCoefficient(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("rejection budget exhausted after {0} draws")]
    RejectionBudget(usize),
}

impl Error {
    /// True for errors caused by malformed input (files, flags, roles)
    /// rather than by the numerics or the model.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::DuplicateRole(_)
                | Error::NoCalibrationControls
                | Error::TooFewRows { .. }
                | Error::InvalidArgument(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
