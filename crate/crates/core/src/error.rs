//! Error type shared by every estimation stage.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv read failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{context}: design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient {
        context: String,
        columns: Vec<String>,
    },

    #[error("{context}: need at least {needed} observations, got {got}")]
    TooFewObservations {
        context: String,
        needed: usize,
        got: usize,
    },

    #[error("years were fitted with different basis specifications; counterfactuals require a shared basis")]
    BasisMismatch,

    #[error("year {0} is not among the fitted models")]
    UnknownYear(i32),

    #[error("grid too short: requested tau {tau} but the counterfactual CDF only reaches {reached}")]
    GridTooShort { tau: f64, reached: f64 },

    #[error("functional {functional} is undefined at the base year: {detail}")]
    UndefinedAtBase { functional: String, detail: String },

    #[error("quantile tau {tau} falls inside the zero-earnings atom for config {config}")]
    ZeroAtomQuantile { config: String, tau: f64 },

    #[error("ratio functional has a zero denominator quantile for config {config}")]
    ZeroDenominator { config: String },

    #[error("support condition violated for config {config}: {detail}")]
    SupportViolation { config: String, detail: String },

    #[error("variance decomposition requires weekly_hours and weeks components on every worker row")]
    MissingComponents,

    #[error("control function rearrangement produced v_upper < v_lower at row {row}")]
    IntervalInverted { row: usize },

    #[error("synthetic model invalid: {0}")]
    Dgp(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
