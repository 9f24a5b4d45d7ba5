//! Crate-wide error type.

use chrono::NaiveDate;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the pipeline, from CSV ingestion to
/// report generation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    // market data
    #[error("malformed row {row} in {context}: {detail}")]
    MalformedRow {
        context: String,
        row: usize,
        detail: String,
    },

    #[error("bar invariant violated at row {row} in {context}: {detail}")]
    InvariantViolation {
        context: String,
        row: usize,
        detail: String,
    },

    #[error("series is empty ({context})")]
    EmptySeries { context: String },

    #[error("no common dates across the {count} input series")]
    NoCommonDates { count: usize },

    #[error("window [{start}, {end}] selects no dates")]
    EmptyWindow { start: NaiveDate, end: NaiveDate },

    #[error("missing data file for ticker {ticker}: {path}")]
    MissingData { ticker: String, path: String },

    // volatility
    #[error("estimator window too short: need {need} bars, got {got}")]
    WindowTooShort { need: usize, got: usize },

    #[error("series too short: need {need} observations, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    // anomaly
    #[error("every date is flagged anomalous; no clean window remains")]
    AllFlagged,

    // clustering
    #[error("Sakoe-Chiba band radius {band} cannot connect series of lengths {len_a} and {len_b}")]
    InfeasibleBand {
        band: usize,
        len_a: usize,
        len_b: usize,
    },

    #[error("too few series for clustering: need {need}, got {got}")]
    TooFewSeries { need: usize, got: usize },

    #[error("regime labelling requires exactly 3 clusters, got {got}")]
    NotThreeClusters { got: usize },

    // causality
    #[error("design matrix is singular (condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("target series has zero variance; Granger test undefined")]
    DegenerateVariance,

    #[error("no lag in {lag_min}..={lag_max} produced any significant edge")]
    NoSignificantEdges { lag_min: usize, lag_max: usize },

    // backtest
    #[error("budget exhausted on {date}: cash {cash:.2} cannot cover commission {commission:.2}")]
    BudgetExhausted {
        date: NaiveDate,
        cash: f64,
        commission: f64,
    },

    #[error("signal dated {date} is not in the target calendar")]
    SignalOutOfCalendar { date: NaiveDate },

    #[error("signal stream is not an alternating buy/sell sequence at {date}")]
    SignalSequence { date: NaiveDate },

    #[error("return series has zero variance; ratio undefined")]
    ZeroVariance,

    #[error("no negative returns; downside deviation undefined")]
    NoDownside,

    #[error("equity curve has zero drawdown; ratio undefined")]
    ZeroDrawdown,

    // config / pipeline
    #[error("configuration invalid:\n{}", issues.join("\n"))]
    Config { issues: Vec<String> },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
