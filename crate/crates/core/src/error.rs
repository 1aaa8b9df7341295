use thiserror::Error;

/// Every failure the laboratory can report.
///
/// Errors split into two families that the CLI maps to distinct exit codes:
/// validation problems (bad input, rejected schedules, violated preconditions)
/// and runtime problems (budgets, convergence, I/O).
#[derive(Debug, Error)]
pub enum LabError {
    #[error("alphabet must have at least 2 symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("transition matrix must be {0}x{0}")]
    BadShape(usize),
    #[error("symbol {0} has an all-zero row or column in the transition matrix")]
    EmptyRow(usize),
    #[error("transition graph is not mixing ({0})")]
    NonMixing(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("word {word:?} is not admissible")]
    Inadmissible { word: String },
    #[error("table `{table}` has no value for admissible word {word:?}")]
    MissingWord { table: String, word: String },
    #[error("invalid value in `{table}`: {reason}")]
    InvalidValue { table: String, reason: String },
    #[error("delta {delta} must be below delta' = {delta_prime}")]
    DeltaTooLarge { delta: f64, delta_prime: f64 },
    #[error("eta {eta} exceeds lambda_max {lambda_max}")]
    EtaTooLarge { eta: f64, lambda_max: f64 },
    #[error("window is empty")]
    EmptyWindow,
    #[error("no transition word realizes time {target}; minimal feasible time is {minimal}")]
    NoTransition { target: f64, minimal: f64 },
    #[error("Q_l = floor((T-delta)C/T) - 1 = {0} is not positive")]
    NonPositiveQ(i64),
    #[error("variance is zero")]
    ZeroVariance,
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("window [{start}, {end}] lies outside [0, {limit}]")]
    WindowOutOfRange { start: f64, end: f64, limit: f64 },
    #[error("power iteration did not converge after {0} steps")]
    NonConvergence(usize),
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schedule rejected: {0}")]
    ScheduleRejected(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    /// True for errors caused by invalid input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            LabError::BudgetExceeded(_)
                | LabError::NonConvergence(_)
                | LabError::Io { .. }
                | LabError::NoTransition { .. }
                | LabError::MissingSeries(_)
        )
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
