use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid construction spec: {0}")]
    InvalidSpec(String),

    /// Spacer demand of the cut applied to stage `stage` exceeds the residual mass.
    #[error("residual reservoir exhausted when cutting stage {stage}")]
    ReservoirExhausted { stage: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("no built stage resolves lag {lag} within tolerance (best bound {best_bound})")]
    StageBudgetExceeded { lag: i64, best_bound: String },

    #[error("step function belongs to a different construction")]
    MismatchedConstruction,

    #[error("offset table for stages {from}..{to} would hold {copies} entries (limit {limit})")]
    TableTooLarge { from: usize, to: usize, copies: u64, limit: u64 },

    #[error("degenerate order {0}: at least 2 required")]
    DegenerateOrder(i64),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("test family is empty")]
    EmptyFamily,

    #[error("candidate or power list is empty")]
    EmptyScan,

    #[error("regressors are collinear; two-term fit is undetermined")]
    DegenerateFit,

    #[error("Toeplitz window {window} exceeds available lags {available}")]
    WindowTooLarge { window: usize, available: usize },

    #[error("Fejer order {order} needs lags up to {needed}, sequence has {available}")]
    ResolutionExceedsData { order: usize, needed: usize, available: usize },

    #[error("convolution power must be at least 1, got {0}")]
    BadPower(u32),

    #[error("sequences cover different lag ranges ({0} vs {1})")]
    RangeMismatch(usize, usize),

    #[error("spectral estimates use different grids or orders")]
    GridMismatch,

    #[error("base {0} has no step function bound")]
    UnboundBase(usize),
}
