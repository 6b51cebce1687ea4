use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` is not finite")]
    NonFinite { name: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("undefined set: m must be at least 1 (got {m})")]
    UndefinedSet { m: u32 },

    #[error("infeasible target: violates {bound} ({detail})")]
    Infeasible { bound: &'static str, detail: String },

    #[error("size cap exceeded: {required} points required, cap is {cap}")]
    CapExceeded { required: u128, cap: usize },

    #[error("flat cloud: all box counts equal ({count}), dimension fit is degenerate")]
    FlatCloud { count: usize },

    #[error("invalid scale list: {0}")]
    InvalidScales(String),

    #[error("time {t} outside interval [{lo}, {hi}]")]
    Interval { t: f64, lo: f64, hi: f64 },

    #[error("level {level} exceeds the representable cap {cap} (amplitude would overflow)")]
    LevelOverflow { level: u32, cap: u32 },

    #[error("unknown split policy `{0}`")]
    UnknownPolicy(String),

    #[error("quadrature did not reach tolerance {tol:e} (achieved estimate {achieved:e})")]
    Quadrature { achieved: f64, tol: f64 },

    #[error("unstable time step: dt = {dt:e} exceeds stability limit {limit:e}")]
    Stability { dt: f64, limit: f64 },

    #[error("`{op}` is not available for the {variant} variant")]
    Unsupported { op: &'static str, variant: String },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("regime violated: {0}")]
    Regime(String),

    #[error("grid resolution {requested} exceeds cap {cap}")]
    Resolution { requested: usize, cap: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
