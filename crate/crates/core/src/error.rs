use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid sensor layout: {0}")]
    InvalidSensorLayout(String),

    #[error("invalid mark layout: {0}")]
    InvalidMarkLayout(String),

    #[error("mark index {index} out of range 1..={count}")]
    MarkIndex { index: usize, count: usize },

    #[error("sensor index {index} out of range 1..={count}")]
    SensorIndex { index: usize, count: usize },

    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),

    #[error("non-positive denominator {0} in count estimate")]
    NonPositiveDenominator(f64),

    #[error(
        "sensor gaps overshoot the support: height {height} reaches the top sensor position {top}"
    )]
    SensorOvershoot { height: f64, top: f64 },

    #[error("no pool combination closes the mark layout: {remaining} m left above d_n = {dn}")]
    InfeasibleTail { remaining: f64, dn: f64 },

    #[error("too few events: need at least {needed}, have {have}")]
    TooFewEvents { needed: usize, have: usize },

    #[error("event table is not rectified")]
    NotRectified,

    #[error("invalid winding range: {0}")]
    InvalidRange(String),

    #[error("record index {index} out of range (trace has {len} records)")]
    RecordIndex { index: usize, len: usize },

    #[error("identifier already reached a terminal state ({0})")]
    TerminalState(String),

    #[error("invalid encoder model: {0}")]
    InvalidEncoder(String),

    #[error("no feasible design in the search space")]
    EmptyFeasibleSet,

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
