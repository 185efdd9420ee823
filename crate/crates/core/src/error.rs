use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("singular solve at degree {degree} (level {level})")]
    Resonance { degree: usize, level: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("non-positive logarithm argument at x = {x}")]
    LogArgument { x: f64 },
    #[error("point {y} outside grid coverage [{lo}, {hi}]")]
    Coverage { y: f64, lo: f64, hi: f64 },
    #[error("solution left the funnel at s = {s}: sup = {sup}")]
    Ceiling { s: f64, sup: f64 },
    #[error("overflow guard tripped at t = {t}")]
    Overflow { t: f64 },
    #[error("record spacing not uniform: ratio {0}")]
    Spacing(f64),
    #[error("no blowup trend: {0}")]
    NoBlowup(String),
    #[error("boundary map has degree zero on the search box")]
    DegreeZero,
    #[error("solver failed for (d0, d1) = ({d0}, {d1}): {source}")]
    Shot {
        d0: f64,
        d1: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
