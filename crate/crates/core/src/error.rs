use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcorrError {
    /// An argument of `z` (or one of its derivatives) sits on `2πik`.
    #[error("pole of z at x = {x} (distance {distance:e} to 2πi·{k})")]
    Pole { x: Complex64, k: i64, distance: f64 },

    #[error("size {got} outside the supported range {range}")]
    Size { got: usize, range: &'static str },

    #[error("|Im x| = {im} exceeds the strip bound {bound}")]
    Strip { im: f64, bound: f64 },

    #[error("contour tail too large: integrand at |Im z| = {t_max} is {ratio:e} of peak (tolerance {tol:e})")]
    Tail { t_max: f64, ratio: f64, tol: f64 },

    #[error("invalid shift: {0}")]
    Shift(String),

    #[error("invalid parameter: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("ordinates not strictly increasing at index {index} ({prev} then {next})")]
    Order { index: usize, prev: f64, next: f64 },

    #[error("Fourier support {support} outside the admissible range {limit}")]
    Support { support: f64, limit: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NcorrError {
    fn from(e: std::io::Error) -> Self {
        NcorrError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NcorrError>;
