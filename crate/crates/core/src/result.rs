use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

/// Which evaluator produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Determinant,
    Contour,
    RsMain,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::MonteCarlo => "mc",
            Method::Determinant => "determinant",
            Method::Contour => "contour",
            Method::RsMain => "rs_main",
            Method::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

/// A correlation value with its error estimate and the parameters that produced it.
///
/// `error` is a standard error for Monte Carlo results and an estimated
/// quadrature error otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub value: Complex64,
    pub error: f64,
    pub method: Method,
    pub params: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl CorrelationResult {
    pub fn new(value: Complex64, error: f64, method: Method) -> Self {
        CorrelationResult { value, error: error.abs(), method, params: BTreeMap::new(), warnings: Vec::new() }
    }

    pub fn real(value: f64, error: f64, method: Method) -> Self {
        Self::new(Complex64::new(value, 0.0), error, method)
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }

    /// `|a - b| / |b|`.
    pub fn relative_deviation(&self, reference: f64) -> f64 {
        (self.value.re - reference).abs() / reference.abs()
    }
}
