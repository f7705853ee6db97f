use thiserror::Error;

/// Errors raised by the phase-behavior engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate state: {0}")]
    Degenerate(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("no convergence after {iterations} iterations: {context}")]
    NonConvergence { iterations: usize, context: String },
    #[error("stability indeterminate: {0}")]
    IndeterminateStability(String),
    #[error("bracket [{p_lo} Pa, {p_hi} Pa] does not straddle a phase boundary (low end: {lo_state}, high end: {hi_state})")]
    Bracket {
        p_lo: f64,
        p_hi: f64,
        lo_state: String,
        hi_state: String,
    },
    #[error("flash failed at {pressure} Pa: {source}")]
    FlashAt {
        pressure: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("cost undefined at k = {k}: every saturation point failed ({failures} points)")]
    CostUndefined { k: f64, failures: usize },
    #[error("parse error in {file} at line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the failure is a convergence problem rather than bad input.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::IndeterminateStability(_)
            | Error::Degenerate(_)
            | Error::CostUndefined { .. } => true,
            Error::FlashAt { source, .. } => source.is_convergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
