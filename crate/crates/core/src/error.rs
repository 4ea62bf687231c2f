use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("germ mismatch: {left} vs {right} germ dimensions")]
    GermMismatch { left: usize, right: usize },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("full tensor quadrature over {dims} germ dimensions exceeds the limit of {limit}")]
    QuadratureTooLarge { dims: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-fatal numerical event recorded alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Singular values / eigenvalues below the cutoff were discarded.
    RankTruncated {
        context: &'static str,
        rank: usize,
        full: usize,
    },
    /// Modes above `kept_degree` were dropped from an exact result.
    DegreeTruncated {
        context: &'static str,
        exact_degree: u32,
        kept_degree: u32,
        dropped_norm: f64,
    },
    /// Negative eigenvalues of a covariance were floored at zero.
    PsdFloored { floored: f64, trace: f64 },
    /// Samples without spread; a narrow kernel was substituted.
    DegenerateSamples { bandwidth: f64 },
    /// Germ was recompressed to a Gaussian re-expansion.
    Recompressed { step: usize, dropped_dims: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RankTruncated {
                context,
                rank,
                full,
            } => write!(f, "{context}: rank {rank} of {full} after cutoff"),
            Warning::DegreeTruncated {
                context,
                exact_degree,
                kept_degree,
                dropped_norm,
            } => write!(
                f,
                "{context}: truncated degree {exact_degree} to {kept_degree} (dropped norm {dropped_norm:.3e})"
            ),
            Warning::PsdFloored { floored, trace } => {
                write!(f, "covariance floored by {floored:.3e} (trace {trace:.3e})")
            }
            Warning::DegenerateSamples { bandwidth } => {
                write!(f, "degenerate samples, bandwidth {bandwidth:.3e}")
            }
            Warning::Recompressed { dropped_dims, .. } => {
                write!(f, "germ recompressed, {dropped_dims} dims released")
            }
        }
    }
}
