//! Certified verification lab for a Cantor-like step-function construction.
//!
//! The library builds a family of nested residual segments on `[0, 1]`
//! parameterized by an exponent `r >= 1`, the unbounded step function
//! supported on the concentric cores of the removed intervals, and the
//! machinery needed to certify its integration-theoretic behavior:
//! exact rational interval arithmetic, tail-bounded series summation,
//! absolute-continuity stress tests and derivative blow-up scans.
//!
//! All numeric claims are produced as [`scalar::CertifiedValue`]
//! enclosures: exact rationals where the arithmetic permits, otherwise
//! outward-rounded brackets that are sound by construction.

pub mod acr;
pub mod blowup;
pub mod cli;
pub mod lrcalc;
pub mod scalar;
pub mod scheme;
pub mod series;
pub mod stepfn;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside an operation's domain (nonpositive base, r < 1, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Structural validation failure (malformed path, bad interval, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// Recursion would exceed the configured depth cap.
    #[error("depth cap {cap} exceeded: {context}")]
    DepthExceeded { cap: u32, context: String },
    /// A certified comparison stayed ambiguous at the precision cap.
    #[error("undecidable at precision cap: {0}")]
    Undecidable(String),
    /// A series with ratio >= 1 was asked for a finite sum.
    #[error("series diverges: {0}")]
    Divergent(String),
    /// Malformed textual input (rationals, paths, report files).
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
