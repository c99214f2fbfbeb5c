//! Error type shared across the toolkit.
//!
//! Variants are grouped by the kind of fault so the CLI can map them onto
//! exit codes: everything that is wrong with the *inputs* (syntax, schema,
//! impossible scalings, out-of-range plans) is a configuration error, while
//! faults detected *during* a run (instability, negativity, population
//! explosion) are numerical errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax error in generator DSL text, with 1-based position.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// Identifier used but never declared, or declared twice, or used with
    /// the wrong arity (kernel vs constant).
    #[error("declaration error: {0}")]
    Declaration(String),

    /// The rate expression contains a form outside the supported fragment.
    #[error("unsupported rate expression: {0}")]
    Unsupported(String),

    /// The declared per-symbol scalings admit no (finite, nonzero) mean-field
    /// limit for some term.
    #[error("no mean-field limit under declared scalings: {0}")]
    Unbalanced(String),

    /// A plan, grid, kernel or config parameter is out of its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A combinatorial routine was asked for an infeasibly large enumeration.
    #[error("cardinality limit exceeded: {0}")]
    Cardinality(String),

    /// Runtime numerical fault: instability, negative density, non-finite
    /// values, or a particle-count guard breach.
    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for faults that arise while running (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
