//! Crate-wide error type.

/// Errors produced by parsing, validation, compilation, and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text or JSON (circuits, configs, CLI overrides).
    #[error("parse error: {0}")]
    Parse(String),
    /// Structurally valid input that violates a semantic rule.
    #[error("validation error: {0}")]
    Validate(String),
    /// Gate synthesis failure (non-unitary input, tolerance miss).
    #[error("synthesis error: {0}")]
    Synth(String),
    /// Illegal machine operation (transport legality, crystal shapes).
    #[error("machine error: {0}")]
    Machine(String),
    /// Scheduling failure (unroutable layout, policy violation).
    #[error("schedule error: {0}")]
    Schedule(String),
    /// Simulation failure (size limits, malformed plans).
    #[error("simulation error: {0}")]
    Sim(String),
    /// Benchmark analysis failure (degenerate fits, empty data).
    #[error("benchmark error: {0}")]
    Bench(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
