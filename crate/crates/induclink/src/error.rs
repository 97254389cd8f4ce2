//! Error type shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("coupling coefficient must lie in [0, {max_allowed}], got {k}")]
    CouplingOutOfRange { k: f64, max_allowed: f64 },

    #[error("series-parallel topology requires a parallel tuning capacitor (c2p)")]
    MissingParallelCap,

    #[error("series-primary topology takes no parallel tuning capacitor (c2p)")]
    UnexpectedParallelCap,

    #[error("{op} applies to the {expected} topology, got {actual}")]
    WrongTopology {
        op: &'static str,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("degenerate parallel combination: a + b = 0 with a = {a} Ω, b = {b} Ω")]
    DegenerateParallel { a: Complex64, b: Complex64 },

    #[error("singular mesh system: {details}")]
    SingularLink { details: String },

    #[error(
        "coupling k = {k} exceeds the tissue-safety limit {limit}; \
         pass --allow-unsafe to analyze it anyway"
    )]
    UnsafeCoupling { k: f64, limit: f64 },

    #[error(
        "no real parallel-tank resonance: r_load = {r_load} Ω is below 2ωL2 = {min_r_load} Ω; \
         the series-tuned topology suits this load"
    )]
    NoTankResonance { r_load: f64, min_r_load: f64 },

    #[error("netlist line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid netlist: {message}")]
    NetlistInvalid { message: String },

    #[error("singular nodal system at unknown '{suspect}': suspected floating subcircuit")]
    SingularSystem { suspect: String },

    #[error("optimization requires at least one free variable")]
    NoFreeVariables,

    #[error("no feasible point in the optimization region: {message}")]
    Infeasible { message: String },

    #[error("invalid bounds for {variable}: [{lo}, {hi}]")]
    InvalidBounds { variable: String, lo: f64, hi: f64 },

    #[error("unknown variable '{name}' (expected one of {expected})")]
    UnknownVariable {
        name: String,
        expected: &'static str,
    },

    #[error("invalid sweep: {message}")]
    InvalidSweep { message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
