//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the library. Each variant names the offending object so
/// callers can report it without re-deriving context.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed automaton: {0}")]
    MalformedAutomaton(String),

    #[error("automaton is not deterministic: state `{state}` has two successors for `{prop}`")]
    NonDeterministic { state: String, prop: String },

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),

    #[error("no edge from `{from}` to `{to}`")]
    NoEdge { from: String, to: String },

    #[error("no transition from switching state {state} on `{prop}`")]
    MissingTransition { state: String, prop: String },

    #[error("invalid comparison function: {0}")]
    InvalidFunction(String),

    #[error("function {0} is not invertible")]
    NotInvertible(String),

    #[error("comparison function evaluated at negative argument {0}")]
    NegativeArgument(f64),

    #[error("unsupported gain class: {0}")]
    UnsupportedGainClass(String),

    #[error("max-form conversion needs κ̂ < I_d: {0}")]
    KappaNotBelowIdentity(String),

    #[error("gain matrix dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("small-gain condition violated on cycle {cycle:?}: composed gain {composed} is not below the identity")]
    SmallGainViolated { cycle: Vec<usize>, composed: String },

    #[error("small-gain condition undecided on cycle {cycle:?}: {reason}")]
    SmallGainUndecided { cycle: Vec<usize>, reason: String },

    #[error("no diagonal scaling found: {0}")]
    NoScaling(String),

    #[error("level condition violated: eps1 = {eps1} exceeds eps2 = {eps2}")]
    LevelConditionViolated { eps1: f64, eps2: f64 },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("grid too large: {points} points exceed the limit of {limit}")]
    GridTooLarge { points: u128, limit: u128 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("state {0:?} carries no label")]
    Unlabeled(Vec<f64>),

    #[error("regions of interest are infeasible: {0}")]
    InfeasibleRegions(String),

    #[error("synthesis failed after {iterations} iterations (best violation {best_violation:.3e}): {reason}")]
    SynthesisFailed { iterations: usize, best_violation: f64, reason: String },

    #[error("linear program error: {0}")]
    Lp(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
