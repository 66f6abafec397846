use crate::circuit::UnitId;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library. Variants carry enough context to point at
/// the offending unit, line, or argument.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("circuit contains a cycle (unit {0} reachable from itself)")]
    Cycle(usize),

    #[error("sum unit {unit} is not smooth: child {child_a} has a different scope than child {child_b}")]
    SmoothnessViolation {
        unit: usize,
        child_a: usize,
        child_b: usize,
    },

    #[error("product unit {unit} is not decomposable: children {child_a} and {child_b} share variables")]
    DecomposabilityViolation {
        unit: usize,
        child_a: usize,
        child_b: usize,
    },

    #[error("invalid unit description: {0}")]
    InvalidUnit(String),

    #[error("exact support check over {vars} variables exceeds the configured limit of {limit}")]
    ScopeTooLarge { vars: usize, limit: usize },

    #[error("operation requires a deterministic circuit; sum unit {0:?} has overlapping child supports")]
    NonDeterministicCircuit(UnitId),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported circuit file version `{found}` (expected `{expected}`)")]
    VersionMismatch { found: String, expected: String },

    #[error("dataset has {dataset_vars} variables but the circuit expects {circuit_vars}")]
    ArityMismatch {
        dataset_vars: usize,
        circuit_vars: usize,
    },

    #[error("non-finite value encountered during evaluation ({0})")]
    NonFiniteValue(String),

    #[error("value table shape ({got}) does not match the expected shape ({expected})")]
    InconsistentTable { got: String, expected: String },

    #[error("parameter vector has {got} entries, circuit has {expected} sum edges")]
    ParamShape { got: usize, expected: usize },

    #[error("softening factor {beta} outside the valid range ({lo}, 1] for arity {arity}")]
    BetaOutOfRange { beta: f64, lo: f64, arity: u32 },

    #[error("log-likelihood requires hard data; dataset carries softening factor {0}")]
    SoftenedLikelihood(f64),

    #[error("row {line} has {got} columns, expected {expected}")]
    RaggedRows {
        line: usize,
        got: usize,
        expected: usize,
    },

    #[error("sum unit solve is degenerate: no data mass and no entropy weight")]
    DegenerateUnit,

    #[error("entropy regularization did not converge within {iters} outer iterations")]
    NoConvergence { iters: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
