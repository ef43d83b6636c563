use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet size {0} (must be in 2..=256)")]
    InvalidAlphabet(usize),

    #[error(
        "symbol {symbol} at position {position} is out of range for alphabet of size {alphabet}"
    )]
    SymbolOutOfRange {
        symbol: usize,
        position: usize,
        alphabet: usize,
    },

    #[error("alphabet mismatch: expected {expected}, found {found}")]
    AlphabetMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate conditioning: every component assigns probability zero to the prefix")]
    DegenerateConditioning,

    #[error("the model class is empty")]
    EmptyClass,

    #[error("exhaustive cap exceeded: {what} needs {required} sequences but the cap is {cap}")]
    CapExceeded {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error("reference predictor is not count-sufficient: {0}")]
    NotCountSufficient(String),

    #[error("numeric contract violated: {0}")]
    Contract(String),

    #[error("audit failed for member {mu} in cell {cell}: {detail}")]
    AuditFailed {
        mu: String,
        cell: usize,
        detail: String,
    },

    #[error("document error: {0}")]
    Document(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
