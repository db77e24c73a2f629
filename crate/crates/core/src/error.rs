use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("alphabet `{0}` is empty")]
    EmptyAlphabet(String),

    #[error("alphabet `{name}` repeats symbol `{symbol}`")]
    DuplicateSymbol { name: String, symbol: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` appears more than once")]
    DuplicateVariable(String),

    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),

    #[error("empty variable set for {0}")]
    EmptySet(&'static str),

    #[error("{what}: expected {expected} entries, found {found}")]
    Shape {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{what}: entry {index} is not a probability ({value})")]
    InvalidProbability {
        what: String,
        index: usize,
        value: f64,
    },

    #[error("{what}: row {row} sums to {sum}, not 1")]
    NotNormalized { what: String, row: String, sum: f64 },

    #[error("alphabet mismatch in {what}: {detail}")]
    AlphabetMismatch { what: String, detail: String },

    #[error("invalid problem: {0}")]
    InvalidSpec(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
