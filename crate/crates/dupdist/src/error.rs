use thiserror::Error;

/// Errors produced by the sequence, engine and bound operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("step (i={i}, h={h}) out of range for a sequence of length {len}")]
    StepOutOfRange { i: usize, h: usize, len: usize },

    #[error(
        "inapplicable step (i={i}, h={h}): observed Hamming distance {observed} exceeds budget {budget}"
    )]
    InapplicableStep {
        i: usize,
        h: usize,
        observed: u64,
        budget: u64,
    },

    #[error("invalid process at step {index}: {source}")]
    ProcessStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replay produced {got}, process records final {expected}")]
    FinalMismatch { got: String, expected: String },

    #[error("final sequence {0} is not square-free")]
    FinalNotSquareFree(String),

    #[error("length {len} exceeds cap {cap}")]
    LengthCap { len: usize, cap: usize },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("distance value {value} does not fit in a 4-bit table cell")]
    CellOverflow { value: u32 },

    #[error("cache: {0}")]
    Cache(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("normalization did not converge within {0} passes")]
    NormalizationDiverged(usize),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
