use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(
        "enumeration cap exceeded: alphabet {alphabet} at n = {n} needs {states} states (cap {cap})"
    )]
    EnumerationCap {
        alphabet: usize,
        n: usize,
        states: f64,
        cap: u64,
    },

    #[error("codebook too large: {codewords} codewords of length {n} (cap {cap})")]
    CodebookTooLarge { codewords: f64, n: usize, cap: u64 },

    /// Every codeword has product likelihood zero under the test channel.
    #[error("all codewords have zero likelihood for this input sequence")]
    AllZeroLikelihood,

    #[error("codeword index {index} out of range (M = {m})")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("target distortion {target} outside achievable range [{min}, inf)")]
    DistortionOutOfRange { target: f64, min: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed codebook file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
