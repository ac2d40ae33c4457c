//! Crate-wide error type.

/// Any failure surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A NaN or infinity reached a constructor.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// More clients than features to hand out.
    #[error("cannot partition: {0}")]
    Partition(String),

    /// A step-size formula referenced a constant that was not supplied.
    #[error("missing constant for step size: {0}")]
    MissingConstant(&'static str),

    /// The requested prox map has no closed form for this kind.
    #[error("no prox available: {0}")]
    UnsupportedProx(&'static str),

    /// The requested convex conjugate is unavailable for this kind.
    #[error("no conjugate available: {0}")]
    UnsupportedConjugate(&'static str),

    /// A gradient was requested from a non-smooth function.
    #[error("gradient unavailable: {0}")]
    NonSmooth(&'static str),

    /// The problem instance admits no meaningful answer (zero spectrum, f(0)=f*, ...).
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    /// Encryption secret is unusable.
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),

    /// The oracle's normal-equations system could not be factorized.
    #[error("singular oracle system: {0}")]
    SingularOracle(String),

    /// An iterate exceeded the norm guard or went non-finite.
    #[error("iterates diverged at iteration {iter}: {msg} (step size too large?)")]
    Divergence { iter: usize, msg: String },

    /// A solver was configured with incompatible options.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Run-record files could not be read or were malformed.
    #[error("record format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
