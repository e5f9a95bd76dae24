//! Crate-wide error type.

use std::path::PathBuf;

/// All failure modes surfaced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed content in a text input file; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A token appeared more than once where entries must be unique.
    #[error("duplicate token {token:?} at {path}:{line} (tokens must be unique)")]
    DuplicateToken {
        token: String,
        path: PathBuf,
        line: usize,
    },

    /// Two inputs that must agree on vector dimension do not.
    #[error("dimension mismatch: {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    /// A numeric value that must be finite is NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// The operation needs at least one input element and got none.
    #[error("empty input: {context}")]
    EmptyInput { context: String },

    /// None of the requested tokens resolved against the table.
    #[error("no requested word found in table ({context})")]
    NoWordsResolved { context: String },

    /// Aperture must be a finite positive real.
    #[error("aperture must be positive and finite, got {alpha}")]
    InvalidAperture { alpha: f64 },

    /// Aperture scaling factor must be a finite positive real.
    #[error("aperture scaling factor must be positive and finite, got {gamma}")]
    InvalidGamma { gamma: f64 },

    /// Boolean combination of conceptors computed at different apertures.
    #[error("aperture mismatch: cannot combine conceptors with alpha {left} and alpha {right}")]
    ApertureMismatch { left: f64, right: f64 },

    /// A matrix claimed to be a conceptor violates the type invariants.
    #[error("invalid conceptor: {message}")]
    InvalidConceptor { message: String },

    /// Binary conceptor file is corrupt or not a conceptor file at all.
    #[error("bad conceptor file {path}: {message}")]
    ConceptorFormat { path: PathBuf, message: String },

    /// A bundled data file failed to parse (should not happen in a healthy build).
    #[error("bundled word list {name:?} is unusable: {message}")]
    BadBundledList { name: String, message: String },

    /// Word sets of an association test must be pairwise disjoint.
    #[error("association test {test:?}: token {token:?} appears in both {first} and {second}")]
    OverlappingSets {
        test: String,
        token: String,
        first: String,
        second: String,
    },

    /// Target or attribute sets whose sizes must match do not.
    #[error("cardinality mismatch in {context}: {left} vs {right}")]
    CardinalityMismatch {
        left: usize,
        right: usize,
        context: String,
    },

    /// A vector that must have positive norm is all zeros.
    #[error("zero vector: {context}")]
    ZeroVector { context: String },

    /// Association profile has zero spread, effect size undefined.
    #[error("degenerate association profile: zero standard deviation across target words")]
    DegenerateProfile,

    /// Operation needs more resolved words than it got.
    #[error("{context}: need at least {needed} words, found {found}")]
    TooFewWords {
        needed: usize,
        found: usize,
        context: String,
    },

    /// Method cannot run on a token-instance (contextual) table.
    #[error("{method} does not support token-instance tables (table is marked contextual)")]
    ContextualUnsupported { method: String },

    /// A direction that must be well-defined collapsed to zero norm.
    #[error("degenerate direction: {context}")]
    DegenerateDirection { context: String },

    /// An operation over word pairs got fewer usable pairs than it needs.
    #[error("{dataset:?}: need at least {needed} usable pairs, found {found}")]
    TooFewPairs {
        dataset: String,
        needed: usize,
        found: usize,
    },

    /// Pearson correlation undefined when a series has zero variance.
    #[error("similarity evaluation over {dataset:?}: zero variance in {which} scores")]
    ZeroVariance { dataset: String, which: String },

    /// Projection basis does not span a plane.
    #[error("projection basis has rank {rank}, need rank >= 2")]
    BasisRankDeficient { rank: usize },

    /// A configuration value is out of its valid range.
    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },
}

impl Error {
    /// Wrap an I/O error with the path that produced it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Build a parse error for `path` at 1-based `line`.
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
