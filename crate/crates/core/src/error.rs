use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid nucleotide {symbol:?} at line {line}, column {column}")]
    InvalidNucleotide { symbol: char, line: usize, column: usize },
    #[error("sequence must contain at least one nucleotide")]
    EmptySequence,
    #[error("substitution rate {0} is outside [0, 1)")]
    InvalidRate(f64),
    #[error("invalid nucleotide distribution: {0}")]
    InvalidDistribution(String),
    #[error("read length {read_len} exceeds sequence length {genome_len}")]
    ReadLongerThanGenome { read_len: usize, genome_len: usize },
    #[error("read length must be at least 1")]
    ZeroReadLength,
    #[error("k = {k} is invalid: {reason}")]
    InvalidK { k: usize, reason: String },
    #[error("mismatched k: {0} vs {1}")]
    MismatchedK(usize, usize),
    #[error("cannot merge tables with different provenance")]
    MismatchedProvenance,
    #[error("k-mers have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("singular denominator: {0}")]
    SingularDenominator(String),
    #[error("no root of the moment equation in [0, 0.75]")]
    NoRootInRange,
    #[error("retained k-mer set has zero mass")]
    EmptyRetainedSet,
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fixed-point iteration did not converge")]
    NonConvergence,
    #[error("FASTA: {0}")]
    Fasta(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed {what} at line {line}: {reason}")]
    Format {
        what: &'static str,
        line: usize,
        reason: String,
    },
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in trial records and CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidNucleotide { .. } => "InvalidNucleotide",
            Error::EmptySequence => "EmptySequence",
            Error::InvalidRate(_) => "InvalidRate",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::ReadLongerThanGenome { .. } => "ReadLongerThanGenome",
            Error::ZeroReadLength => "ZeroReadLength",
            Error::InvalidK { .. } => "InvalidK",
            Error::MismatchedK(..) => "MismatchedK",
            Error::MismatchedProvenance => "MismatchedProvenance",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::SingularDenominator(_) => "SingularDenominator",
            Error::NoRootInRange => "NoRootInRange",
            Error::EmptyRetainedSet => "EmptyRetainedSet",
            Error::InvalidSubset(_) => "InvalidSubset",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NonConvergence => "NonConvergence",
            Error::Fasta(_) => "Fasta",
            Error::File { .. } | Error::Io(_) => "Io",
            Error::Format { .. } => "Format",
            Error::Config(_) => "Config",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
