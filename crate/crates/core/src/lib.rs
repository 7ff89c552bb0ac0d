//! Estimating the substitution rate between two sequences from k-mer counts of the
//! sequences or of sequencing reads drawn from them.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod kmer;
pub mod seq;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, EstimatorId};
pub use kmer::{Kmer, KmerTable, Provenance};
pub use seq::{CircularSequence, Nucleotide, ReadSet, SubstitutionChannel};
