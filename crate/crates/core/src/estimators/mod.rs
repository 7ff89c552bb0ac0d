//! Method-of-moments estimators of the substitution rate.
//!
//! Estimators with direct access to k-mer tables of both sequences live in [`kmer_data`];
//! estimators that only see noisy reads live in [`reads`]. Every estimator returns the raw
//! estimate, which may fall outside `[0, 1]`, next to its clamped value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod kmer_data;
pub mod reads;

pub use kmer_data::{
    estimate_general_k, estimate_k1_gc, estimate_k1_single, estimate_large_k_seq, large_k_seq_from_mass,
    solve_general_k, DistanceProfile, SubsetSpec,
};
pub use reads::{
    estimate_k1_reads, estimate_large_k_reads, large_k_reads_from_masses, select_lambda, select_lambda_for_fraction,
    ErrorRate, LambdaChoice,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    K1Single,
    K1Gc,
    GeneralK,
    LargeKSeq,
    K1Reads,
    LargeKReads,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 6] = [
        EstimatorId::K1Single,
        EstimatorId::K1Gc,
        EstimatorId::GeneralK,
        EstimatorId::LargeKSeq,
        EstimatorId::K1Reads,
        EstimatorId::LargeKReads,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::K1Single => "k1-single",
            EstimatorId::K1Gc => "k1-gc",
            EstimatorId::GeneralK => "general-k",
            EstimatorId::LargeKSeq => "large-k-seq",
            EstimatorId::K1Reads => "k1-reads",
            EstimatorId::LargeKReads => "large-k-reads",
        }
    }

    /// Whether the estimator works from reads rather than full k-mer tables.
    pub fn uses_reads(self) -> bool {
        matches!(self, EstimatorId::K1Reads | EstimatorId::LargeKReads)
    }

    /// Whether the estimator takes its k from the configured k values (otherwise k = 1).
    pub fn takes_k(self) -> bool {
        matches!(
            self,
            EstimatorId::GeneralK | EstimatorId::LargeKSeq | EstimatorId::LargeKReads
        )
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        EstimatorId::ALL
            .into_iter()
            .find(|id| id.as_str() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown estimator {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warning {
    /// The moment equation changes sign more than once on the search grid; the smallest root
    /// was returned.
    MultipleRoots,
    /// No threshold of at least 2 keeps the required mass; every k-mer was retained.
    LambdaFallback,
    /// λ was chosen from an upper bound on the error rate rather than its true value.
    ErrorRateUpperBound,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retained_mass: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<Warning>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimator: EstimatorId,
    pub p_raw: f64,
    pub p_clamped: f64,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    pub(crate) fn new(estimator: EstimatorId, p_raw: f64, diagnostics: Diagnostics) -> Self {
        EstimateResult {
            estimator,
            p_raw,
            p_clamped: p_raw.clamp(0.0, 1.0),
            diagnostics,
        }
    }
}
