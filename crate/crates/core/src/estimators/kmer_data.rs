use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, EstimateResult, EstimatorId, Warning};
use crate::error::{Error, Result};
use crate::kmer::{channel_powers, packed_hamming, Kmer, KmerTable, Provenance};

/// Grid resolution and upper end of the root search for the general-k moment equation.
const GRID_POINTS: usize = 256;
const SEARCH_MAX: f64 = 0.75;
const ROOT_TOL: f64 = 1e-9;

/// `p = 3 (f'_v - f_v) / (G - 4 f_v)` for a single nucleotide `v`.
pub fn estimate_k1_single(f_source: f64, f_mutated: f64, g: f64) -> Result<EstimateResult> {
    if g <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sequence length must be positive, got {g}"
        )));
    }
    let denom = g - 4.0 * f_source;
    if denom == 0.0 {
        return Err(Error::SingularDenominator(
            "source frequency of the chosen nucleotide is exactly 1/4".into(),
        ));
    }
    let p = 3.0 * (f_mutated - f_source) / denom;
    Ok(EstimateResult::new(EstimatorId::K1Single, p, Diagnostics::default()))
}

/// `p = 3 (y_GC - x_GC) / (2 - 4 x_GC)` from GC fractions.
pub fn estimate_k1_gc(x_gc: f64, y_gc: f64) -> Result<EstimateResult> {
    for v in [x_gc, y_gc] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("GC fraction {v} outside [0, 1]")));
        }
    }
    let denom = 2.0 - 4.0 * x_gc;
    if denom == 0.0 {
        return Err(Error::SingularDenominator("source GC fraction is exactly 1/2".into()));
    }
    let p = 3.0 * (y_gc - x_gc) / denom;
    Ok(EstimateResult::new(EstimatorId::K1Gc, p, Diagnostics::default()))
}

/// `p = 1 - (sum_{v in K} f'_v / G)^(1/k)`.
pub fn estimate_large_k_seq(mutated: &KmerTable, source: &KmerTable, g: u64) -> Result<EstimateResult> {
    if mutated.k() != source.k() {
        return Err(Error::MismatchedK(source.k(), mutated.k()));
    }
    let mass: u64 = source.iter_packed().map(|(v, _)| mutated.get_packed(v)).sum();
    large_k_seq_from_mass(mass as f64, g as f64, source.k())
}

/// [`estimate_large_k_seq`] given the retained mutated mass directly.
pub fn large_k_seq_from_mass(mass: f64, g: f64, k: usize) -> Result<EstimateResult> {
    if g <= 0.0 || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need G > 0 and k >= 1, got G={g}, k={k}"
        )));
    }
    let p = 1.0 - (mass / g).powf(1.0 / k as f64);
    Ok(EstimateResult::new(EstimatorId::LargeKSeq, p, Diagnostics::default()))
}

/// Which k-mers of the source enter the general-k moment equation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetSpec {
    #[default]
    All,
    /// The `m` most frequent source k-mers (ties broken lexicographically).
    TopM(usize),
    Explicit(BTreeSet<Kmer>),
}

impl SubsetSpec {
    pub fn resolve(&self, source: &KmerTable) -> Result<Vec<u64>> {
        let mut keys: Vec<u64> = match self {
            SubsetSpec::All => source.iter_packed().map(|(p, _)| p).collect(),
            SubsetSpec::TopM(0) => return Err(Error::InvalidSubset("m must be at least 1".into())),
            SubsetSpec::TopM(m) => {
                let mut entries: Vec<(u64, u64)> = source.iter_packed().collect();
                entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                entries.into_iter().take(*m).map(|(p, _)| p).collect()
            }
            SubsetSpec::Explicit(set) => {
                if set.is_empty() {
                    return Err(Error::InvalidSubset("explicit subset is empty".into()));
                }
                let mut out = Vec::with_capacity(set.len());
                for v in set {
                    if v.k() != source.k() {
                        return Err(Error::MismatchedK(v.k(), source.k()));
                    }
                    if !source.contains(v) {
                        return Err(Error::InvalidSubset(format!("{v} does not occur in the source")));
                    }
                    out.push(v.packed());
                }
                out
            }
        };
        if keys.is_empty() {
            return Err(Error::InvalidSubset("subset resolves to no k-mers".into()));
        }
        keys.sort_unstable();
        Ok(keys)
    }
}

/// `profile[d] = sum_{v in S} sum_{w in K} f_w [d_H(v, w) = d]`.
///
/// Grouping the double sum by Hamming distance turns every evaluation of the expected subset
/// mass into a degree-k polynomial in `q`, so the `|S| |K|` distance computations happen once.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceProfile {
    counts: Vec<u64>,
}

impl DistanceProfile {
    pub fn new(source: &KmerTable, subset: &[u64]) -> Self {
        let k = source.k();
        let entries: Vec<(u64, u64)> = source.iter_packed().collect();
        let counts = subset
            .par_iter()
            .fold(
                || vec![0u64; k + 1],
                |mut acc, &v| {
                    for &(w, f) in &entries {
                        acc[packed_hamming(v, w) as usize] += f;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; k + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        DistanceProfile { counts }
    }

    pub fn k(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Expected mutated mass of the subset at substitution rate `q`.
    pub fn expected_mass(&self, q: f64) -> f64 {
        channel_powers(self.k(), q)
            .iter()
            .zip(&self.counts)
            .map(|(w, &c)| w * c as f64)
            .sum()
    }
}

/// Solves `expected_mass(q) = observed_mass` for the smallest root in `[0, 0.75]`.
pub fn solve_general_k(profile: &DistanceProfile, observed_mass: f64) -> Result<EstimateResult> {
    let g = |q: f64| profile.expected_mass(q) - observed_mass;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| SEARCH_MAX * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&q| g(q)).collect();

    // A bracket is either an exact zero at a grid point or a strict sign change between neighbours.
    let mut brackets = Vec::new();
    for i in 0..GRID_POINTS {
        if values[i] == 0.0 {
            brackets.push((i, i));
        } else if i + 1 < GRID_POINTS && values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0) {
            brackets.push((i, i + 1));
        }
    }
    let &(lo_i, hi_i) = brackets.first().ok_or(Error::NoRootInRange)?;
    let mut diagnostics = Diagnostics {
        root_bracket: Some((grid[lo_i], grid[hi_i])),
        ..Diagnostics::default()
    };
    if brackets.len() > 1 {
        diagnostics.warnings.push(Warning::MultipleRoots);
    }

    let root = if lo_i == hi_i {
        grid[lo_i]
    } else {
        let (mut lo, mut hi) = (grid[lo_i], grid[hi_i]);
        let lo_negative = values[lo_i] < 0.0;
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            let v = g(mid);
            if v == 0.0 {
                lo = mid;
                hi = mid;
            } else if (v < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(EstimateResult::new(EstimatorId::GeneralK, root, diagnostics))
}

/// Numerically inverts `sum_{v in S} f'_v = sum_{v in S} sum_{w in K} f_w (1-q)^(k-d) (q/3)^d`.
pub fn estimate_general_k(source: &KmerTable, mutated: &KmerTable, subset: &SubsetSpec) -> Result<EstimateResult> {
    if source.k() != mutated.k() {
        return Err(Error::MismatchedK(source.k(), mutated.k()));
    }
    if source.provenance() != Provenance::Sequence || mutated.provenance() != Provenance::Sequence {
        return Err(Error::InvalidParameter(
            "general-k estimation needs sequence k-mer tables".into(),
        ));
    }
    let keys = subset.resolve(source)?;
    let observed: u64 = keys.iter().map(|&v| mutated.get_packed(v)).sum();
    solve_general_k(&DistanceProfile::new(source, &keys), observed as f64)
}
