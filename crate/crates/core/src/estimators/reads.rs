use serde::{Deserialize, Serialize};

use super::{Diagnostics, EstimateResult, EstimatorId, Warning};
use crate::error::{Error, Result};
use crate::kmer::{KmerTable, Provenance};

/// `p = 3 (h'_v - h_v) / (N L - 4 h_v)` from single-nucleotide read counts.
///
/// Does not depend on the sequencing error rate.
pub fn estimate_k1_reads(h_source: f64, h_mutated: f64, n: u64, read_len: u64) -> Result<EstimateResult> {
    let nl = (n * read_len) as f64;
    let denom = nl - 4.0 * h_source;
    if denom == 0.0 {
        return Err(Error::SingularDenominator(
            "read frequency of the chosen nucleotide is exactly 1/4".into(),
        ));
    }
    let p = 3.0 * (h_mutated - h_source) / denom;
    Ok(EstimateResult::new(EstimatorId::K1Reads, p, Diagnostics::default()))
}

/// The sequencing error rate used to set the abundance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorRate {
    Known(f64),
    /// Only an upper bound on the rate is known; the threshold is set from the bound.
    UpperBound(f64),
}

impl ErrorRate {
    pub fn value(self) -> f64 {
        match self {
            ErrorRate::Known(s) | ErrorRate::UpperBound(s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub lambda: u64,
    /// `sum_{v: h_v >= lambda} h_v`.
    pub retained_mass: u64,
    /// `(1-s)^k sum_v h_v`.
    pub threshold: f64,
    /// True when no `lambda >= 2` keeps enough mass and every k-mer was retained.
    pub fallback: bool,
}

/// Largest `lambda >= 2` such that k-mers with read count `>= lambda` carry at least a
/// `(1-s)^k` fraction of all read k-mer occurrences.
pub fn select_lambda(reads_table: &KmerTable, s: f64) -> Result<LambdaChoice> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidRate(s));
    }
    Ok(select_lambda_for_fraction(
        reads_table,
        (1.0 - s).powi(reads_table.k() as i32),
    ))
}

/// [`select_lambda`] with the retained fraction `(1-s)^k` given directly.
pub fn select_lambda_for_fraction(reads_table: &KmerTable, fraction: f64) -> LambdaChoice {
    let total = reads_table.total();
    let threshold = fraction * total as f64;

    let mut counts: Vec<u64> = reads_table.iter_packed().map(|(_, c)| c).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));

    // Mass retained at threshold c is constant for lambda in (next smaller count, c], so the
    // largest qualifying lambda is always one of the observed counts.
    let mut mass = 0u64;
    let mut i = 0;
    while i < counts.len() {
        let c = counts[i];
        if c < 2 {
            break;
        }
        while i < counts.len() && counts[i] == c {
            mass += c;
            i += 1;
        }
        if mass as f64 >= threshold {
            return LambdaChoice {
                lambda: c,
                retained_mass: mass,
                threshold,
                fallback: false,
            };
        }
    }
    LambdaChoice {
        lambda: 1,
        retained_mass: total,
        threshold,
        fallback: true,
    }
}

/// `p = 1 - (sum_{retained} h'_v / sum_{retained} h_v)^(1/k)`.
pub fn large_k_reads_from_masses(retained_y: f64, retained_x: f64, k: usize) -> Result<EstimateResult> {
    if retained_x <= 0.0 {
        return Err(Error::EmptyRetainedSet);
    }
    let p = 1.0 - (retained_y / retained_x).powf(1.0 / k as f64);
    Ok(EstimateResult::new(EstimatorId::LargeKReads, p, Diagnostics::default()))
}

/// Large-k estimate from read k-mer tables of both sequences.
///
/// The retained set is `{v : h_v >= lambda}` with `lambda` chosen by [`select_lambda`] on the
/// source reads only; mutated-read counts of those k-mers are looked up (0 when absent).
pub fn estimate_large_k_reads(
    x_reads: &KmerTable,
    y_reads: &KmerTable,
    error_rate: ErrorRate,
) -> Result<EstimateResult> {
    if x_reads.k() != y_reads.k() {
        return Err(Error::MismatchedK(x_reads.k(), y_reads.k()));
    }
    if x_reads.provenance() != Provenance::Reads || y_reads.provenance() != Provenance::Reads {
        return Err(Error::InvalidParameter(
            "large-k read estimation needs read k-mer tables".into(),
        ));
    }
    let choice = select_lambda(x_reads, error_rate.value())?;
    let (mut x_mass, mut y_mass) = (0u64, 0u64);
    for (v, h) in x_reads.iter_packed() {
        if h >= choice.lambda {
            x_mass += h;
            y_mass += y_reads.get_packed(v);
        }
    }
    let mut result = large_k_reads_from_masses(y_mass as f64, x_mass as f64, x_reads.k())?;
    let diag = &mut result.diagnostics;
    diag.lambda = Some(choice.lambda);
    diag.retained_mass = Some(x_mass);
    if choice.fallback {
        diag.warnings.push(Warning::LambdaFallback);
    }
    if matches!(error_rate, ErrorRate::UpperBound(_)) {
        diag.warnings.push(Warning::ErrorRateUpperBound);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmer::Kmer;
    use proptest::prelude::*;

    fn reads_table(k: usize, counts: &[u64]) -> KmerTable {
        KmerTable::from_counts(
            k,
            Provenance::Reads,
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (Kmer::from_packed(i as u64, k).unwrap(), c)),
        )
        .unwrap()
    }

    /// Reference rule: scan every integer lambda' >= 2 up to the largest count.
    fn lambda_by_scan(t: &KmerTable, s: f64) -> Option<u64> {
        let threshold = (1.0 - s).powi(t.k() as i32) * t.total() as f64;
        let max = t.iter().map(|(_, c)| c).max().unwrap_or(0);
        (2..=max)
            .filter(|&l| t.iter().filter(|(_, c)| *c >= l).map(|(_, c)| c).sum::<u64>() as f64 >= threshold)
            .max()
    }

    #[test]
    fn k1_reads_examples() {
        assert_eq!(estimate_k1_reads(300.0, 300.0, 10, 100).unwrap().p_raw, 0.0);
        let r = estimate_k1_reads(300.0, 220.0, 10, 100).unwrap();
        assert!((r.p_raw - 1.2).abs() < 1e-12);
        assert_eq!(r.p_clamped, 1.0);
        assert!(matches!(
            estimate_k1_reads(250.0, 220.0, 10, 100),
            Err(Error::SingularDenominator(_))
        ));
    }

    #[test]
    fn k1_reads_plug_in_is_independent_of_s() {
        let (n, l) = (1_000u64, 150u64);
        let nl = (n * l) as f64;
        let (fa, p) = (0.4, 0.2);
        for s in [0.0, 0.01, 0.1, 0.5] {
            let h = nl * (fa * (1.0 - 4.0 * s / 3.0) + s / 3.0);
            let h_mut = h * (1.0 - 4.0 * p / 3.0) + nl * p / 3.0;
            let r = estimate_k1_reads(h, h_mut, n, l).unwrap();
            assert!((r.p_raw - p).abs() < 1e-9, "s={s}: {}", r.p_raw);
        }
    }

    #[test]
    fn lambda_examples() {
        // {10, 8, 1, 1}, (1-s)^k = 0.9: threshold 18
        let t = reads_table(2, &[10, 8, 1, 1]);
        let c = select_lambda_for_fraction(&t, 0.9);
        assert_eq!(c.lambda, 8);
        assert_eq!(c.retained_mass, 18);
        assert!(!c.fallback);

        let t = reads_table(2, &[3, 2]);
        let c = select_lambda(&t, 0.0).unwrap();
        assert_eq!((c.lambda, c.retained_mass), (2, 5));

        let t = reads_table(3, &[1, 1, 1, 1, 1]);
        let c = select_lambda(&t, 0.01).unwrap();
        assert_eq!(c.lambda, 1);
        assert!(c.fallback);
        assert_eq!(c.retained_mass, 5);
    }

    #[test]
    fn large_k_reads_examples() {
        let x = reads_table(4, &[5, 7, 9, 1]);
        let r = estimate_large_k_reads(&x, &x, ErrorRate::Known(0.01)).unwrap();
        assert_eq!(r.p_raw, 0.0);
        assert!(r.diagnostics.lambda.is_some());

        let (p, k) = (0.05, 30);
        let r = large_k_reads_from_masses(1000.0 * (1.0f64 - p).powi(k as i32), 1000.0, k).unwrap();
        assert!((r.p_raw - p).abs() < 1e-9);

        let y = KmerTable::from_counts(4, Provenance::Reads, [(Kmer::from_packed(200, 4).unwrap(), 3)]).unwrap();
        let r = estimate_large_k_reads(&x, &y, ErrorRate::Known(0.01)).unwrap();
        assert_eq!(r.p_raw, 1.0);

        assert!(matches!(
            large_k_reads_from_masses(0.0, 0.0, 30),
            Err(Error::EmptyRetainedSet)
        ));
        let empty = KmerTable::empty(4, Provenance::Reads).unwrap();
        assert!(matches!(
            estimate_large_k_reads(&empty, &x, ErrorRate::Known(0.01)),
            Err(Error::EmptyRetainedSet)
        ));
        let other_k = reads_table(3, &[2]);
        assert!(matches!(
            estimate_large_k_reads(&x, &other_k, ErrorRate::Known(0.01)),
            Err(Error::MismatchedK(4, 3))
        ));
    }

    #[test]
    fn upper_bound_mode_is_flagged() {
        let x = reads_table(2, &[10, 8, 1, 1]);
        let r = estimate_large_k_reads(&x, &x, ErrorRate::UpperBound(0.05)).unwrap();
        assert!(r.diagnostics.warnings.contains(&Warning::ErrorRateUpperBound));
    }

    fn arb_counts() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(prop_oneof![3 => 1u64..3, 2 => 2u64..60], 1..80)
    }

    proptest! {
        #[test]
        fn lambda_matches_reference_scan(counts in arb_counts(), s in 0.0f64..0.3, k in 4usize..9) {
            let t = reads_table(k, &counts);
            let c = select_lambda(&t, s).unwrap();
            match lambda_by_scan(&t, s) {
                Some(l) => {
                    prop_assert_eq!(c.lambda, l);
                    prop_assert!(!c.fallback);
                }
                None => {
                    prop_assert_eq!(c.lambda, 1);
                    prop_assert!(c.fallback);
                }
            }
        }

        #[test]
        fn lambda_nondecreasing_in_s(counts in arb_counts(), s1 in 0.0f64..0.5, ds in 0.0f64..0.4) {
            let t = reads_table(5, &counts);
            let l1 = select_lambda(&t, s1).unwrap().lambda;
            let l2 = select_lambda(&t, s1 + ds).unwrap().lambda;
            prop_assert!(l2 >= l1);
        }

        #[test]
        fn large_k_reads_decreasing_in_y_mass(x in 1.0f64..1e6, a in 0.0f64..1.0, b in 0.0f64..1.0, k in 1usize..40) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let p_lo = large_k_reads_from_masses(lo * x, x, k).unwrap().p_raw;
            let p_hi = large_k_reads_from_masses(hi * x, x, k).unwrap().p_raw;
            prop_assert!(p_hi < p_lo);
        }
    }
}
