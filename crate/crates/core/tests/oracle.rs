use mutrate::estimators::{estimate_general_k, SubsetSpec};
use mutrate::kmer::expected_kmer_count;
use mutrate::seq::{mutate, CircularSequence, SubstitutionChannel};
use mutrate::{Kmer, KmerTable};

/// Exact expected count of every k-mer in the mutated string, by enumerating all `4^G` outcomes.
fn enumerate(x: &CircularSequence, k: usize, p: f64) -> Vec<f64> {
    let g = x.len();
    let mut out = vec![0.0; 1 << (2 * k)];
    for code in 0..(1usize << (2 * g)) {
        let y: Vec<usize> = (0..g).map(|i| (code >> (2 * i)) & 3).collect();
        let prob: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &b)| if b == x.get(i) as usize { 1.0 - p } else { p / 3.0 })
            .product();
        for start in 0..g {
            let v = (0..k).fold(0, |acc, j| (acc << 2) | y[(start + j) % g]);
            out[v] += prob;
        }
    }
    out
}

#[test]
fn expected_counts_match_enumeration() {
    for s in ["G", "TA", "CCC", "ACGA", "TTTAC", "GGATCC", "AAAAAA"] {
        let x: CircularSequence = s.parse().unwrap();
        for k in 1..=3.min(x.len()) {
            let table = KmerTable::from_sequence(&x, k).unwrap();
            for p in [0.0, 0.03, 0.25, 0.6, 0.75] {
                for (v, want) in enumerate(&x, k, p).into_iter().enumerate() {
                    let got = expected_kmer_count(&Kmer::from_packed(v as u64, k).unwrap(), &table, p, 1.0).unwrap();
                    assert!((got - want).abs() < 1e-9, "{s} k={k} p={p} v={v}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn expected_counts_conserve_mass() {
    let x: CircularSequence = "ACGTTGCAAGGCTTAC".parse().unwrap();
    for k in 1..=3 {
        let table = KmerTable::from_sequence(&x, k).unwrap();
        for scale in [1.0, 2.5] {
            let sum: f64 = (0..1u64 << (2 * k))
                .map(|v| expected_kmer_count(&Kmer::from_packed(v, k).unwrap(), &table, 0.2, scale).unwrap())
                .sum();
            assert!((sum - scale * x.len() as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn general_k_recovers_rate_on_long_sequences() {
    let x = mutrate::seq::generate_iid_sequence(20_000, [0.3, 0.2, 0.2, 0.3], 3).unwrap();
    let y = mutate(&x, &SubstitutionChannel::new(0.08).unwrap(), 4);
    let k = 10;
    let (tx, ty) = (
        KmerTable::from_sequence(&x, k).unwrap(),
        KmerTable::from_sequence(&y, k).unwrap(),
    );
    let r = estimate_general_k(&tx, &ty, &SubsetSpec::TopM(300)).unwrap();
    assert!((r.p_raw - 0.08).abs() < 0.01, "{}", r.p_raw);
}
