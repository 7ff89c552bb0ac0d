//! k-mer counting, abundance histograms and the expected-count formula.
//!
//! k-mers are packed two bits per base (A=00, C=01, G=10, T=11) with the first base in the
//! most significant position, so for a fixed `k` numeric order is lexicographic order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{CircularSequence, Nucleotide, ReadSet};

pub const MAX_K: usize = 32;

const LOW_BITS: u64 = 0x5555_5555_5555_5555;

#[inline]
fn mask(k: usize) -> u64 {
    if k == 32 {
        u64::MAX
    } else {
        (1u64 << (2 * k)) - 1
    }
}

#[inline]
pub(crate) fn packed_hamming(a: u64, b: u64) -> u32 {
    let x = a ^ b;
    ((x | (x >> 1)) & LOW_BITS).count_ones()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > MAX_K {
        return Err(Error::InvalidK {
            k,
            reason: format!("must lie in 1..={MAX_K}"),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Kmer {
    packed: u64,
    k: u8,
}

impl Kmer {
    pub fn from_nucleotides(symbols: &[Nucleotide]) -> Result<Kmer> {
        check_k(symbols.len())?;
        let packed = symbols.iter().fold(0u64, |acc, n| (acc << 2) | n.code() as u64);
        Ok(Kmer {
            packed,
            k: symbols.len() as u8,
        })
    }

    pub fn from_packed(packed: u64, k: usize) -> Result<Kmer> {
        check_k(k)?;
        if packed & !mask(k) != 0 {
            return Err(Error::InvalidParameter(format!(
                "packed value {packed:#x} too wide for k={k}"
            )));
        }
        Ok(Kmer { packed, k: k as u8 })
    }

    pub fn k(&self) -> usize {
        self.k as usize
    }

    pub fn packed(&self) -> u64 {
        self.packed
    }

    pub fn nucleotides(&self) -> impl Iterator<Item = Nucleotide> + '_ {
        let k = self.k();
        (0..k).map(move |i| Nucleotide::from_code((self.packed >> (2 * (k - 1 - i))) as u8))
    }
}

impl fmt::Display for Kmer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in self.nucleotides() {
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

impl Serialize for Kmer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Kmer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Kmer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Kmer> {
        Kmer::from_nucleotides(&crate::seq::parse_nucleotides(s)?)
    }
}

/// Number of positions at which two equal-length k-mers differ.
pub fn hamming(v: &Kmer, w: &Kmer) -> Result<usize> {
    if v.k != w.k {
        return Err(Error::LengthMismatch(v.k(), w.k()));
    }
    Ok(packed_hamming(v.packed, w.packed) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sequence,
    Reads,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Sequence => "sequence",
            Provenance::Reads => "reads",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequence" => Ok(Provenance::Sequence),
            "reads" => Ok(Provenance::Reads),
            _ => Err(Error::InvalidParameter(format!("unknown provenance {s:?}"))),
        }
    }
}

/// Occurrence counts of k-mers. Zero counts are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KmerTable {
    k: usize,
    counts: FxHashMap<u64, u64>,
    total: u64,
    provenance: Provenance,
}

impl KmerTable {
    pub fn empty(k: usize, provenance: Provenance) -> Result<Self> {
        check_k(k)?;
        Ok(KmerTable {
            k,
            counts: FxHashMap::default(),
            total: 0,
            provenance,
        })
    }

    /// Builds a table from explicit `(k-mer, count)` pairs; repeated keys are summed.
    pub fn from_counts<I>(k: usize, provenance: Provenance, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Kmer, u64)>,
    {
        let mut table = KmerTable::empty(k, provenance)?;
        for (kmer, count) in entries {
            if kmer.k() != k {
                return Err(Error::MismatchedK(kmer.k(), k));
            }
            table.add(kmer.packed, count);
        }
        Ok(table)
    }

    /// Counts the `G` circular windows of `x`.
    pub fn from_sequence(x: &CircularSequence, k: usize) -> Result<Self> {
        check_k(k)?;
        let g = x.len();
        if k > g {
            return Err(Error::InvalidK {
                k,
                reason: format!("exceeds sequence length {g}"),
            });
        }
        let mut table = KmerTable::empty(k, Provenance::Sequence)?;
        table.counts.reserve(g.min(1 << 20));
        let m = mask(k);
        let mut word = x.window(0, k - 1).fold(0u64, |acc, n| (acc << 2) | n.code() as u64);
        for n in x.window(k - 1, g) {
            word = ((word << 2) | n.code() as u64) & m;
            *table.counts.entry(word).or_insert(0) += 1;
        }
        table.total = g as u64;
        Ok(table)
    }

    /// Counts the `L - k + 1` linear windows of every read.
    pub fn from_reads(reads: &ReadSet, k: usize) -> Result<Self> {
        check_k(k)?;
        if k > reads.read_len() {
            return Err(Error::InvalidK {
                k,
                reason: format!("exceeds read length {}", reads.read_len()),
            });
        }
        let mut table = KmerTable::empty(k, Provenance::Reads)?;
        let m = mask(k);
        for read in reads.reads() {
            let symbols = read.symbols();
            let mut word = symbols[..k - 1]
                .iter()
                .fold(0u64, |acc, n| (acc << 2) | n.code() as u64);
            for n in &symbols[k - 1..] {
                word = ((word << 2) | n.code() as u64) & m;
                *table.counts.entry(word).or_insert(0) += 1;
            }
        }
        table.total = (reads.len() * (reads.read_len() - k + 1)) as u64;
        Ok(table)
    }

    fn add(&mut self, packed: u64, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(packed).or_insert(0) += count;
        self.total += count;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of distinct k-mers.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, kmer: &Kmer) -> u64 {
        if kmer.k() != self.k {
            return 0;
        }
        self.get_packed(kmer.packed)
    }

    #[inline]
    pub(crate) fn get_packed(&self, packed: u64) -> u64 {
        self.counts.get(&packed).copied().unwrap_or(0)
    }

    pub fn contains(&self, kmer: &Kmer) -> bool {
        kmer.k() == self.k && self.counts.contains_key(&kmer.packed)
    }

    /// Entries in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (Kmer, u64)> + '_ {
        let k = self.k as u8;
        self.counts.iter().map(move |(&packed, &c)| (Kmer { packed, k }, c))
    }

    pub(crate) fn iter_packed(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&p, &c)| (p, c))
    }

    /// Entries in lexicographic k-mer order.
    pub fn sorted(&self) -> Vec<(Kmer, u64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_unstable_by_key(|(kmer, _)| kmer.packed);
        entries
    }

    /// Pointwise sum of two tables with the same `k` and provenance.
    pub fn merge(&self, other: &KmerTable) -> Result<KmerTable> {
        if self.k != other.k {
            return Err(Error::MismatchedK(self.k, other.k));
        }
        if self.provenance != other.provenance {
            return Err(Error::MismatchedProvenance);
        }
        let (mut out, smaller) = if self.counts.len() >= other.counts.len() {
            (self.clone(), other)
        } else {
            (other.clone(), self)
        };
        for (p, c) in smaller.iter_packed() {
            out.add(p, c);
        }
        Ok(out)
    }

    pub fn abundance_histogram(&self) -> AbundanceHistogram {
        let mut entries = BTreeMap::new();
        for &c in self.counts.values() {
            *entries.entry(c).or_insert(0) += 1;
        }
        AbundanceHistogram { k: self.k, entries }
    }
}

/// `a_i`: number of distinct k-mers occurring exactly `i` times.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbundanceHistogram {
    pub k: usize,
    pub entries: BTreeMap<u64, u64>,
}

impl AbundanceHistogram {
    pub fn get(&self, multiplicity: u64) -> u64 {
        self.entries.get(&multiplicity).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(i, a)| i * a).sum()
    }
}

/// `scale * sum_w f_w (1-rate)^(k-d(v,w)) (rate/3)^d(v,w)` over the distinct k-mers `w` of a
/// sequence table.
///
/// With `scale = 1` this is the expected count of `v` in the mutated sequence; with
/// `scale = N(L-k+1)/G` it is the expected count of `v` across `N` reads of length `L`.
pub fn expected_kmer_count(target: &Kmer, source: &KmerTable, rate: f64, scale: f64) -> Result<f64> {
    if source.provenance != Provenance::Sequence {
        return Err(Error::InvalidParameter(
            "expected counts need a table counted from a sequence".into(),
        ));
    }
    if target.k() != source.k {
        return Err(Error::MismatchedK(target.k(), source.k));
    }
    let powers = channel_powers(source.k, rate);
    let sum: f64 = source
        .iter_packed()
        .map(|(w, f)| f as f64 * powers[packed_hamming(target.packed, w) as usize])
        .sum();
    Ok(scale * sum)
}

/// `(1-q)^(k-d) (q/3)^d` for `d = 0..=k`.
pub(crate) fn channel_powers(k: usize, q: f64) -> Vec<f64> {
    (0..=k)
        .map(|d| (1.0 - q).powi((k - d) as i32) * (q / 3.0).powi(d as i32))
        .collect()
}
