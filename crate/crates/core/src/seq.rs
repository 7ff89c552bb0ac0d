//! Circular sequences, the i.i.d. substitution channel and the uniform read sampler.
//!
//! Random draws are consumed in a fixed order so that regeneration from a seed is stable:
//!
//! * [`generate_iid_sequence`] and [`mutate`] use ChaCha8 stream 0 of the seed and draw one
//!   `f64` per position (plus one `0..3` draw per substituted position for [`mutate`]).
//! * [`sample_reads`] gives read `i` its own ChaCha8 stream `i + 1` of the seed. Each read draws
//!   its start position first, then applies the error channel position by position.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Nucleotide {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Nucleotide {
    pub const ALL: [Nucleotide; 4] = [Nucleotide::A, Nucleotide::C, Nucleotide::G, Nucleotide::T];

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn from_code(code: u8) -> Nucleotide {
        Self::ALL[(code & 3) as usize]
    }

    /// Case-insensitive.
    pub fn from_ascii(byte: u8) -> Option<Nucleotide> {
        match byte {
            b'A' | b'a' => Some(Nucleotide::A),
            b'C' | b'c' => Some(Nucleotide::C),
            b'G' | b'g' => Some(Nucleotide::G),
            b'T' | b't' => Some(Nucleotide::T),
            _ => None,
        }
    }

    pub fn to_ascii(self) -> u8 {
        b"ACGT"[self as usize]
    }
}

impl fmt::Display for Nucleotide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_ascii() as char)
    }
}

impl FromStr for Nucleotide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = s.as_bytes();
        match bytes {
            [b] => Nucleotide::from_ascii(*b).ok_or(Error::InvalidNucleotide {
                symbol: *b as char,
                line: 1,
                column: 1,
            }),
            _ => Err(Error::InvalidParameter(format!(
                "expected a single nucleotide, got {s:?}"
            ))),
        }
    }
}

/// Parses a nucleotide string strictly, reporting the first offending symbol.
pub fn parse_nucleotides(s: &str) -> Result<Vec<Nucleotide>> {
    s.bytes()
        .enumerate()
        .map(|(i, b)| {
            Nucleotide::from_ascii(b).ok_or(Error::InvalidNucleotide {
                symbol: b as char,
                line: 1,
                column: i + 1,
            })
        })
        .collect()
}

pub fn nucleotides_to_string(symbols: &[Nucleotide]) -> String {
    symbols.iter().map(|n| n.to_ascii() as char).collect()
}

/// A nonempty sequence over `{A,C,G,T}` whose positions are taken modulo its length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CircularSequence {
    symbols: Vec<Nucleotide>,
}

impl CircularSequence {
    pub fn new(symbols: Vec<Nucleotide>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(CircularSequence { symbols })
    }

    /// Length `G`.
    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// Always false; kept for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize) -> Nucleotide {
        self.symbols[i % self.symbols.len()]
    }

    pub fn symbols(&self) -> &[Nucleotide] {
        &self.symbols
    }

    /// The `len` symbols starting at `start`, wrapping around the end.
    pub fn window(&self, start: usize, len: usize) -> impl Iterator<Item = Nucleotide> + '_ {
        let g = self.symbols.len();
        (0..len).map(move |j| self.symbols[(start + j) % g])
    }

    /// Occurrences of each nucleotide, indexed by [`Nucleotide::code`].
    pub fn composition(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for &n in &self.symbols {
            counts[n as usize] += 1;
        }
        counts
    }

    pub fn hamming_distance(&self, other: &CircularSequence) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(self.symbols.iter().zip(&other.symbols).filter(|(a, b)| a != b).count())
    }
}

impl fmt::Display for CircularSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&nucleotides_to_string(&self.symbols))
    }
}

impl FromStr for CircularSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CircularSequence::new(parse_nucleotides(s)?)
    }
}

/// Each position is kept with probability `1 - rate`, otherwise replaced by one of the three
/// other nucleotides chosen uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubstitutionChannel {
    rate: f64,
}

impl SubstitutionChannel {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(SubstitutionChannel { rate })
    }

    pub fn identity() -> Self {
        SubstitutionChannel { rate: 0.0 }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    #[inline]
    pub fn apply<R: Rng + ?Sized>(&self, n: Nucleotide, rng: &mut R) -> Nucleotide {
        let u: f64 = rng.random();
        if u < 1.0 - self.rate {
            n
        } else {
            let shift: u8 = rng.random_range(1..4);
            Nucleotide::from_code(n.code() + shift)
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Passes every position of `x` through `channel` independently.
pub fn mutate(x: &CircularSequence, channel: &SubstitutionChannel, seed: u64) -> CircularSequence {
    if channel.rate == 0.0 {
        return x.clone();
    }
    let mut rng = stream_rng(seed, 0);
    let symbols = x.symbols.iter().map(|&n| channel.apply(n, &mut rng)).collect();
    CircularSequence { symbols }
}

/// Draws a sequence of length `g` with i.i.d. symbols from `distribution` (order A, C, G, T).
pub fn generate_iid_sequence(g: usize, distribution: [f64; 4], seed: u64) -> Result<CircularSequence> {
    validate_distribution(&distribution)?;
    if g == 0 {
        return Err(Error::EmptySequence);
    }
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for (c, p) in cumulative.iter_mut().zip(distribution) {
        acc += p;
        *c = acc;
    }
    let mut rng = stream_rng(seed, 0);
    let symbols = (0..g)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cumulative.iter().position(|&c| u < c).unwrap_or_else(|| {
                // u == acc can only arise from rounding; pick the last symbol with mass
                distribution.iter().rposition(|&p| p > 0.0).unwrap_or(3)
            });
            Nucleotide::ALL[idx]
        })
        .collect();
    Ok(CircularSequence { symbols })
}

pub fn validate_distribution(distribution: &[f64; 4]) -> Result<()> {
    if distribution.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "probabilities must be nonnegative, got {distribution:?}"
        )));
    }
    let sum: f64 = distribution.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Read {
    symbols: Vec<Nucleotide>,
    origin: Option<usize>,
}

impl Read {
    pub fn new(symbols: Vec<Nucleotide>) -> Self {
        Read { symbols, origin: None }
    }

    pub fn symbols(&self) -> &[Nucleotide] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// 0-based start position in the source, known only for simulated reads.
    ///
    /// Ground truth for tests; no estimator consumes it and it is never serialized.
    #[doc(hidden)]
    pub fn origin(&self) -> Option<usize> {
        self.origin
    }
}

/// `N` reads of fixed length `L` drawn from a source of length `G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadSet {
    reads: Vec<Read>,
    genome_len: usize,
    read_len: usize,
}

impl ReadSet {
    pub fn new(reads: Vec<Read>, genome_len: usize, read_len: usize) -> Result<Self> {
        if read_len == 0 {
            return Err(Error::ZeroReadLength);
        }
        if let Some(bad) = reads.iter().find(|r| r.len() != read_len) {
            return Err(Error::LengthMismatch(bad.len(), read_len));
        }
        Ok(ReadSet {
            reads,
            genome_len,
            read_len,
        })
    }

    pub fn reads(&self) -> &[Read] {
        &self.reads
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn genome_len(&self) -> usize {
        self.genome_len
    }

    pub fn read_len(&self) -> usize {
        self.read_len
    }

    /// `c = N L / G`.
    pub fn coverage(&self) -> f64 {
        (self.reads.len() * self.read_len) as f64 / self.genome_len as f64
    }

    /// Splits off reads `at..` into a new set with the same geometry.
    pub fn split_at(&self, at: usize) -> (ReadSet, ReadSet) {
        let (a, b) = self.reads.split_at(at);
        let make = |r: &[Read]| ReadSet {
            reads: r.to_vec(),
            genome_len: self.genome_len,
            read_len: self.read_len,
        };
        (make(a), make(b))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleOptions {
    /// Permit `L > G`, in which case a read wraps around the circle more than once.
    pub allow_wrap_repeat: bool,
}

pub fn sample_reads(
    x: &CircularSequence,
    read_len: usize,
    count: usize,
    error_channel: &SubstitutionChannel,
    seed: u64,
) -> Result<ReadSet> {
    sample_reads_with(x, read_len, count, error_channel, seed, SampleOptions::default())
}

/// Draws `count` reads with uniform circular start positions, each passed through
/// `error_channel` independently.
pub fn sample_reads_with(
    x: &CircularSequence,
    read_len: usize,
    count: usize,
    error_channel: &SubstitutionChannel,
    seed: u64,
    options: SampleOptions,
) -> Result<ReadSet> {
    if read_len == 0 {
        return Err(Error::ZeroReadLength);
    }
    let g = x.len();
    if read_len > g && !options.allow_wrap_repeat {
        return Err(Error::ReadLongerThanGenome {
            read_len,
            genome_len: g,
        });
    }
    let reads = (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64 + 1);
            let start = rng.random_range(0..g);
            let symbols = x
                .window(start, read_len)
                .map(|n| error_channel.apply(n, &mut rng))
                .collect();
            Read {
                symbols,
                origin: Some(start),
            }
        })
        .collect();
    Ok(ReadSet {
        reads,
        genome_len: g,
        read_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> CircularSequence {
        s.parse().unwrap()
    }

    #[test]
    fn identity_channel_leaves_sequence_unchanged() {
        let x = generate_iid_sequence(500, [0.1, 0.2, 0.3, 0.4], 7).unwrap();
        for seed in 0..5 {
            assert_eq!(mutate(&x, &SubstitutionChannel::identity(), seed), x);
        }
    }

    #[test]
    fn substitution_always_changes_symbol() {
        let ch = SubstitutionChannel::new(0.999_999).unwrap();
        let x = seq("ACGTACGTACGT");
        let y = mutate(&x, &ch, 3);
        assert_eq!(x.hamming_distance(&y).unwrap(), x.len());
    }

    #[test]
    fn expected_count_of_a_by_enumeration() {
        // Enumerate all 4^4 outcomes of "AAAT" under rate 0.3 and weight them by probability.
        let x = seq("AAAT");
        let p = 0.3;
        let mut expected = 0.0;
        for outcome in 0..256u32 {
            let mut prob = 1.0;
            let mut count_a = 0;
            for pos in 0..4 {
                let sym = Nucleotide::from_code(((outcome >> (2 * pos)) & 3) as u8);
                prob *= if sym == x.get(pos) { 1.0 - p } else { p / 3.0 };
                if sym == Nucleotide::A {
                    count_a += 1;
                }
            }
            expected += prob * count_a as f64;
        }
        assert!((expected - 2.2).abs() < 1e-12);

        // and the sampler agrees in mean
        let ch = SubstitutionChannel::new(p).unwrap();
        let trials = 20_000;
        let total: u64 = (0..trials).map(|s| mutate(&x, &ch, s).composition()[0]).sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 2.2).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn hamming_distance_is_binomial() {
        let g = 1000;
        let p = 0.1;
        let x = generate_iid_sequence(g, [0.25; 4], 1).unwrap();
        let ch = SubstitutionChannel::new(p).unwrap();
        let trials = 10_000;
        let mean = (0..trials)
            .map(|s| x.hamming_distance(&mutate(&x, &ch, s + 100)).unwrap() as f64)
            .sum::<f64>()
            / trials as f64;
        let sd = (g as f64 * p * (1.0 - p)).sqrt();
        assert!((mean - p * g as f64).abs() <= 3.0 * sd / (trials as f64).sqrt() * 1.5);
        assert!((mean - p * g as f64).abs() <= 3.0 * sd);
    }

    #[test]
    fn degenerate_distribution() {
        let x = generate_iid_sequence(5, [1.0, 0.0, 0.0, 0.0], 9).unwrap();
        assert_eq!(x.to_string(), "AAAAA");
    }

    #[test]
    fn iid_composition_concentrates() {
        let x = generate_iid_sequence(100_000, [0.25; 4], 11).unwrap();
        let fa = x.composition()[0] as f64 / x.len() as f64;
        assert!((fa - 0.25).abs() < 0.01);

        let x = generate_iid_sequence(1_000_000, [0.4, 0.2, 0.2, 0.2], 12).unwrap();
        let fa = x.composition()[0] as f64 / x.len() as f64;
        assert!((fa - 0.4).abs() < 0.002);
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(matches!(
            generate_iid_sequence(5, [0.5, 0.5, 0.5, 0.0], 0),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            generate_iid_sequence(5, [-0.5, 0.5, 0.5, 0.5], 0),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(generate_iid_sequence(5, [0.25 + 1e-12, 0.25, 0.25, 0.25], 0).is_ok());
    }

    #[test]
    fn rates_outside_unit_interval_rejected() {
        assert!(SubstitutionChannel::new(1.0).is_err());
        assert!(SubstitutionChannel::new(-0.1).is_err());
        assert!(SubstitutionChannel::new(f64::NAN).is_err());
    }

    #[test]
    fn full_length_noiseless_read_is_rotation() {
        let x = seq("ACGGTCATTGCA");
        let rs = sample_reads(&x, x.len(), 1, &SubstitutionChannel::identity(), 5).unwrap();
        let read = &rs.reads()[0];
        let start = read.origin().unwrap();
        let rotated: Vec<_> = x.window(start, x.len()).collect();
        assert_eq!(read.symbols(), &rotated[..]);
        let doubled = format!("{x}{x}");
        assert!(doubled.contains(&nucleotides_to_string(read.symbols())));
    }

    #[test]
    fn long_reads_need_explicit_wrap() {
        let x = seq("ACGT");
        let ch = SubstitutionChannel::identity();
        assert!(matches!(
            sample_reads(&x, 5, 1, &ch, 0),
            Err(Error::ReadLongerThanGenome { .. })
        ));
        let opts = SampleOptions {
            allow_wrap_repeat: true,
        };
        let rs = sample_reads_with(&x, 9, 3, &ch, 0, opts).unwrap();
        assert!(rs.reads().iter().all(|r| r.len() == 9));
    }

    #[test]
    fn empty_read_set_allowed() {
        let x = seq("ACGT");
        let rs = sample_reads(&x, 2, 0, &SubstitutionChannel::identity(), 0).unwrap();
        assert!(rs.is_empty());
        assert_eq!(rs.coverage(), 0.0);
    }

    #[test]
    fn coverage_per_position_is_binomial() {
        let g = 10_000;
        let (n, l) = (10_000, 100);
        let x = generate_iid_sequence(g, [0.25; 4], 2).unwrap();
        let rs = sample_reads(&x, l, n, &SubstitutionChannel::identity(), 3).unwrap();
        let mut depth = vec![0u32; g];
        for r in rs.reads() {
            let start = r.origin().unwrap();
            for j in 0..l {
                depth[(start + j) % g] += 1;
            }
        }
        let mean = depth.iter().map(|&d| d as f64).sum::<f64>() / g as f64;
        assert_eq!(mean, 100.0);
        assert_eq!(rs.coverage(), 100.0);
        // Binomial(N, L/G) per position: nearly every position lies within 3 sd of 100.
        let sd = (n as f64 * 0.01 * 0.99).sqrt();
        let within = depth.iter().filter(|&&d| (d as f64 - 100.0).abs() <= 3.0 * sd).count();
        assert!(within as f64 / g as f64 >= 0.99, "{within}");
    }

    #[test]
    fn read_errors_occur_at_rate_s() {
        let s = 0.05;
        let x = generate_iid_sequence(5_000, [0.25; 4], 4).unwrap();
        let (n, l) = (2_000, 150);
        let rs = sample_reads(&x, l, n, &SubstitutionChannel::new(s).unwrap(), 5).unwrap();
        let mismatches: usize = rs
            .reads()
            .iter()
            .map(|r| {
                x.window(r.origin().unwrap(), l)
                    .zip(r.symbols())
                    .filter(|(a, b)| a != *b)
                    .count()
            })
            .sum();
        let total = (n * l) as f64;
        let frac = mismatches as f64 / total;
        assert!((frac - s).abs() <= 3.0 * (s * (1.0 - s) / total).sqrt(), "{frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let x = generate_iid_sequence(2_000, [0.3, 0.2, 0.2, 0.3], 8).unwrap();
        let ch = SubstitutionChannel::new(0.02).unwrap();
        assert_eq!(mutate(&x, &ch, 1), mutate(&x, &ch, 1));
        assert_ne!(mutate(&x, &ch, 1), mutate(&x, &ch, 2));
        let a = sample_reads(&x, 100, 50, &ch, 42).unwrap();
        let b = sample_reads(&x, 100, 50, &ch, 42).unwrap();
        assert_eq!(a, b);
        // read i depends only on (seed, i): a shorter run is a prefix of a longer one
        let c = sample_reads(&x, 100, 20, &ch, 42).unwrap();
        assert_eq!(c.reads(), &a.reads()[..20]);
    }

    #[test]
    fn parse_reports_column() {
        match "ACNT".parse::<CircularSequence>() {
            Err(Error::InvalidNucleotide { symbol, column, .. }) => {
                assert_eq!(symbol, 'N');
                assert_eq!(column, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!("".parse::<CircularSequence>(), Err(Error::EmptySequence)));
    }
}
