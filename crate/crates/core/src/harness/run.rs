use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode, SourceSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_k1_gc, estimate_k1_reads, estimate_k1_single, estimate_large_k_reads, estimate_large_k_seq,
    solve_general_k, DistanceProfile, ErrorRate, EstimateResult, EstimatorId,
};
use crate::io::fasta::{read_fasta, FastaOptions};
use crate::kmer::KmerTable;
use crate::seq::{generate_iid_sequence, mutate, sample_reads, CircularSequence, Nucleotide, SubstitutionChannel};

/// One estimator applied to one simulated (source, mutated) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub source: String,
    pub reference: usize,
    pub genome_len: usize,
    pub mode: Mode,
    pub estimator: EstimatorId,
    pub k: usize,
    pub p: f64,
    pub s: Option<f64>,
    pub coverage: Option<f64>,
    pub reads: Option<usize>,
    pub read_length: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub nucleotide: Option<Nucleotide>,
    pub p_raw: Option<f64>,
    pub p_clamped: Option<f64>,
    pub relative_error: Option<f64>,
    pub lambda: Option<u64>,
    pub retained_mass: Option<u64>,
    pub warnings: String,
    pub error: Option<String>,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit mix of its parts.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |h, &p| splitmix64(h ^ splitmix64(p)))
}

const TAG_REFERENCE: u64 = 1;
const TAG_TRIAL: u64 = 2;
const TAG_X_READS: u64 = 3;
const TAG_Y_READS: u64 = 4;

struct Reference {
    source_idx: usize,
    reference: usize,
    label: String,
    x: CircularSequence,
    composition: [u64; 4],
    by_k: HashMap<usize, SourceKmers>,
}

struct SourceKmers {
    table: KmerTable,
    subset: Vec<u64>,
    profile: Option<DistanceProfile>,
}

fn load_references(config: &ExperimentConfig) -> Result<Vec<Reference>> {
    let mut refs = Vec::new();
    for (source_idx, source) in config.sources.iter().enumerate() {
        let label = source.label();
        let seqs: Vec<CircularSequence> = match source {
            SourceSpec::Fasta {
                path, drop_non_acgt, ..
            } => read_fasta(
                path,
                FastaOptions {
                    drop_non_acgt: *drop_non_acgt,
                },
            )?
            .into_iter()
            .map(|r| r.sequence)
            .collect(),
            SourceSpec::Iid {
                distribution,
                length,
                references,
                ..
            } => (0..*references)
                .map(|r| {
                    let seed = derive_seed(&[config.master_seed, TAG_REFERENCE, source_idx as u64, r as u64]);
                    generate_iid_sequence(*length, *distribution, seed)
                })
                .collect::<Result<_>>()?,
        };
        for (reference, x) in seqs.into_iter().enumerate() {
            refs.push(Reference {
                source_idx,
                reference,
                label: label.clone(),
                composition: x.composition(),
                x,
                by_k: HashMap::new(),
            });
        }
    }
    Ok(refs)
}

fn prepare(reference: &mut Reference, config: &ExperimentConfig) -> Result<()> {
    let g = reference.x.len();
    if config.mode == Mode::Seq && config.read_length > g {
        return Err(Error::Config(format!(
            "read length {} exceeds length {g} of source {}",
            config.read_length, reference.label
        )));
    }
    for (est, k) in config.estimator_runs() {
        if !matches!(est, EstimatorId::GeneralK | EstimatorId::LargeKSeq) {
            continue;
        }
        if k > g {
            return Err(Error::Config(format!(
                "k = {k} exceeds length {g} of source {}",
                reference.label
            )));
        }
        let entry = match reference.by_k.entry(k) {
            Entry::Occupied(o) => o.into_mut(),
            Entry::Vacant(v) => {
                let table = KmerTable::from_sequence(&reference.x, k)?;
                let subset = config.subset.resolve(&table)?;
                v.insert(SourceKmers {
                    table,
                    subset,
                    profile: None,
                })
            }
        };
        if est == EstimatorId::GeneralK && entry.profile.is_none() {
            entry.profile = Some(DistanceProfile::new(&entry.table, &entry.subset));
        }
    }
    Ok(())
}

/// Index of the nucleotide whose count deviates most from a quarter of `total`.
fn most_deviant(counts: &[u64; 4]) -> Nucleotide {
    let total: u64 = counts.iter().sum();
    let dev = |c: u64| (4 * c).abs_diff(total);
    let mut best = 0;
    for i in 1..4 {
        if dev(counts[i]) > dev(counts[best]) {
            best = i;
        }
    }
    Nucleotide::ALL[best]
}

fn gc(counts: &[u64; 4]) -> f64 {
    let total: u64 = counts.iter().sum();
    (counts[1] + counts[2]) as f64 / total as f64
}

/// Per-trial grid coordinates.
#[derive(Clone, Copy)]
struct Unit {
    ref_idx: usize,
    p_idx: usize,
    s_idx: usize,
    c_idx: usize,
    trial: usize,
    seed: u64,
}

/// Runs every trial of the sweep. The output order and content depend only on `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut references = load_references(config)?;
    for r in &mut references {
        prepare(r, config)?;
    }
    let s_grid = config.effective_s_grid();
    let c_grid = config.effective_coverage_grid();

    let mut units = Vec::new();
    for (ref_idx, r) in references.iter().enumerate() {
        for p_idx in 0..config.p_grid.len() {
            for s_idx in 0..s_grid.len() {
                for c_idx in 0..c_grid.len() {
                    for trial in 0..config.trials_per_point {
                        let seed = derive_seed(&[
                            config.master_seed,
                            TAG_TRIAL,
                            r.source_idx as u64,
                            r.reference as u64,
                            p_idx as u64,
                            s_idx as u64,
                            c_idx as u64,
                            trial as u64,
                        ]);
                        units.push(Unit {
                            ref_idx,
                            p_idx,
                            s_idx,
                            c_idx,
                            trial,
                            seed,
                        });
                    }
                }
            }
        }
    }
    let distinct: HashSet<u64> = units.iter().map(|u| u.seed).collect();
    if distinct.len() != units.len() {
        return Err(Error::Config("trial seed collision; choose another master_seed".into()));
    }
    info!("running {} trials over {} references", units.len(), references.len());

    let runs = config.estimator_runs();
    let nested: Vec<Vec<TrialRecord>> = units
        .par_iter()
        .map(|u| run_unit(config, &references[u.ref_idx], &runs, &s_grid, &c_grid, u))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn run_unit(
    config: &ExperimentConfig,
    reference: &Reference,
    runs: &[(EstimatorId, usize)],
    s_grid: &[f64],
    c_grid: &[Option<f64>],
    unit: &Unit,
) -> Result<Vec<TrialRecord>> {
    let p = config.p_grid[unit.p_idx];
    let s = s_grid[unit.s_idx];
    let coverage = c_grid[unit.c_idx];
    let x = &reference.x;
    let g = x.len();
    let y = mutate(x, &SubstitutionChannel::new(p)?, unit.seed);
    let y_composition = y.composition();

    let reads = match (config.mode, coverage) {
        (Mode::Seq, Some(c)) => {
            let l = config.read_length;
            let n = (c * g as f64 / l as f64).round() as usize;
            let channel = SubstitutionChannel::new(s)?;
            let xr = sample_reads(x, l, n, &channel, derive_seed(&[unit.seed, TAG_X_READS]))?;
            let yr = sample_reads(&y, l, n, &channel, derive_seed(&[unit.seed, TAG_Y_READS]))?;
            Some((xr, yr))
        }
        _ => None,
    };

    let mut y_tables: HashMap<usize, KmerTable> = HashMap::new();
    let mut read_tables: HashMap<usize, (KmerTable, KmerTable)> = HashMap::new();
    let mut out = Vec::with_capacity(runs.len());
    for &(est, k) in runs {
        let mut nucleotide = None;
        let result: Result<EstimateResult> = match est {
            EstimatorId::K1Single => {
                let v = config.one_mer.unwrap_or_else(|| most_deviant(&reference.composition));
                nucleotide = Some(v);
                let i = v as usize;
                estimate_k1_single(reference.composition[i] as f64, y_composition[i] as f64, g as f64)
            }
            EstimatorId::K1Gc => estimate_k1_gc(gc(&reference.composition), gc(&y_composition)),
            EstimatorId::GeneralK | EstimatorId::LargeKSeq => {
                let src = &reference.by_k[&k];
                let yt = match y_tables.entry(k) {
                    Entry::Occupied(o) => o.into_mut(),
                    Entry::Vacant(v) => v.insert(KmerTable::from_sequence(&y, k)?),
                };
                if est == EstimatorId::LargeKSeq {
                    estimate_large_k_seq(yt, &src.table, g as u64)
                } else {
                    let observed: u64 = src.subset.iter().map(|&v| yt.get_packed(v)).sum();
                    let profile = src.profile.as_ref().expect("profile prepared for general-k");
                    solve_general_k(profile, observed as f64)
                }
            }
            EstimatorId::K1Reads | EstimatorId::LargeKReads => {
                let (xr, yr) = reads.as_ref().expect("reads simulated in seq mode");
                let (xt, yt) = match read_tables.entry(k) {
                    Entry::Occupied(o) => o.into_mut(),
                    Entry::Vacant(v) => v.insert((KmerTable::from_reads(xr, k)?, KmerTable::from_reads(yr, k)?)),
                };
                if est == EstimatorId::K1Reads {
                    let counts = |t: &KmerTable| {
                        let mut c = [0u64; 4];
                        for (kmer, n) in t.iter() {
                            c[kmer.packed() as usize] = n;
                        }
                        c
                    };
                    let (hx, hy) = (counts(xt), counts(yt));
                    let v = config.one_mer.unwrap_or_else(|| most_deviant(&hx));
                    nucleotide = Some(v);
                    estimate_k1_reads(
                        hx[v as usize] as f64,
                        hy[v as usize] as f64,
                        xr.len() as u64,
                        xr.read_len() as u64,
                    )
                } else {
                    let rate = match config.s_upper_bound {
                        Some(bound) => ErrorRate::UpperBound(bound),
                        None => ErrorRate::Known(s),
                    };
                    estimate_large_k_reads(xt, yt, rate)
                }
            }
        };

        let seq_fields = reads.as_ref().map(|(xr, _)| (xr.len(), xr.read_len()));
        let mut record = TrialRecord {
            source: reference.label.clone(),
            reference: reference.reference,
            genome_len: g,
            mode: config.mode,
            estimator: est,
            k,
            p,
            s: seq_fields.map(|_| s),
            coverage,
            reads: seq_fields.map(|f| f.0),
            read_length: seq_fields.map(|f| f.1),
            trial: unit.trial,
            seed: unit.seed,
            nucleotide,
            p_raw: None,
            p_clamped: None,
            relative_error: None,
            lambda: None,
            retained_mass: None,
            warnings: String::new(),
            error: None,
        };
        match result {
            Ok(r) => {
                record.p_raw = Some(r.p_raw);
                record.p_clamped = Some(r.p_clamped);
                record.relative_error = Some(r.p_raw / p - 1.0);
                record.lambda = r.diagnostics.lambda;
                record.retained_mass = r.diagnostics.retained_mass;
                record.warnings = r
                    .diagnostics
                    .warnings
                    .iter()
                    .map(|w| {
                        serde_json::to_value(w)
                            .ok()
                            .and_then(|v| v.as_str().map(String::from))
                            .unwrap_or_default()
                    })
                    .collect::<Vec<_>>()
                    .join(";");
            }
            Err(e) => record.error = Some(e.code().to_string()),
        }
        out.push(record);
    }
    Ok(out)
}
