use std::collections::HashSet;

use mutrate::harness::{read_csv, run_experiment, summarize, write_csv, ExperimentConfig, TrialRecord};
use mutrate::EstimatorId;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

const SWEEP: &str = r#"{
    "sources": [
        {"type": "iid", "distribution": [0.4, 0.2, 0.2, 0.2], "length": 5000, "references": 2},
        {"type": "iid", "distribution": [0.25, 0.25, 0.25, 0.25], "length": 3000}
    ],
    "mode": "seq",
    "estimators": ["k1-single", "large-k-seq", "k1-reads", "large-k-reads"],
    "k_values": [11, 15],
    "p_grid": [0.01, 0.1],
    "s_grid": [0.0, 0.02],
    "coverage_grid": [3, 6],
    "read_length": 100,
    "trials_per_point": 2,
    "master_seed": 99
}"#;

fn in_pool(threads: usize, c: &ExperimentConfig) -> Vec<TrialRecord> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| run_experiment(c).unwrap())
}

#[test]
fn output_is_independent_of_thread_count() {
    let c = config(SWEEP);
    let one = in_pool(1, &c);
    let four = in_pool(4, &c);
    assert_eq!(one, four);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&mut a, &one).unwrap();
    write_csv(&mut b, &four).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trial_seeds_are_distinct_and_layout_complete() {
    let c = config(SWEEP);
    let records = run_experiment(&c).unwrap();
    // 3 references x 2 p x 2 s x 2 c x 2 trials, each with 1 + 2 + 1 + 2 estimator runs.
    assert_eq!(records.len(), 3 * 2 * 2 * 2 * 2 * 6);
    let distinct: HashSet<u64> = records.iter().map(|r| r.seed).collect();
    assert_eq!(distinct.len(), 48);
    assert!(records
        .iter()
        .all(|r| r.reads == Some((r.coverage.unwrap() * r.genome_len as f64 / 100.0).round() as usize)));
}

#[test]
fn csv_round_trips() {
    let records = run_experiment(&config(SWEEP)).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &records).unwrap();
    assert_eq!(read_csv(&buf[..]).unwrap(), records);
}

#[test]
fn seq_mode_reduces_to_table_estimates_without_noise() {
    // Reads spanning the whole circular sequence see every position exactly once each.
    let c = config(
        r#"{
        "sources": [{"type": "iid", "distribution": [0.4, 0.2, 0.2, 0.2], "length": 2000}],
        "mode": "seq",
        "estimators": ["k1-single", "k1-reads"],
        "p_grid": [0.1],
        "s_grid": [0.0],
        "coverage_grid": [20],
        "read_length": 2000,
        "trials_per_point": 200,
        "master_seed": 5,
        "one_mer": "A"
    }"#,
    );
    let records = run_experiment(&c).unwrap();
    let diffs: Vec<f64> = records
        .chunks(2)
        .map(|pair| {
            assert_eq!(pair[0].estimator, EstimatorId::K1Single);
            assert_eq!(pair[1].estimator, EstimatorId::K1Reads);
            pair[1].p_raw.unwrap() - pair[0].p_raw.unwrap()
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let se = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(mean.abs() <= 4.0 * se + 1e-12, "mean difference {mean}");
}

#[test]
fn table_mode_matches_seq_mode_on_shared_estimators() {
    let nonseq = config(
        r#"{
        "sources": [{"type": "iid", "distribution": [0.3, 0.2, 0.2, 0.3], "length": 4000}],
        "mode": "nonseq",
        "estimators": ["k1-single", "large-k-seq"],
        "k_values": [12],
        "p_grid": [0.05],
        "trials_per_point": 5,
        "master_seed": 17
    }"#,
    );
    let mut seq = nonseq.clone();
    seq.mode = mutrate::harness::Mode::Seq;
    seq.s_grid = vec![0.01];
    seq.coverage_grid = vec![2.0];
    seq.read_length = 200;
    let a = run_experiment(&nonseq).unwrap();
    let b = run_experiment(&seq).unwrap();
    let pa: Vec<_> = a.iter().map(|r| r.p_raw).collect();
    let pb: Vec<_> = b.iter().map(|r| r.p_raw).collect();
    assert_eq!(pa, pb);
}

#[test]
fn large_k_seq_is_accurate_at_low_rates() {
    let c = config(
        r#"{
        "sources": [{"type": "iid", "distribution": [0.25, 0.25, 0.25, 0.25], "length": 100000}],
        "mode": "nonseq",
        "estimators": ["large-k-seq"],
        "k_values": [30],
        "p_grid": [0.05],
        "trials_per_point": 20,
        "master_seed": 8
    }"#,
    );
    let boxes = summarize(&run_experiment(&c).unwrap());
    assert_eq!(boxes.len(), 1);
    assert!(boxes[0].median.unwrap().abs() < 0.05, "{:?}", boxes[0]);
}

#[test]
fn singular_trials_are_recorded_not_dropped() {
    // Every nucleotide at exactly 1/4 and GC at exactly 1/2: both denominators vanish.
    let dir = tempfile::tempdir().unwrap();
    let fasta = dir.path().join("balanced.fa");
    std::fs::write(&fasta, ">b\nACGTACGTACGTACGT\n").unwrap();
    let text = format!(
        r#"{{
        "sources": [{{"type": "fasta", "path": {:?}}}],
        "mode": "nonseq",
        "estimators": ["k1-single", "k1-gc"],
        "p_grid": [0.1],
        "trials_per_point": 3,
        "master_seed": 1
    }}"#,
        fasta
    );
    let records = run_experiment(&config(&text)).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records
        .iter()
        .all(|r| r.error.as_deref() == Some("SingularDenominator")));
    let boxes = summarize(&records);
    assert!(boxes
        .iter()
        .all(|b| b.count == 0 && b.error_count == 3 && b.median.is_none()));
    assert_eq!(boxes[0].key.source, "balanced");
}
