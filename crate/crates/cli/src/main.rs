use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::warn;

use mutrate::bounds::{self, BoundParams};
use mutrate::estimators::{
    estimate_general_k, estimate_k1_gc, estimate_k1_reads, estimate_k1_single, estimate_large_k_reads,
    estimate_large_k_seq, ErrorRate, EstimateResult, EstimatorId, SubsetSpec,
};
use mutrate::harness::{self, ExperimentConfig};
use mutrate::io::{self as mio, FastaOptions};
use mutrate::seq::{
    generate_iid_sequence, mutate, sample_reads, CircularSequence, Nucleotide, ReadSet, SubstitutionChannel,
};
use mutrate::{Kmer, KmerTable, Provenance};

#[derive(Parser)]
#[command(name = "mutrate", version, about = "Substitution-rate estimation from k-mer counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an i.i.d. random sequence as FASTA.
    Gen(GenArgs),
    /// Apply the substitution channel to every record of a FASTA file.
    Mutate(MutateArgs),
    /// Sample error-prone reads from a circular sequence.
    Reads(ReadsArgs),
    /// Count k-mers of a FASTA sequence or a read set.
    Count(CountArgs),
    /// Estimate the mutation rate between a source and a mutated sequence.
    Estimate(EstimateArgs),
    /// Evaluate the concentration bounds.
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// Run a Monte-Carlo sweep described by a JSON config.
    Experiment(ExperimentArgs),
}

/// Accepts integers written as `1000000` or `1e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("not a non-negative integer: {s}"));
    }
    Ok(v as usize)
}

fn parse_distribution(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad probability {p:?}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected four comma-separated probabilities for A,C,G,T".to_string())
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_count)]
    length: usize,
    /// Probabilities of A,C,G,T.
    #[arg(long, value_parser = parse_distribution, default_value = "0.25,0.25,0.25,0.25")]
    dist: [f64; 4],
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "seq")]
    id: String,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    p: f64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReadsArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short = 'L', long, value_parser = parse_count)]
    read_length: usize,
    /// Number of reads.
    #[arg(short = 'N', long, value_parser = parse_count, conflicts_with = "coverage", required_unless_present = "coverage")]
    n: Option<usize>,
    /// Coverage c; N = round(c G / L).
    #[arg(long)]
    coverage: Option<f64>,
    /// Per-base sequencing error rate.
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    /// FASTA file or read set.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, value_parser = parse_count)]
    k: usize,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Nonseq,
    Seq,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(short, long)]
    estimator: EstimatorId,
    /// Checked against the estimator when given.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Source: FASTA or k-mer table.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Mutated sequence: FASTA or k-mer table.
    #[arg(long)]
    y: Option<PathBuf>,
    /// Reads of the source: read set or read k-mer table.
    #[arg(long)]
    x_reads: Option<PathBuf>,
    /// Reads of the mutated sequence.
    #[arg(long)]
    y_reads: Option<PathBuf>,
    #[arg(short, value_parser = parse_count)]
    k: Option<usize>,
    /// Nucleotide for the single-nucleotide estimators (default: the most skewed one in x).
    #[arg(long)]
    nucleotide: Option<Nucleotide>,
    /// `all`, `top:<m>` or a comma-separated k-mer list.
    #[arg(long, default_value = "all")]
    subset: String,
    /// Sequencing error rate.
    #[arg(long)]
    s: Option<f64>,
    /// Upper bound on the sequencing error rate.
    #[arg(long, conflicts_with = "s")]
    s_upper: Option<f64>,
    /// Treat non-ACGT FASTA symbols as droppable instead of fatal.
    #[arg(long)]
    drop_non_acgt: bool,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Minimum nucleotide skew for the single-nucleotide guarantee (full grid when p, eps and G are omitted).
    Table1 {
        #[arg(long, requires = "genome_len")]
        p: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(short = 'G', long = "genome-len", alias = "G", value_parser = parse_count, requires = "p")]
        genome_len: Option<usize>,
    },
    /// Required skew and success probability of the read-based single-nucleotide guarantee.
    Theorem1 {
        #[arg(short = 'G', long = "genome-len", alias = "G", value_parser = parse_count)]
        genome_len: usize,
        #[arg(short = 'N', long, value_parser = parse_count)]
        n: usize,
        #[arg(short = 'L', long, value_parser = parse_count)]
        read_length: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        eps: f64,
        /// Total failure probability, split evenly over the three terms.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Per-trial CSV (overrides the config; stdout when neither is set).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON box-plot summary (overrides the config).
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

enum Input {
    Sequence(CircularSequence),
    Table(KmerTable),
    Reads(ReadSet),
}

fn load(path: &Path, drop_non_acgt: bool) -> Result<Input> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let first = reader.fill_buf()?.to_vec();
    let text = String::from_utf8_lossy(&first);
    let ctx = || format!("reading {}", path.display());
    let input = if text.starts_with('>') {
        let mut records = mio::parse_fasta(reader, FastaOptions { drop_non_acgt }).with_context(ctx)?;
        if records.len() > 1 {
            warn!("{}: using the first of {} records", path.display(), records.len());
        }
        Input::Sequence(records.swap_remove(0).sequence)
    } else if text.starts_with(mio::formats::TABLE_VERSION_LINE) || text.starts_with("#k=") {
        Input::Table(mio::read_table(reader).with_context(ctx)?)
    } else if text.starts_with(mio::formats::READS_VERSION_LINE) || text.starts_with("#L=") {
        Input::Reads(mio::read_reads(reader).with_context(ctx)?)
    } else {
        bail!("{}: not a FASTA file, k-mer table or read set", path.display());
    };
    Ok(input)
}

fn table_of(input: &Input, k: usize) -> Result<KmerTable> {
    Ok(match input {
        Input::Sequence(s) => KmerTable::from_sequence(s, k)?,
        Input::Reads(r) => KmerTable::from_reads(r, k)?,
        Input::Table(t) if t.k() == k => t.clone(),
        Input::Table(t) => bail!("table has k = {}, but k = {k} was requested", t.k()),
    })
}

fn counts(t: &KmerTable) -> [u64; 4] {
    let mut c = [0u64; 4];
    for (v, n) in t.iter() {
        c[v.packed() as usize] = n;
    }
    c
}

fn most_skewed(c: &[u64; 4]) -> Nucleotide {
    let total: u64 = c.iter().sum();
    let mut best = 0;
    for i in 1..4 {
        if (4 * c[i]).abs_diff(total) > (4 * c[best]).abs_diff(total) {
            best = i;
        }
    }
    Nucleotide::ALL[best]
}

fn parse_subset(s: &str) -> Result<SubsetSpec> {
    if s == "all" {
        return Ok(SubsetSpec::All);
    }
    if let Some(m) = s.strip_prefix("top:") {
        return Ok(SubsetSpec::TopM(m.parse().context("top:<m> needs an integer")?));
    }
    let set: BTreeSet<Kmer> = s.split(',').map(|v| v.trim().parse()).collect::<Result<_, _>>()?;
    Ok(SubsetSpec::Explicit(set))
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str, est: EstimatorId) -> &'a Path {
    match p {
        Some(p) => p,
        None => usage_error(&format!("{est} needs {flag}")),
    }
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let est = a.estimator;
    if let Some(mode) = a.mode {
        if mode == ModeArg::Nonseq && est.uses_reads() {
            bail!("{est} works from reads and is not available in nonseq mode");
        }
    }
    if est == EstimatorId::LargeKReads && a.s.is_none() && a.s_upper.is_none() {
        usage_error(
            "large-k-reads needs the sequencing error rate (--s or --s-upper) to choose the abundance threshold λ",
        );
    }
    let k = if est.takes_k() {
        a.k.unwrap_or_else(|| usage_error(&format!("{est} needs -k")))
    } else {
        if a.k.is_some_and(|k| k != 1) {
            bail!("{est} always uses k = 1");
        }
        1
    };

    let (x_flag, y_flag, x_path, y_path) = if est.uses_reads() {
        ("--x-reads", "--y-reads", &a.x_reads, &a.y_reads)
    } else {
        ("--x", "--y", &a.x, &a.y)
    };
    let x = load(need(x_path, x_flag, est), a.drop_non_acgt)?;
    let y = load(need(y_path, y_flag, est), a.drop_non_acgt)?;
    let xt = table_of(&x, k)?;
    let yt = table_of(&y, k)?;
    let want = if est.uses_reads() {
        Provenance::Reads
    } else {
        Provenance::Sequence
    };
    if xt.provenance() != want || yt.provenance() != want {
        bail!("{est} needs k-mer counts from {want} inputs");
    }

    let mut nucleotide = None;
    let result: EstimateResult = match est {
        EstimatorId::K1Single | EstimatorId::K1Reads => {
            let (cx, cy) = (counts(&xt), counts(&yt));
            let v = a.nucleotide.unwrap_or_else(|| most_skewed(&cx));
            nucleotide = Some(v);
            let i = v as usize;
            if est == EstimatorId::K1Single {
                if xt.total() != yt.total() {
                    bail!("sequences differ in length ({} vs {})", xt.total(), yt.total());
                }
                estimate_k1_single(cx[i] as f64, cy[i] as f64, xt.total() as f64)?
            } else {
                // Each read contributes L single-nucleotide occurrences, so NL is the table total.
                if xt.total() != yt.total() {
                    bail!("read sets differ in total length ({} vs {})", xt.total(), yt.total());
                }
                estimate_k1_reads(cx[i] as f64, cy[i] as f64, xt.total(), 1)?
            }
        }
        EstimatorId::K1Gc => {
            let gc = |c: [u64; 4]| (c[1] + c[2]) as f64 / c.iter().sum::<u64>() as f64;
            estimate_k1_gc(gc(counts(&xt)), gc(counts(&yt)))?
        }
        EstimatorId::GeneralK => estimate_general_k(&xt, &yt, &parse_subset(&a.subset)?)?,
        EstimatorId::LargeKSeq => {
            let g = match &x {
                Input::Sequence(s) => s.len() as u64,
                _ => xt.total(),
            };
            estimate_large_k_seq(&yt, &xt, g)?
        }
        EstimatorId::LargeKReads => {
            let rate = match (a.s, a.s_upper) {
                (Some(s), _) => ErrorRate::Known(s),
                (None, Some(b)) => ErrorRate::UpperBound(b),
                (None, None) => unreachable!(),
            };
            estimate_large_k_reads(&xt, &yt, rate)?
        }
    };

    let mut json = serde_json::to_value(&result)?;
    json["k"] = k.into();
    if let Some(v) = nucleotide {
        json["nucleotide"] = v.to_string().into();
    }
    emit(serde_json::to_string_pretty(&json)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let x = generate_iid_sequence(a.length, a.dist, a.seed)?;
            let mut w = output(a.out.as_deref())?;
            mio::write_fasta(&mut w, &a.id, &x, 80)?;
            w.flush()?;
        }
        Command::Mutate(a) => {
            let channel = SubstitutionChannel::new(a.p)?;
            let records = mio::read_fasta(&a.input, FastaOptions::default())?;
            let mut w = output(a.out.as_deref())?;
            for (i, r) in records.iter().enumerate() {
                let seed = if i == 0 {
                    a.seed
                } else {
                    harness::derive_seed(&[a.seed, i as u64])
                };
                mio::write_fasta(&mut w, &r.id, &mutate(&r.sequence, &channel, seed), 80)?;
            }
            w.flush()?;
        }
        Command::Reads(a) => {
            let records = mio::read_fasta(&a.input, FastaOptions::default())?;
            if records.len() > 1 {
                warn!(
                    "{}: sampling from the first of {} records",
                    a.input.display(),
                    records.len()
                );
            }
            let x = &records[0].sequence;
            let n = match (a.n, a.coverage) {
                (Some(n), _) => n,
                (None, Some(c)) if c > 0.0 => (c * x.len() as f64 / a.read_length as f64).round() as usize,
                (None, c) => bail!("coverage must be positive, got {c:?}"),
            };
            let reads = sample_reads(x, a.read_length, n, &SubstitutionChannel::new(a.s)?, a.seed)?;
            let mut w = output(a.out.as_deref())?;
            mio::write_reads(&mut w, &reads)?;
            w.flush()?;
        }
        Command::Count(a) => {
            let table = match load(&a.input, false)? {
                Input::Table(_) => bail!("{} is already a k-mer table", a.input.display()),
                input => table_of(&input, a.k)?,
            };
            let mut w = output(a.out.as_deref())?;
            mio::write_table(&mut w, &table)?;
            w.flush()?;
        }
        Command::Estimate(a) => estimate(&a)?,
        Command::Bounds { which } => bounds_cmd(which)?,
        Command::Experiment(a) => {
            let mut config = ExperimentConfig::from_path(&a.config)?;
            if a.csv.is_some() {
                config.output.csv = a.csv;
            }
            if a.summary.is_some() {
                config.output.summary = a.summary;
            }
            let to_stdout = config.output.csv.is_none();
            let (records, boxes) = harness::run_and_write(&config)?;
            if to_stdout {
                let mut w = output(None)?;
                harness::write_csv(&mut w, &records)?;
                w.flush()?;
            }
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "{} estimates over {} grid points ({failed} failed)",
                records.len(),
                boxes.len()
            );
        }
    }
    Ok(())
}

fn bounds_cmd(which: BoundsCommand) -> Result<()> {
    match which {
        BoundsCommand::Table1 { p, eps, genome_len } => match (p, genome_len) {
            (Some(p), Some(g)) => emit(format!("{:.3}", bounds::min_deviation_table1(p, eps, g as f64))),
            _ => {
                let mut out = String::from("p\\G");
                for g in bounds::TABLE1_G {
                    out += &format!("\t{g:e}");
                }
                for p in bounds::TABLE1_P {
                    out += &format!("\n{p}");
                    for g in bounds::TABLE1_G {
                        out += &format!("\t{:.4}", bounds::min_deviation_table1(p, eps, g));
                    }
                }
                emit(out)
            }
        },
        BoundsCommand::Theorem1 {
            genome_len,
            n,
            read_length,
            p,
            s,
            eps,
            delta,
        } => {
            let params =
                BoundParams::with_failure_budget(genome_len as f64, n as f64, read_length as f64, p, s, eps, delta)?;
            let d = bounds::theorem1_required_deviation(&params)?;
            let json = serde_json::json!({
                "params": params,
                "required_deviation": d,
                "success_probability": bounds::theorem1_success_bound(&params),
            });
            emit(serde_json::to_string_pretty(&json)?)
        }
    }
}

fn emit(text: String) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
