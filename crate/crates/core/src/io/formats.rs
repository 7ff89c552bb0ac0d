//! Text formats for k-mer tables and read sets.
//!
//! k-mer table:
//!
//! ```text
//! ##mutrate kmer-table v1
//! #k=<k>\t#total=<total>\t#provenance=<sequence|reads>
//! <kmer>\t<count>          (one line per k-mer, lexicographic order)
//! ```
//!
//! Read set (origins are never written):
//!
//! ```text
//! ##mutrate read-set v1
//! #L=<L>\t#N=<N>\t#G=<G>
//! <read>                   (one uppercase read per line)
//! ```
//!
//! Lines starting with `##` are comments. Readers accept files without the version line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kmer::{Kmer, KmerTable, Provenance};
use crate::seq::{parse_nucleotides, Read, ReadSet};

pub const TABLE_VERSION_LINE: &str = "##mutrate kmer-table v1";
pub const READS_VERSION_LINE: &str = "##mutrate read-set v1";

pub fn write_table<W: Write>(mut w: W, table: &KmerTable) -> Result<()> {
    writeln!(w, "{TABLE_VERSION_LINE}")?;
    writeln!(
        w,
        "#k={}\t#total={}\t#provenance={}",
        table.k(),
        table.total(),
        table.provenance()
    )?;
    for (kmer, count) in table.sorted() {
        writeln!(w, "{kmer}\t{count}")?;
    }
    Ok(())
}

/// Parses `#key=value` fields of a tab-separated header line, in the given order.
fn header_fields<'a>(line: &'a str, keys: &[&str], what: &'static str, line_no: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split('\t').collect();
    let bad = |reason: String| Error::Format {
        what,
        line: line_no,
        reason,
    };
    if parts.len() != keys.len() {
        return Err(bad(format!(
            "expected {} header fields, found {}",
            keys.len(),
            parts.len()
        )));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(part, key)| {
            part.strip_prefix('#')
                .and_then(|p| p.strip_prefix(key))
                .and_then(|p| p.strip_prefix('='))
                .ok_or_else(|| bad(format!("expected #{key}=..., found {part:?}")))
        })
        .collect()
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &'static str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Format {
        what,
        line,
        reason: format!("not a valid number: {s:?}"),
    })
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Ok(l) if l.starts_with("##") || l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l.trim_end().to_string()))),
        Err(e) => Some(Err(e.into())),
    })
}

pub fn read_table<R: BufRead>(reader: R) -> Result<KmerTable> {
    const WHAT: &str = "k-mer table";
    let mut lines = content_lines(reader);
    let (line_no, header) = lines.next().transpose()?.ok_or(Error::Format {
        what: WHAT,
        line: 1,
        reason: "missing header".into(),
    })?;
    let fields = header_fields(&header, &["k", "total", "provenance"], WHAT, line_no)?;
    let k: usize = parse_num(fields[0], WHAT, line_no)?;
    let total: u64 = parse_num(fields[1], WHAT, line_no)?;
    let provenance: Provenance = fields[2].parse()?;

    let mut entries = Vec::new();
    for item in lines {
        let (line_no, line) = item?;
        let (kmer, count) = line.split_once('\t').ok_or(Error::Format {
            what: WHAT,
            line: line_no,
            reason: "expected <kmer>\\t<count>".into(),
        })?;
        let kmer: Kmer = kmer.parse().map_err(|e: Error| Error::Format {
            what: WHAT,
            line: line_no,
            reason: e.to_string(),
        })?;
        let count: u64 = parse_num(count, WHAT, line_no)?;
        if count == 0 {
            return Err(Error::Format {
                what: WHAT,
                line: line_no,
                reason: "zero counts are not stored".into(),
            });
        }
        entries.push((kmer, count));
    }
    let table = KmerTable::from_counts(k, provenance, entries)?;
    if table.total() != total {
        return Err(Error::Format {
            what: WHAT,
            line: line_no,
            reason: format!("header total {total} but counts sum to {}", table.total()),
        });
    }
    Ok(table)
}

pub fn write_reads<W: Write>(mut w: W, reads: &ReadSet) -> Result<()> {
    writeln!(w, "{READS_VERSION_LINE}")?;
    writeln!(
        w,
        "#L={}\t#N={}\t#G={}",
        reads.read_len(),
        reads.len(),
        reads.genome_len()
    )?;
    let mut buf = Vec::with_capacity(reads.read_len() + 1);
    for read in reads.reads() {
        buf.clear();
        buf.extend(read.symbols().iter().map(|n| n.to_ascii()));
        buf.push(b'\n');
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_reads<R: BufRead>(reader: R) -> Result<ReadSet> {
    const WHAT: &str = "read set";
    let mut lines = content_lines(reader);
    let (line_no, header) = lines.next().transpose()?.ok_or(Error::Format {
        what: WHAT,
        line: 1,
        reason: "missing header".into(),
    })?;
    let fields = header_fields(&header, &["L", "N", "G"], WHAT, line_no)?;
    let read_len: usize = parse_num(fields[0], WHAT, line_no)?;
    let n: usize = parse_num(fields[1], WHAT, line_no)?;
    let genome_len: usize = parse_num(fields[2], WHAT, line_no)?;

    let mut reads = Vec::with_capacity(n);
    for item in lines {
        let (line_no, line) = item?;
        let symbols = parse_nucleotides(&line).map_err(|e| match e {
            Error::InvalidNucleotide { symbol, column, .. } => Error::InvalidNucleotide {
                symbol,
                line: line_no,
                column,
            },
            other => other,
        })?;
        if symbols.len() != read_len {
            return Err(Error::Format {
                what: WHAT,
                line: line_no,
                reason: format!("read has length {}, header says L={read_len}", symbols.len()),
            });
        }
        reads.push(Read::new(symbols));
    }
    if reads.len() != n {
        return Err(Error::Format {
            what: WHAT,
            line: line_no,
            reason: format!("header says N={n} but file has {} reads", reads.len()),
        });
    }
    ReadSet::new(reads, genome_len, read_len)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Creates `path`, and its parent directories when missing.
pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_table_file(path: &Path) -> Result<KmerTable> {
    read_table(open(path)?)
}

pub fn read_reads_file(path: &Path) -> Result<ReadSet> {
    read_reads(open(path)?)
}

pub fn write_table_file(path: &Path, table: &KmerTable) -> Result<()> {
    let mut w = create(path)?;
    write_table(&mut w, table)?;
    w.flush()?;
    Ok(())
}

pub fn write_reads_file(path: &Path, reads: &ReadSet) -> Result<()> {
    let mut w = create(path)?;
    write_reads(&mut w, reads)?;
    w.flush()?;
    Ok(())
}
