use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::seq::{CircularSequence, Nucleotide};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub id: String,
    pub sequence: CircularSequence,
    /// Symbols removed under [`FastaOptions::drop_non_acgt`].
    pub dropped_symbols: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FastaOptions {
    /// Skip symbols outside `ACGTacgt` instead of failing.
    pub drop_non_acgt: bool,
}

struct Pending {
    id: String,
    symbols: Vec<Nucleotide>,
    dropped: usize,
    header_line: usize,
}

impl Pending {
    fn finish(self) -> Result<FastaRecord> {
        if self.dropped > 0 {
            warn!("record {}: dropped {} non-ACGT symbols", self.id, self.dropped);
        }
        let sequence = CircularSequence::new(self.symbols).map_err(|_| {
            Error::Fasta(format!(
                "record {:?} (line {}) has an empty sequence",
                self.id, self.header_line
            ))
        })?;
        Ok(FastaRecord {
            id: self.id,
            sequence,
            dropped_symbols: self.dropped,
        })
    }
}

pub fn parse_fasta<R: BufRead>(reader: R, options: FastaOptions) -> Result<Vec<FastaRecord>> {
    let mut records = Vec::new();
    let mut current: Option<Pending> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some(done) = current.take() {
                records.push(done.finish()?);
            }
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(Error::Fasta(format!("line {line_no}: header without an identifier")));
            }
            current = Some(Pending {
                id,
                symbols: Vec::new(),
                dropped: 0,
                header_line: line_no,
            });
            continue;
        }
        let Some(rec) = current.as_mut() else {
            return Err(Error::Fasta(format!(
                "line {line_no}: sequence data before the first header"
            )));
        };
        for (col, b) in line.bytes().enumerate() {
            match Nucleotide::from_ascii(b) {
                Some(n) => rec.symbols.push(n),
                None if options.drop_non_acgt => rec.dropped += 1,
                None => {
                    return Err(Error::InvalidNucleotide {
                        symbol: b as char,
                        line: line_no,
                        column: col + 1,
                    })
                }
            }
        }
    }
    if let Some(done) = current.take() {
        records.push(done.finish()?);
    }
    if records.is_empty() {
        return Err(Error::Fasta("input contains no records".into()));
    }
    Ok(records)
}

pub fn read_fasta(path: &Path, options: FastaOptions) -> Result<Vec<FastaRecord>> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fasta(BufReader::new(file), options)
}

/// Writes one record with sequence lines of at most `width` symbols.
pub fn write_fasta<W: Write>(mut w: W, id: &str, sequence: &CircularSequence, width: usize) -> Result<()> {
    writeln!(w, ">{id}")?;
    let bytes: Vec<u8> = sequence.symbols().iter().map(|n| n.to_ascii()).collect();
    for chunk in bytes.chunks(width.max(1)) {
        w.write_all(chunk)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
