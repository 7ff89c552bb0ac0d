//! File formats: FASTA input, k-mer table TSV and the read-set text format.

pub mod fasta;
pub mod formats;

pub use fasta::{parse_fasta, read_fasta, write_fasta, FastaOptions, FastaRecord};
pub use formats::{
    read_reads, read_reads_file, read_table, read_table_file, write_reads, write_reads_file, write_table,
    write_table_file,
};
