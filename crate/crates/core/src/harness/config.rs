use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorId, SubsetSpec};
use crate::kmer::MAX_K;
use crate::seq::{validate_distribution, Nucleotide};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Estimators see full k-mer tables of both sequences.
    Nonseq,
    /// Reads of both sequences are simulated; read-based and table-based estimators both run.
    Seq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceSpec {
    /// Every record of the file is one reference sequence.
    Fasta {
        path: PathBuf,
        #[serde(default)]
        drop_non_acgt: bool,
        #[serde(default)]
        label: Option<String>,
    },
    /// `references` independent i.i.d. sequences of length `length`.
    Iid {
        distribution: [f64; 4],
        length: usize,
        #[serde(default = "one")]
        references: usize,
        #[serde(default)]
        label: Option<String>,
    },
}

fn one() -> usize {
    1
}

impl SourceSpec {
    pub fn label(&self) -> String {
        match self {
            SourceSpec::Fasta { label: Some(l), .. } | SourceSpec::Iid { label: Some(l), .. } => l.clone(),
            SourceSpec::Fasta { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            SourceSpec::Iid {
                distribution, length, ..
            } => format!(
                "iid[{},{},{},{}]x{}",
                distribution[0], distribution[1], distribution[2], distribution[3], length
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sources: Vec<SourceSpec>,
    pub mode: Mode,
    pub estimators: Vec<EstimatorId>,
    /// k for the estimators that take one; single-nucleotide estimators always use k = 1.
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    pub p_grid: Vec<f64>,
    #[serde(default)]
    pub s_grid: Vec<f64>,
    #[serde(default)]
    pub coverage_grid: Vec<f64>,
    #[serde(default = "default_read_length")]
    pub read_length: usize,
    pub trials_per_point: usize,
    pub master_seed: u64,
    /// Nucleotide for the single-nucleotide estimators; defaults to the one whose frequency
    /// deviates most from 1/4.
    #[serde(default)]
    pub one_mer: Option<Nucleotide>,
    #[serde(default)]
    pub subset: SubsetSpec,
    /// When set, λ is chosen from this bound instead of the true error rate.
    #[serde(default)]
    pub s_upper_bound: Option<f64>,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_k_values() -> Vec<usize> {
    vec![30]
}

fn default_read_length() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a JSON config; relative source and output paths are resolved against the
    /// config file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            let resolve = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            for source in &mut config.sources {
                if let SourceSpec::Fasta { path, .. } = source {
                    resolve(path);
                }
            }
            if let Some(p) = config.output.csv.as_mut() {
                resolve(p);
            }
            if let Some(p) = config.output.summary.as_mut() {
                resolve(p);
            }
        }
        Ok(config)
    }

    /// Error rates swept; table-only experiments use a single noiseless point.
    pub fn effective_s_grid(&self) -> Vec<f64> {
        match self.mode {
            Mode::Nonseq => vec![0.0],
            Mode::Seq => self.s_grid.clone(),
        }
    }

    pub fn effective_coverage_grid(&self) -> Vec<Option<f64>> {
        match self.mode {
            Mode::Nonseq => vec![None],
            Mode::Seq => self.coverage_grid.iter().copied().map(Some).collect(),
        }
    }

    /// `(estimator, k)` pairs evaluated on every trial, in output order.
    pub fn estimator_runs(&self) -> Vec<(EstimatorId, usize)> {
        let mut runs = Vec::new();
        for &est in &self.estimators {
            if est.takes_k() {
                runs.extend(self.k_values.iter().map(|&k| (est, k)));
            } else {
                runs.push((est, 1));
            }
        }
        runs
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sources.is_empty() {
            return fail("no sources".into());
        }
        if self.estimators.is_empty() {
            return fail("no estimators".into());
        }
        if self.p_grid.is_empty() {
            return fail("p_grid is empty".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return fail(format!(
                "mutation rate {p} must lie in (0, 1); relative error needs p > 0"
            ));
        }
        if self.trials_per_point == 0 {
            return fail("trials_per_point must be at least 1".into());
        }
        if self.estimators.iter().any(|e| e.takes_k()) {
            if self.k_values.is_empty() {
                return fail("k_values is empty".into());
            }
            if let Some(k) = self.k_values.iter().find(|k| **k == 0 || **k > MAX_K) {
                return fail(format!("k = {k} outside 1..={MAX_K}"));
            }
        }
        for source in &self.sources {
            if let SourceSpec::Iid {
                distribution,
                length,
                references,
                ..
            } = source
            {
                validate_distribution(distribution)?;
                if *length == 0 || *references == 0 {
                    return fail("i.i.d. sources need length >= 1 and references >= 1".into());
                }
            }
        }
        if let SubsetSpec::TopM(0) = self.subset {
            return fail("subset top-m needs m >= 1".into());
        }
        match self.mode {
            Mode::Nonseq => {
                if let Some(e) = self.estimators.iter().find(|e| e.uses_reads()) {
                    return fail(format!("{e} needs reads; use mode \"seq\""));
                }
            }
            Mode::Seq => {
                if self.s_grid.is_empty() || self.coverage_grid.is_empty() {
                    return fail("seq mode needs nonempty s_grid and coverage_grid".into());
                }
                if let Some(s) = self.s_grid.iter().find(|s| !(**s >= 0.0 && **s < 1.0)) {
                    return fail(format!("error rate {s} outside [0, 1)"));
                }
                if let Some(c) = self.coverage_grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
                    return fail(format!("coverage {c} must be positive"));
                }
                if self.read_length == 0 {
                    return fail("read_length must be at least 1".into());
                }
                if self.estimators.contains(&EstimatorId::LargeKReads) {
                    if let Some(k) = self.k_values.iter().find(|k| **k > self.read_length) {
                        return fail(format!("k = {k} exceeds read length {}", self.read_length));
                    }
                }
            }
        }
        if let Some(s) = self.s_upper_bound {
            if !(0.0..1.0).contains(&s) {
                return fail(format!("s_upper_bound {s} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "sources": [{"type": "iid", "distribution": [0.4, 0.2, 0.2, 0.2], "length": 1000}],
        "mode": "nonseq",
        "estimators": ["k1-single", "large-k-seq"],
        "k_values": [5, 9],
        "p_grid": [0.1],
        "trials_per_point": 2,
        "master_seed": 1
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.read_length, 1000);
        assert_eq!(c.subset, SubsetSpec::All);
        assert_eq!(
            c.estimator_runs(),
            vec![
                (EstimatorId::K1Single, 1),
                (EstimatorId::LargeKSeq, 5),
                (EstimatorId::LargeKSeq, 9)
            ]
        );
        assert_eq!(c.effective_s_grid(), vec![0.0]);
    }

    #[test]
    fn zero_mutation_rate_rejected() {
        let text = BASE.replace("[0.1]", "[0.0, 0.1]");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn seq_mode_requirements() {
        let text = BASE.replace("\"nonseq\"", "\"seq\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
        let text = BASE.replace("\"large-k-seq\"", "\"k1-reads\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
        let text = BASE.replace("\"nonseq\"", "\"seq\"").replace(
            "\"master_seed\": 1",
            "\"master_seed\": 1, \"s_grid\": [0.01], \"coverage_grid\": [10]",
        );
        assert!(ExperimentConfig::from_json(&text).is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = BASE.replace("\"master_seed\": 1", "\"master_seed\": 1, \"trails\": 3");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn subset_forms() {
        for (json, expected) in [
            ("\"all\"", SubsetSpec::All),
            ("{\"top-m\": 5}", SubsetSpec::TopM(5)),
            (
                "{\"explicit\": [\"ACG\", \"TTA\"]}",
                SubsetSpec::Explicit(["ACG".parse().unwrap(), "TTA".parse().unwrap()].into()),
            ),
        ] {
            let text = BASE.replace("\"master_seed\": 1", &format!("\"master_seed\": 1, \"subset\": {json}"));
            assert_eq!(ExperimentConfig::from_json(&text).unwrap().subset, expected);
        }
    }
}
