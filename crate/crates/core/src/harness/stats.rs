use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::run::TrialRecord;
use crate::estimators::EstimatorId;

/// Grid point a box summarizes. References and trials are pooled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridKey {
    pub source: String,
    pub genome_len: usize,
    pub mode: Mode,
    pub estimator: EstimatorId,
    pub k: usize,
    pub p: f64,
    pub s: Option<f64>,
    pub coverage: Option<f64>,
}

impl GridKey {
    fn of(r: &TrialRecord) -> Self {
        GridKey {
            source: r.source.clone(),
            genome_len: r.genome_len,
            mode: r.mode,
            estimator: r.estimator,
            k: r.k,
            p: r.p,
            s: r.s,
            coverage: r.coverage,
        }
    }

    fn fingerprint(&self) -> (String, usize, EstimatorId, usize, u64, Option<u64>, Option<u64>) {
        (
            self.source.clone(),
            self.genome_len,
            self.estimator,
            self.k,
            self.p.to_bits(),
            self.s.map(f64::to_bits),
            self.coverage.map(f64::to_bits),
        )
    }
}

/// Box-plot statistics of the relative error `p_raw / p - 1`.
///
/// Quartiles interpolate linearly between order statistics at position `(n - 1) q`; whiskers
/// reach the most extreme observations within 1.5 IQR of the quartiles. Errored trials are
/// counted in `error_count` and excluded from everything else. All statistics are `None` when
/// no trial succeeded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub key: GridKey,
    pub count: usize,
    pub error_count: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub whisker_low: Option<f64>,
    pub whisker_high: Option<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn box_stats(key: GridKey, mut values: Vec<f64>, error_count: usize) -> BoxStats {
    let count = values.len();
    let mut stats = BoxStats {
        key,
        count,
        error_count,
        median: None,
        q1: None,
        q3: None,
        whisker_low: None,
        whisker_high: None,
        mean: None,
        stddev: None,
    };
    if count == 0 {
        return stats;
    }
    values.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&values, 0.25), quantile(&values, 0.5), quantile(&values, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let whisker_low = values.iter().copied().find(|v| *v >= lo_fence).unwrap_or(values[0]);
    let whisker_high = values
        .iter()
        .rev()
        .copied()
        .find(|v| *v <= hi_fence)
        .unwrap_or(values[count - 1]);
    let mean = values.iter().sum::<f64>() / count as f64;
    let stddev = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    stats.median = Some(median);
    stats.q1 = Some(q1);
    stats.q3 = Some(q3);
    stats.whisker_low = Some(whisker_low);
    stats.whisker_high = Some(whisker_high);
    stats.mean = Some(mean);
    stats.stddev = Some(stddev);
    stats
}

/// Groups records by grid point, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<BoxStats> {
    let mut index = HashMap::new();
    let mut groups: Vec<(GridKey, Vec<f64>, usize)> = Vec::new();
    for r in records {
        let key = GridKey::of(r);
        let slot = *index.entry(key.fingerprint()).or_insert_with(|| {
            groups.push((key, Vec::new(), 0));
            groups.len() - 1
        });
        match (r.error.is_some(), r.relative_error) {
            (false, Some(e)) if e.is_finite() => groups[slot].1.push(e),
            _ => groups[slot].2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|(key, values, errors)| box_stats(key, values, errors))
        .collect()
}
