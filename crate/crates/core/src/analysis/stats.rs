use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::compressor::{self, CodecConfig};
use crate::corpus::Pool;
use crate::selector::{IterationRecord, Selection, Spent};

pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub mean: f64,
    pub median: f64,
    pub min: u64,
    pub max: u64,
}

impl LengthSummary {
    fn of(values: &[u64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        Self {
            mean: sorted.iter().sum::<u64>() as f64 / n as f64,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub selected: usize,
    pub final_set_ratio: f64,
    pub spent: Spent,
    pub byte_length: LengthSummary,
    pub token_length: LengthSummary,
    pub token_histogram: Vec<HistogramBin>,
    /// Reference selection binned on the same edges, for overlaid plots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_histogram: Option<Vec<HistogramBin>>,
    pub trajectory: Vec<IterationRecord>,
    pub wall_time_secs: f64,
}

fn token_lengths(selection: &Selection, pool: &Pool) -> Result<Vec<u64>, AnalysisError> {
    selection
        .indices
        .iter()
        .map(|&i| {
            if i < pool.len() {
                Ok(pool.get(i).token_len)
            } else {
                Err(AnalysisError::UnknownSample(i))
            }
        })
        .collect()
}

fn histogram(values: &[u64], lo: f64, hi: f64) -> Vec<HistogramBin> {
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lo: lo + width * b as f64,
            hi: if b + 1 == HISTOGRAM_BINS {
                hi
            } else {
                lo + width * (b + 1) as f64
            },
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = (((v as f64 - lo) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        bins[idx].count += 1;
    }
    bins
}

/// Length and compression statistics for a selection, optionally with a
/// reference selection binned on shared edges.
pub fn selection_stats(
    selection: &Selection,
    pool: &Pool,
    reference: Option<&Selection>,
    codec: &CodecConfig,
) -> Result<StatsReport, AnalysisError> {
    if selection.is_empty() {
        return Err(AnalysisError::EmptySelection);
    }
    let tokens = token_lengths(selection, pool)?;
    let bytes: Vec<u64> = selection
        .indices
        .iter()
        .map(|&i| pool.get(i).byte_len())
        .collect();
    let ref_tokens = match reference {
        Some(r) if !r.is_empty() => Some(token_lengths(r, pool)?),
        _ => None,
    };

    let all = tokens.iter().chain(ref_tokens.iter().flatten());
    let (lo, hi) = all.fold((u64::MAX, 0u64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, hi) = (lo as f64, if hi > lo { hi as f64 } else { lo as f64 + 1.0 });

    let final_set_ratio = match selection.final_ratio {
        Some(r) => r.ratio,
        None => compressor::ratio_of(&selection.buffer, codec)?.ratio,
    };
    Ok(StatsReport {
        selected: selection.len(),
        final_set_ratio,
        spent: selection.spent,
        byte_length: LengthSummary::of(&bytes),
        token_length: LengthSummary::of(&tokens),
        token_histogram: histogram(&tokens, lo, hi),
        reference_histogram: ref_tokens.map(|r| histogram(&r, lo, hi)),
        trajectory: selection.trajectory.clone(),
        wall_time_secs: selection
            .trajectory
            .last()
            .map_or(0.0, |t| t.wall_time_secs),
    })
}

/// `bin_lo,bin_hi,count` rows.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        out.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mode, RenderTemplate};

    fn pool() -> Pool {
        let lines = [
            r#"{"id":"a","messages":[{"role":"user","content":"x"}],"tokens":10}"#,
            r#"{"id":"b","messages":[{"role":"user","content":"yy"}],"tokens":20}"#,
            r#"{"id":"c","messages":[{"role":"user","content":"zzz"}],"tokens":45}"#,
        ];
        Pool::parse_jsonl(&lines.join("\n"), Mode::Single, RenderTemplate::RoleContent).unwrap()
    }

    #[test]
    fn mean_and_median() {
        let pool = pool();
        let sel = Selection::from_indices(&pool, &[0, 1]);
        let rep = selection_stats(&sel, &pool, None, &CodecConfig::default()).unwrap();
        assert_eq!(rep.token_length.mean, 15.0);
        assert_eq!(rep.token_length.median, 15.0);
        assert_eq!(rep.selected, 2);
        let total: u64 = rep.token_histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, 2);
        assert_eq!(rep.token_histogram.len(), HISTOGRAM_BINS);
        assert_eq!(rep.token_histogram[0].lo, 10.0);
        assert_eq!(rep.token_histogram[HISTOGRAM_BINS - 1].hi, 20.0);
        assert_eq!(rep.token_histogram[HISTOGRAM_BINS - 1].count, 1);
    }

    #[test]
    fn reference_shares_bin_edges() {
        let pool = pool();
        let sel = Selection::from_indices(&pool, &[0]);
        let reference = Selection::from_indices(&pool, &[1, 2]);
        let rep = selection_stats(&sel, &pool, Some(&reference), &CodecConfig::default()).unwrap();
        let r = rep.reference_histogram.unwrap();
        for (a, b) in rep.token_histogram.iter().zip(&r) {
            assert_eq!((a.lo, a.hi), (b.lo, b.hi));
        }
        assert_eq!(r.iter().map(|b| b.count).sum::<u64>(), 2);
        assert_eq!(rep.token_histogram[0].lo, 10.0);
        assert_eq!(rep.token_histogram[HISTOGRAM_BINS - 1].hi, 45.0);
    }

    #[test]
    fn single_length_gets_unit_range() {
        let pool = pool();
        let sel = Selection::from_indices(&pool, &[2]);
        let rep = selection_stats(&sel, &pool, None, &CodecConfig::default()).unwrap();
        assert_eq!(rep.token_histogram[0].count, 1);
        assert_eq!(rep.token_histogram[HISTOGRAM_BINS - 1].hi, 46.0);
        let expected = compressor::ratio_of(&pool.get(2).payload, &CodecConfig::default())
            .unwrap()
            .ratio;
        assert_eq!(rep.final_set_ratio, expected);
    }

    #[test]
    fn empty_selection_fails() {
        let pool = pool();
        assert!(matches!(
            selection_stats(&Selection::default(), &pool, None, &CodecConfig::default()),
            Err(AnalysisError::EmptySelection)
        ));
    }

    #[test]
    fn csv_rows() {
        let bins = [HistogramBin { lo: 0.0, hi: 1.5, count: 3 }];
        assert_eq!(histogram_csv(&bins), "bin_lo,bin_hi,count\n0,1.5,3\n");
    }
}
