//! Representativeness scoring and hyperparameter tuning.
//!
//! Feedback is the number of compilation-fix attempts per sample (0..=20).
//! A selection is scored by comparing its attempt distribution against the
//! full set's distribution scaled down by the size ratio: the mean over
//! the 21 buckets of |expected - observed| / expected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricRow;
use crate::select::{self, SelectError, SelectionConfig, SelectionResult};
use crate::transpile::TranspileRecord;

/// Buckets 0..=20: attempt counts up to the fix limit.
pub const ATTEMPT_BUCKETS: usize = 21;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("sample {id}: {attempts} attempts is outside 0..=20")]
    AttemptOutOfRange { id: String, attempts: u32 },
    #[error("missing feedback for {0:?}")]
    MissingFeedback(String),
    #[error("invalid tune grid: {0}")]
    InvalidGrid(String),
    #[error("cell (n={n}, r={r}): {source}")]
    Cell {
        n: u32,
        r: f64,
        #[source]
        source: SelectError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("tune report: {0}")]
    Json(#[from] serde_json::Error),
}

/// 21-bucket distribution of fix attempts; counts for observed data,
/// fractional expectations after normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptHistogram {
    pub buckets: [f64; ATTEMPT_BUCKETS],
}

impl Default for AttemptHistogram {
    fn default() -> Self {
        AttemptHistogram {
            buckets: [0.0; ATTEMPT_BUCKETS],
        }
    }
}

impl AttemptHistogram {
    pub fn total(&self) -> f64 {
        self.buckets.iter().sum()
    }
}

/// Tally attempts over records.
pub fn histogram(records: &[TranspileRecord]) -> Result<AttemptHistogram, EvaluateError> {
    histogram_of(records.iter().map(|r| (r.sample_id.as_str(), r.attempts_used)))
}

/// Tally attempts over (id, attempts) pairs.
pub fn histogram_of<'a>(
    attempts: impl IntoIterator<Item = (&'a str, u32)>,
) -> Result<AttemptHistogram, EvaluateError> {
    let mut h = AttemptHistogram::default();
    for (id, a) in attempts {
        if a as usize >= ATTEMPT_BUCKETS {
            return Err(EvaluateError::AttemptOutOfRange {
                id: id.to_string(),
                attempts: a,
            });
        }
        h.buckets[a as usize] += 1.0;
    }
    Ok(h)
}

/// Scale the large set's distribution by the size ratio of the two sets;
/// fractional expected values are intended.
pub fn expected_histogram(
    large: &AttemptHistogram,
    selected_count: usize,
    large_count: usize,
) -> AttemptHistogram {
    assert!(large_count > 0, "large set must be non-empty");
    let ratio = selected_count as f64 / large_count as f64;
    let mut h = AttemptHistogram::default();
    for (i, b) in large.buckets.iter().enumerate() {
        h.buckets[i] = b * ratio;
    }
    h
}

/// Mean relative per-bucket difference:
/// `(1/21) * sum |expected_i - observed_i| / expected_i`.
/// An empty expected bucket contributes 0 when the observed bucket is also
/// empty and a full unit of error otherwise.
pub fn relative_difference(expected: &AttemptHistogram, observed: &AttemptHistogram) -> f64 {
    let sum: f64 = expected
        .buckets
        .iter()
        .zip(&observed.buckets)
        .map(|(&e, &o)| {
            if e > 0.0 {
                (e - o).abs() / e
            } else if o > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    sum * (1.0 / ATTEMPT_BUCKETS as f64)
}

/// Expected/observed pair plus the score, as written by the evaluate
/// command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub expected: AttemptHistogram,
    pub observed: AttemptHistogram,
    pub relative_difference: f64,
}

/// Score one selection against the full feedback set.
pub fn diff_report(
    selection: &SelectionResult,
    feedback: &BTreeMap<String, u32>,
) -> Result<DiffReport, EvaluateError> {
    let full = histogram_of(feedback.iter().map(|(id, &a)| (id.as_str(), a)))?;
    let mut selected_attempts = Vec::with_capacity(selection.selected_ids.len());
    for id in &selection.selected_ids {
        let attempts = feedback
            .get(id)
            .ok_or_else(|| EvaluateError::MissingFeedback(id.clone()))?;
        selected_attempts.push((id.as_str(), *attempts));
    }
    let observed = histogram_of(selected_attempts)?;
    let expected = expected_histogram(&full, selection.selected_ids.len(), feedback.len());
    let relative_difference = relative_difference(&expected, &observed);
    Ok(DiffReport {
        expected,
        observed,
        relative_difference,
    })
}

/// Grid of (number of partitions, sampling ratio) combinations. Ratios are
/// kept in tenths of a permille (1e-4 units) so the enumeration is exact;
/// the stock grid is n in 1..=20 and r from 0.002 to 0.200 in steps of
/// 0.002 — 2,000 cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub n_min: u32,
    pub n_max: u32,
    /// Inclusive ratio range in 1e-4 units (166 means r = 0.0166).
    pub r_min_e4: u32,
    pub r_max_e4: u32,
    pub r_step_e4: u32,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            n_min: 1,
            n_max: 20,
            r_min_e4: 20,
            r_max_e4: 2000,
            r_step_e4: 20,
        }
    }
}

/// Ratio bounds as floats, for config files; converted with rounding
/// checks so 0.166 means exactly 166 * 1e-3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneGridSpec {
    pub n_min: u32,
    pub n_max: u32,
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
}

impl TuneGrid {
    pub fn from_spec(spec: &TuneGridSpec) -> Result<TuneGrid, EvaluateError> {
        let to_e4 = |r: f64, what: &str| -> Result<u32, EvaluateError> {
            let scaled = (r * 10_000.0).round();
            if scaled < 1.0 || scaled > 10_000.0 || (scaled / 10_000.0 - r).abs() > 1e-9 {
                return Err(EvaluateError::InvalidGrid(format!(
                    "{what} = {r} is not a multiple of 0.0001 in (0, 1]"
                )));
            }
            Ok(scaled as u32)
        };
        let grid = TuneGrid {
            n_min: spec.n_min,
            n_max: spec.n_max,
            r_min_e4: to_e4(spec.r_min, "r_min")?,
            r_max_e4: to_e4(spec.r_max, "r_max")?,
            r_step_e4: to_e4(spec.r_step, "r_step")?,
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<(), EvaluateError> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(EvaluateError::InvalidGrid(format!(
                "partition range {}..={} is empty or starts at zero",
                self.n_min, self.n_max
            )));
        }
        if self.r_min_e4 == 0 || self.r_min_e4 > self.r_max_e4 || self.r_step_e4 == 0 {
            return Err(EvaluateError::InvalidGrid(
                "ratio range is empty or has a zero step".into(),
            ));
        }
        Ok(())
    }

    /// Cells ordered first by n, then by r.
    pub fn cells(&self) -> Vec<(u32, f64)> {
        let mut cells = Vec::new();
        for n in self.n_min..=self.n_max {
            let mut r_e4 = self.r_min_e4;
            while r_e4 <= self.r_max_e4 {
                cells.push((n, f64::from(r_e4) / 10_000.0));
                r_e4 += self.r_step_e4;
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub n: u32,
    pub r: f64,
    pub relative_difference: f64,
    pub selected_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub grid: Vec<TuneCell>,
    pub best: (u32, f64),
    pub best_score: f64,
}

/// Run selection for every grid cell and score it against the feedback;
/// cells evaluate in parallel, the argmin is deterministic. Ties go to the
/// smaller selection, then smaller n, then smaller r. The expected
/// distribution is built over the ids being selected from, so feedback
/// entries outside the metric table carry no weight.
pub fn tune(
    rows: &[MetricRow],
    feedback: &BTreeMap<String, u32>,
    grid: &TuneGrid,
) -> Result<TuneResult, EvaluateError> {
    grid.validate()?;
    let mut universe: BTreeMap<String, u32> = BTreeMap::new();
    for row in rows {
        match feedback.get(&row.id) {
            Some(&attempts) => {
                universe.insert(row.id.clone(), attempts);
            }
            None => return Err(EvaluateError::MissingFeedback(row.id.clone())),
        }
    }

    let cells = grid.cells();
    let scored: Result<Vec<TuneCell>, EvaluateError> = cells
        .par_iter()
        .map(|&(n, r)| {
            let config = SelectionConfig { n, r, seed: 0 };
            let selection =
                select::select(rows, &config).map_err(|source| EvaluateError::Cell {
                    n,
                    r,
                    source,
                })?;
            let report = diff_report(&selection, &universe)?;
            Ok(TuneCell {
                n,
                r,
                relative_difference: report.relative_difference,
                selected_count: selection.selected_ids.len(),
            })
        })
        .collect();
    let scored = scored?;

    let best_cell = scored
        .iter()
        .min_by(|a, b| {
            a.relative_difference
                .total_cmp(&b.relative_difference)
                .then_with(|| a.selected_count.cmp(&b.selected_count))
                .then_with(|| a.n.cmp(&b.n))
                .then_with(|| a.r.total_cmp(&b.r))
        })
        .expect("grid has at least one cell");

    Ok(TuneResult {
        best: (best_cell.n, best_cell.r),
        best_score: best_cell.relative_difference,
        grid: scored,
    })
}

/// Tune report CSV: one `n,r,relative_difference,selected_count` row per
/// cell, in grid order.
pub fn write_tune_csv(path: &Path, result: &TuneResult) -> Result<(), EvaluateError> {
    let mut out = String::from("n,r,relative_difference,selected_count\n");
    for cell in &result.grid {
        out.push_str(&format!(
            "{},{},{},{}\n",
            cell.n, cell.r, cell.relative_difference, cell.selected_count
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub best: BestCell,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub n: u32,
    pub r: f64,
}

pub fn write_tune_summary(path: &Path, result: &TuneResult) -> Result<(), EvaluateError> {
    let summary = TuneSummary {
        best: BestCell {
            n: result.best.0,
            r: result.best.1,
        },
        best_score: result.best_score,
    };
    fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, attempts: u32) -> TranspileRecord {
        TranspileRecord {
            sample_id: id.to_string(),
            attempts_used: attempts,
            success: attempts < 20,
            initial_translation_seconds: 0.0,
            fixing_seconds: 0.0,
            total_seconds: 0.0,
        }
    }

    #[test]
    fn histogram_tallies_buckets() {
        let records = vec![
            record("a", 0),
            record("b", 0),
            record("c", 3),
            record("d", 20),
        ];
        let h = histogram(&records).unwrap();
        assert_eq!(h.buckets[0], 2.0);
        assert_eq!(h.buckets[3], 1.0);
        assert_eq!(h.buckets[20], 1.0);
        assert_eq!(h.total(), 4.0);
    }

    #[test]
    fn empty_histogram_is_zero() {
        let h = histogram(&[]).unwrap();
        assert_eq!(h.total(), 0.0);
    }

    #[test]
    fn histogram_matches_independent_recount() {
        let records: Vec<TranspileRecord> = (0..500)
            .map(|i| record(&format!("s{i}"), (i * i % 21) as u32))
            .collect();
        let h = histogram(&records).unwrap();
        // One-line tally oracle.
        let mut counts = [0u32; 21];
        for i in 0..500u32 {
            counts[(i * i % 21) as usize] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert_eq!(h.buckets[i], f64::from(c), "bucket {i}");
        }
        assert_eq!(h.total(), 500.0);
    }

    #[test]
    fn out_of_range_attempts_error() {
        assert!(matches!(
            histogram(&[record("a", 21)]),
            Err(EvaluateError::AttemptOutOfRange { .. })
        ));
    }

    #[test]
    fn expected_histogram_scales_by_ratio() {
        let mut large = AttemptHistogram::default();
        large.buckets[0] = 10.0;
        large.buckets[5] = 4.0;
        let half = expected_histogram(&large, 7, 14);
        assert_eq!(half.buckets[0], 5.0);
        assert_eq!(half.buckets[5], 2.0);
        let same = expected_histogram(&large, 14, 14);
        assert_eq!(same, large);
    }

    #[test]
    fn expected_histogram_spot_check() {
        let mut large = AttemptHistogram::default();
        for (i, b) in large.buckets.iter_mut().enumerate() {
            *b = (i * 3 % 17) as f64;
        }
        let scaled = expected_histogram(&large, 207, 1000);
        for i in 0..ATTEMPT_BUCKETS {
            assert!((scaled.buckets[i] - large.buckets[i] * 0.207).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_histograms_score_zero() {
        let mut h = AttemptHistogram::default();
        for (i, b) in h.buckets.iter_mut().enumerate() {
            *b = (i + 1) as f64;
        }
        assert!(relative_difference(&h, &h).abs() < 1e-12);
    }

    #[test]
    fn single_bucket_perturbation_score() {
        // expected_i = 2, observed_i = 1 in one bucket, others equal:
        // (1/21) * 0.5.
        let mut expected = AttemptHistogram::default();
        let mut observed = AttemptHistogram::default();
        for i in 0..ATTEMPT_BUCKETS {
            expected.buckets[i] = 3.0;
            observed.buckets[i] = 3.0;
        }
        expected.buckets[7] = 2.0;
        observed.buckets[7] = 1.0;
        let score = relative_difference(&expected, &observed);
        assert!((score - 0.5 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn zero_expected_bucket_rules() {
        let expected = AttemptHistogram::default();
        let observed = AttemptHistogram::default();
        assert_eq!(relative_difference(&expected, &observed), 0.0);
        let mut spurious = AttemptHistogram::default();
        spurious.buckets[4] = 2.0;
        assert!((relative_difference(&expected, &spurious) - 1.0 / 21.0).abs() < 1e-12);
    }

    #[test]
    fn score_is_invariant_under_common_scaling() {
        let mut expected = AttemptHistogram::default();
        let mut observed = AttemptHistogram::default();
        for i in 0..ATTEMPT_BUCKETS {
            expected.buckets[i] = (i + 1) as f64;
            observed.buckets[i] = (2 * i + 1) as f64;
        }
        let base = relative_difference(&expected, &observed);
        // Power-of-two scaling keeps every quotient bit-identical.
        let mut e2 = expected.clone();
        let mut o2 = observed.clone();
        for i in 0..ATTEMPT_BUCKETS {
            e2.buckets[i] *= 8.0;
            o2.buckets[i] *= 8.0;
        }
        assert_eq!(relative_difference(&e2, &o2), base);
    }

    fn metric_rows(count: usize) -> Vec<MetricRow> {
        (0..count)
            .map(|i| MetricRow {
                id: format!("p/x/f{i:04}:1"),
                program: "p".into(),
                mi_c: ((i * 13 + 31) % 997) as f64 / 10.0,
                mi_rust: ((i * 57 + 31) % 997) as f64 / 10.0,
                unsafe_complexity: ((i * 101 + 31) % 997) as f64 / 100.0,
                type_complexity: (i % 7) as u32,
                sloc: (i % 40 + 1) as u32,
            })
            .collect()
    }

    fn synthetic_feedback(rows: &[MetricRow]) -> BTreeMap<String, u32> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), (i * 7 % 21) as u32))
            .collect()
    }

    #[test]
    fn degenerate_grid_scores_zero_at_full_selection() {
        let rows = metric_rows(60);
        let feedback = synthetic_feedback(&rows);
        let grid = TuneGrid {
            n_min: 1,
            n_max: 1,
            r_min_e4: 10_000,
            r_max_e4: 10_000,
            r_step_e4: 1,
        };
        let result = tune(&rows, &feedback, &grid).unwrap();
        assert_eq!(result.grid.len(), 1);
        assert_eq!(result.best, (1, 1.0));
        assert!(result.best_score.abs() < 1e-12);
    }

    #[test]
    fn tune_matches_independent_rescoring() {
        let rows = metric_rows(500);
        let feedback = synthetic_feedback(&rows);
        let grid = TuneGrid {
            n_min: 1,
            n_max: 4,
            r_min_e4: 500,
            r_max_e4: 2500,
            r_step_e4: 500,
        };
        let result = tune(&rows, &feedback, &grid).unwrap();
        assert_eq!(result.grid.len(), 20);
        for cell in &result.grid {
            let config = SelectionConfig {
                n: cell.n,
                r: cell.r,
                seed: 0,
            };
            let selection = select::select(&rows, &config).unwrap();
            let report = diff_report(&selection, &feedback).unwrap();
            assert_eq!(report.relative_difference, cell.relative_difference);
            assert_eq!(selection.selected_ids.len(), cell.selected_count);
        }
        let min = result
            .grid
            .iter()
            .map(|c| c.relative_difference)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_score, min);
    }

    #[test]
    fn tune_rerun_is_identical() {
        let rows = metric_rows(200);
        let feedback = synthetic_feedback(&rows);
        let grid = TuneGrid {
            n_min: 1,
            n_max: 3,
            r_min_e4: 1000,
            r_max_e4: 3000,
            r_step_e4: 1000,
        };
        let a = tune(&rows, &feedback, &grid).unwrap();
        let b = tune(&rows, &feedback, &grid).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn missing_feedback_is_reported() {
        let rows = metric_rows(5);
        let mut feedback = synthetic_feedback(&rows);
        feedback.remove(&rows[3].id);
        assert!(matches!(
            tune(&rows, &feedback, &TuneGrid::default()),
            Err(EvaluateError::MissingFeedback(_))
        ));
    }

    #[test]
    fn stock_grid_has_two_thousand_cells() {
        let cells = TuneGrid::default().cells();
        assert_eq!(cells.len(), 2000);
        assert_eq!(cells[0], (1, 0.002));
        assert_eq!(cells[1999], (20, 0.2));
        // Ordered first by n, then by r; the documented best cell of the
        // stock grid sits at flat index 882.
        assert_eq!(cells[882], (9, 0.166));
    }

    #[test]
    fn grid_spec_conversion_round_trips() {
        let spec = TuneGridSpec {
            n_min: 1,
            n_max: 4,
            r_min: 0.05,
            r_max: 0.25,
            r_step: 0.05,
        };
        let grid = TuneGrid::from_spec(&spec).unwrap();
        assert_eq!(grid.cells().len(), 20);
        assert!(TuneGrid::from_spec(&TuneGridSpec {
            r_step: 0.000001,
            ..spec
        })
        .is_err());
    }
}
