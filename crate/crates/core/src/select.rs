//! Representative selection: cut each metric dimension into `n` equal
//! pieces, bin samples by the combination of pieces, order each bin by the
//! global PCA score, and systematically sample every non-empty bin.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MetricRow, MetricVector};
use crate::pca::{self, PcaError, DIMENSIONS};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("no metric vectors provided")]
    Empty,
    #[error("partition count must be at least 1")]
    ZeroPartitions,
    #[error("sampling ratio {0} is outside (0, 1]")]
    InvalidRatio(f64),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("selection report: {0}")]
    Json(#[from] serde_json::Error),
}

/// The two selection hyperparameters plus a provenance seed. The seed does
/// not influence the draw: ties in the PCA ordering are broken by sample
/// id, so selection is fully deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub n: u32,
    pub r: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            n: 9,
            r: 0.166,
            seed: 0,
        }
    }
}

/// Bin coordinates, one partition index per metric dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinKey(pub [u32; DIMENSIONS]);

/// Equal-width grid over the 4-D metric space; only non-empty bins are
/// stored, mapping to row indices of the input.
#[derive(Debug, Clone)]
pub struct BinGrid {
    pub mins: [f64; DIMENSIONS],
    pub maxs: [f64; DIMENSIONS],
    pub widths: [f64; DIMENSIONS],
    pub n: u32,
    pub bins: BTreeMap<BinKey, Vec<usize>>,
}

impl BinGrid {
    /// Potential bin count n^4; most stay empty on real data.
    pub fn potential_bins(&self) -> u64 {
        u64::from(self.n).pow(DIMENSIONS as u32)
    }

    /// Partition index per dimension: floor((x - min) / width), with the
    /// dimension maximum folded into the last partition.
    pub fn key_for(&self, vector: &MetricVector) -> BinKey {
        let values = vector.as_array();
        let mut key = [0u32; DIMENSIONS];
        for d in 0..DIMENSIONS {
            let raw = ((values[d] - self.mins[d]) / self.widths[d]).floor();
            key[d] = (raw as u32).min(self.n - 1);
        }
        BinKey(key)
    }
}

/// Compute per-dimension ranges and assign every vector to a bin.
/// A degenerate dimension (max == min) gets width 1 and index 0 for all
/// samples rather than failing.
pub fn build_grid(vectors: &[MetricVector], n: u32) -> Result<BinGrid, SelectError> {
    if vectors.is_empty() {
        return Err(SelectError::Empty);
    }
    if n == 0 {
        return Err(SelectError::ZeroPartitions);
    }
    let mut mins = [f64::INFINITY; DIMENSIONS];
    let mut maxs = [f64::NEG_INFINITY; DIMENSIONS];
    for v in vectors {
        let values = v.as_array();
        for d in 0..DIMENSIONS {
            mins[d] = mins[d].min(values[d]);
            maxs[d] = maxs[d].max(values[d]);
        }
    }
    let mut widths = [0.0f64; DIMENSIONS];
    for d in 0..DIMENSIONS {
        let span = maxs[d] - mins[d];
        widths[d] = if span > 0.0 { span / f64::from(n) } else { 1.0 };
    }
    let mut grid = BinGrid {
        mins,
        maxs,
        widths,
        n,
        bins: BTreeMap::new(),
    };
    for (i, v) in vectors.iter().enumerate() {
        let key = grid.key_for(v);
        grid.bins.entry(key).or_default().push(i);
    }
    Ok(grid)
}

/// Systematic sampling interval: population / (population * ratio), which
/// reduces to 1/ratio for every bin.
pub fn sampling_interval(r: f64) -> f64 {
    1.0 / r
}

/// Positions selected from a bin of `population` ordered members:
/// `sampling_size = max(1, ceil(population * r))` members at indices
/// `floor(k * population / sampling_size)`.
pub fn systematic_sample_indices(population: usize, r: f64) -> Vec<usize> {
    if population == 0 {
        return Vec::new();
    }
    let sampling_size = ((population as f64 * r).ceil() as usize).max(1);
    let mut indices = Vec::with_capacity(sampling_size);
    let mut last = usize::MAX;
    for k in 0..sampling_size {
        let idx = (k * population / sampling_size).min(population - 1);
        if idx != last {
            indices.push(idx);
            last = idx;
        }
    }
    indices
}

/// Take every interval-th member of an ordered bin.
pub fn systematic_sample<T: Clone>(ordered_members: &[T], r: f64) -> Vec<T> {
    systematic_sample_indices(ordered_members.len(), r)
        .into_iter()
        .map(|i| ordered_members[i].clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinReport {
    pub key: BinKey,
    pub population: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub functions_before: u64,
    pub functions_after: u64,
    pub sloc_before: u64,
    pub sloc_after: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub config: SelectionConfig,
    #[serde(rename = "selected")]
    pub selected_ids: Vec<String>,
    pub bins: Vec<BinReport>,
    pub reduction: Reduction,
}

impl SelectionResult {
    pub fn to_json(&self) -> Result<String, SelectError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, SelectError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Full selection: grid, global PCA ordering, per-bin systematic draw.
/// Output order is (bin key, within-bin position); ties in PCA score fall
/// back to id order, so the result is deterministic for fixed input.
pub fn select(rows: &[MetricRow], config: &SelectionConfig) -> Result<SelectionResult, SelectError> {
    if rows.is_empty() {
        return Err(SelectError::Empty);
    }
    if config.n == 0 {
        return Err(SelectError::ZeroPartitions);
    }
    if !(config.r > 0.0 && config.r <= 1.0) {
        return Err(SelectError::InvalidRatio(config.r));
    }
    let mut seen = HashSet::new();
    for row in rows {
        if !seen.insert(row.id.as_str()) {
            return Err(SelectError::DuplicateId(row.id.clone()));
        }
    }

    let vectors: Vec<MetricVector> = rows.iter().map(MetricRow::vector).collect();
    let grid = build_grid(&vectors, config.n)?;
    let scores = if vectors.len() >= 2 {
        pca::pca_scores(&vectors)?
    } else {
        vec![0.0]
    };

    let mut selected_ids = Vec::new();
    let mut bins = Vec::with_capacity(grid.bins.len());
    let mut selected_rows: Vec<usize> = Vec::new();
    for (key, members) in &grid.bins {
        let mut ordered: Vec<usize> = members.clone();
        ordered.sort_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then_with(|| rows[a].id.cmp(&rows[b].id))
        });
        let picked = systematic_sample_indices(ordered.len(), config.r);
        bins.push(BinReport {
            key: *key,
            population: ordered.len(),
            selected: picked.len(),
        });
        for p in picked {
            selected_ids.push(rows[ordered[p]].id.clone());
            selected_rows.push(ordered[p]);
        }
    }

    let sloc_before: u64 = rows.iter().map(|r| u64::from(r.sloc)).sum();
    let sloc_after: u64 = selected_rows.iter().map(|&i| u64::from(rows[i].sloc)).sum();
    Ok(SelectionResult {
        config: *config,
        reduction: Reduction {
            functions_before: rows.len() as u64,
            functions_after: selected_ids.len() as u64,
            sloc_before,
            sloc_after,
        },
        selected_ids,
        bins,
    })
}
