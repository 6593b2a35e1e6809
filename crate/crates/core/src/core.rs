//! Domain types shared by every module.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A set of element IDs, stored sorted and without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparseVector {
    ids: Vec<u32>,
}

impl SparseVector {
    /// Builds from IDs that are already strictly increasing.
    pub fn from_sorted(ids: Vec<u32>) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("ids are not strictly increasing"));
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn into_ids(self) -> Vec<u32> {
        self.ids
    }
}

impl FromIterator<u32> for SparseVector {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        make_sparse_vector(iter.into_iter().collect())
    }
}

/// Sorts and deduplicates. Duplicate IDs are collapsed, not rejected.
pub fn make_sparse_vector(mut ids: Vec<u32>) -> SparseVector {
    ids.sort_unstable();
    ids.dedup();
    SparseVector { ids }
}

/// An ordered collection of sparse vectors. Position `j` is the identity the
/// sketch hashes; labels are an optional external lookup layer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    vectors: Vec<SparseVector>,
    labels: Option<Vec<u64>>,
}

impl Dataset {
    pub fn new(vectors: Vec<SparseVector>) -> Self {
        Self {
            vectors,
            labels: None,
        }
    }

    pub fn with_labels(vectors: Vec<SparseVector>, labels: Vec<u64>) -> Result<Self> {
        if labels.len() != vectors.len() {
            return Err(Error::domain(format!(
                "{} labels for {} vectors",
                labels.len(),
                vectors.len()
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        if let Some(dup) = labels.iter().find(|l| !seen.insert(**l)) {
            return Err(Error::domain(format!("duplicate label {dup}")));
        }
        Ok(Self {
            vectors,
            labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn get(&self, j: usize) -> Option<&SparseVector> {
        self.vectors.get(j)
    }

    pub fn labels(&self) -> Option<&[u64]> {
        self.labels.as_deref()
    }

    /// External label of index `j`, or `j` itself when unlabeled.
    pub fn label(&self, j: usize) -> u64 {
        match &self.labels {
            Some(l) => l[j],
            None => j as u64,
        }
    }

    /// Position of an external label.
    pub fn index_of(&self, label: u64) -> Option<usize> {
        match &self.labels {
            Some(l) => l.iter().position(|x| *x == label),
            None => usize::try_from(label).ok().filter(|j| *j < self.len()),
        }
    }

    pub fn nonzeros(&self) -> u64 {
        self.vectors.iter().map(|v| v.len() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageMode {
    /// Dense counter arrays (Array-RACE).
    Array,
    /// Only nonzero counters are stored (Map-RACE).
    Map,
}

/// Which LSH functions are shared between sketch cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LshSharing {
    /// One concatenated LSH per (row, repetition), shared by every column.
    PerRowRep,
    /// An independent concatenated LSH for every (row, column, repetition).
    PerCell,
}

/// Hyperparameters of a sketch family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SketchConfig {
    /// Number of concatenated MinHash functions.
    pub k: u32,
    /// Count-min rows.
    pub rows: u32,
    /// Count-min columns.
    pub cols: u32,
    /// Independent repetitions per count-min cell.
    pub reps: u32,
    /// Rehash range: length of every count array.
    pub range: u32,
    pub counter_bits: u8,
    pub master_seed: u64,
    pub storage_mode: StorageMode,
    pub lsh_sharing: LshSharing,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            k: 1,
            rows: 2,
            cols: 100,
            reps: 4,
            range: 100,
            counter_bits: 16,
            master_seed: 0,
            storage_mode: StorageMode::Array,
            lsh_sharing: LshSharing::PerRowRep,
        }
    }
}

impl SketchConfig {
    pub fn new(k: u32, rows: u32, cols: u32, reps: u32, range: u32) -> Self {
        Self {
            k,
            rows,
            cols,
            reps,
            range,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_storage(mut self, mode: StorageMode) -> Self {
        self.storage_mode = mode;
        self
    }

    pub fn with_counter_bits(mut self, bits: u8) -> Self {
        self.counter_bits = bits;
        self
    }

    pub fn with_sharing(mut self, sharing: LshSharing) -> Self {
        self.lsh_sharing = sharing;
        self
    }

    /// Total number of count arrays, `d * w * R`.
    pub fn cells(&self) -> u64 {
        self.rows as u64 * self.cols as u64 * self.reps as u64
    }

    pub fn counter_max(&self) -> u32 {
        match self.counter_bits {
            8 => u8::MAX as u32,
            16 => u16::MAX as u32,
            _ => u32::MAX,
        }
    }

    pub fn counter_bytes(&self) -> usize {
        self.counter_bits as usize / 8
    }
}

/// Checks every configuration invariant, naming the first offending field.
pub fn validate_config(cfg: &SketchConfig) -> Result<()> {
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("K"));
    }
    if cfg.rows == 0 {
        return Err(Error::InvalidConfig("d"));
    }
    if cfg.cols == 0 {
        return Err(Error::InvalidConfig("w"));
    }
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("R"));
    }
    if cfg.range < 2 {
        return Err(Error::InvalidConfig("r"));
    }
    if !matches!(cfg.counter_bits, 8 | 16 | 32) {
        return Err(Error::InvalidConfig("counter_bits"));
    }
    // Map keys pack the cell index into 32 bits.
    if cfg.cells() > u32::MAX as u64 {
        return Err(Error::InvalidConfig("d*w*R"));
    }
    Ok(())
}

/// Estimated or exact scores, one per dataset index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `sum_j sqrt(s_j)`.
    pub fn sqrt_l1(&self) -> f64 {
        self.0.iter().map(|s| s.sqrt()).sum()
    }
}

/// A ranked answer: neighbor indices with their scores, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryResult {
    pub neighbors: Vec<usize>,
    pub scores: Vec<f64>,
}

impl QueryResult {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}
