//! Edge list ingestion, dataset statistics and raw-size accounting.
//!
//! Node IDs are remapped densely in order of first appearance (as source or
//! destination); the original IDs are kept as dataset labels.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{ByteReader, ByteWriter};
use crate::core::{make_sparse_vector, Dataset, SparseVector};
use crate::error::{Error, Result};
use crate::oracle::jaccard;

const CACHE_MAGIC: &[u8; 4] = b"RDST";

/// Accumulates edges per source node and finalizes to sorted vectors.
#[derive(Debug, Default)]
pub struct EdgeAccumulator {
    directed: bool,
    remap: HashMap<u64, u32>,
    labels: Vec<u64>,
    adj: Vec<Vec<u32>>,
}

impl EdgeAccumulator {
    pub fn new(directed: bool) -> Self {
        Self {
            directed,
            ..Self::default()
        }
    }

    fn node(&mut self, raw: u64) -> u32 {
        if let Some(&id) = self.remap.get(&raw) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.remap.insert(raw, id);
        self.labels.push(raw);
        self.adj.push(Vec::new());
        id
    }

    pub fn push(&mut self, src: u32, dst: u32) {
        let s = self.node(src as u64);
        let d = self.node(dst as u64);
        self.adj[s as usize].push(d);
        if !self.directed {
            self.adj[d as usize].push(s);
        }
    }

    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn finish(self) -> Dataset {
        let vectors = self.adj.into_iter().map(make_sparse_vector).collect();
        Dataset::with_labels(vectors, self.labels).expect("labels are unique by construction")
    }
}

fn parse_id(tok: &str, line: usize) -> Result<u32> {
    let v: u64 = tok.parse().map_err(|_| {
        if !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()) {
            Error::OverflowError {
                line,
                value: tok.to_string(),
            }
        } else {
            Error::ParseError {
                line,
                msg: format!("bad node id {tok:?}"),
            }
        }
    })?;
    u32::try_from(v).map_err(|_| Error::OverflowError {
        line,
        value: tok.to_string(),
    })
}

/// Parses a whitespace-separated `src dst` edge list in one pass. Lines
/// starting with `#` and blank lines are skipped; duplicate edges collapse.
/// With `directed = false` every edge is added in both directions.
pub fn parse_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<Dataset> {
    let mut acc = EdgeAccumulator::new(directed);
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut toks = t.split_whitespace();
        let (Some(a), Some(b), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(Error::ParseError {
                line: lineno,
                msg: "expected two node ids".into(),
            });
        };
        let src = parse_id(a, lineno)?;
        let dst = parse_id(b, lineno)?;
        acc.push(src, dst);
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub nodes: usize,
    pub nonzeros: u64,
    pub mean_edges: f64,
    /// Mean Jaccard over sampled pairs of distinct indices; 0 when there is
    /// no pair to sample.
    pub mean_similarity: f64,
    /// False when `mean_similarity` is a placeholder.
    pub similarity_defined: bool,
}

/// Exact counts, and the mean Jaccard similarity of `sample_pairs` uniformly
/// drawn pairs of distinct indices. Two empty vectors count as similarity 0.
pub fn dataset_stats(ds: &Dataset, sample_pairs: usize, seed: u64) -> DatasetStats {
    let n = ds.len();
    let nonzeros = ds.nonzeros();
    let mean_edges = if n == 0 { 0.0 } else { nonzeros as f64 / n as f64 };
    let defined = n >= 2 && sample_pairs > 0;
    let mut mean_similarity = 0.0;
    if defined {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = ds.vectors();
        let mut total = 0.0;
        for _ in 0..sample_pairs {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            total += jaccard(&v[a], &v[b]).unwrap_or(0.0);
        }
        mean_similarity = total / sample_pairs as f64;
    }
    DatasetStats {
        nodes: n,
        nonzeros,
        mean_edges,
        mean_similarity,
        similarity_defined: defined,
    }
}

/// Smallest of 1, 2 or 4 bytes holding `max`.
pub fn int_width(max: u64) -> u64 {
    if max <= u8::MAX as u64 {
        1
    } else if max <= u16::MAX as u64 {
        2
    } else {
        4
    }
}

/// Compressed-sparse-row size: `nonzeros * id_width + (N + 1) * offset_width`,
/// each width the smallest unsigned type holding the largest ID or offset.
pub fn raw_size_bytes(ds: &Dataset) -> u64 {
    let max_id = ds
        .vectors()
        .iter()
        .filter_map(|v| v.ids().last())
        .max()
        .copied()
        .unwrap_or(0);
    let nnz = ds.nonzeros();
    nnz * int_width(max_id as u64) + (ds.len() as u64 + 1) * int_width(nnz)
}

/// Framed binary cache of a dataset.
pub fn serialize_dataset(ds: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(16 + ds.len() * 12 + ds.nonzeros() as usize * 4);
    w.header(CACHE_MAGIC);
    w.u64(ds.len() as u64);
    match ds.labels() {
        Some(labels) => {
            w.u8(1);
            for &l in labels {
                w.u64(l);
            }
        }
        None => w.u8(0),
    }
    for v in ds.vectors() {
        w.u32(v.len() as u32);
        for &id in v.ids() {
            w.u32(id);
        }
    }
    w.finish()
}

pub fn deserialize_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    r.header(CACHE_MAGIC)?;
    let n = r.u64()?;
    if n > r.remaining() as u64 {
        return Err(Error::corrupt("dataset length exceeds payload"));
    }
    let labels = match r.u8()? {
        0 => None,
        1 => Some((0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?),
        t => return Err(Error::corrupt(format!("bad label flag {t}"))),
    };
    let mut vectors = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = r.u32()? as usize;
        if len * 4 > r.remaining() {
            return Err(Error::corrupt("vector length exceeds payload"));
        }
        let ids = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        vectors.push(
            SparseVector::from_sorted(ids).map_err(|_| Error::corrupt("unsorted vector"))?,
        );
    }
    r.finish()?;
    match labels {
        Some(l) => Dataset::with_labels(vectors, l).map_err(|e| Error::corrupt(e.to_string())),
        None => Ok(Dataset::new(vectors)),
    }
}
