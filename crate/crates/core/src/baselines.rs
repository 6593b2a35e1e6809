//! Streaming baselines: sparse random projection with Euclidean search, and
//! uniform random sampling with exact Jaccard search.
//!
//! Projection signs are derived by hashing `(seed, k, id)`, so no projection
//! matrix is materialized. Entries are `+sqrt(3)`, `0`, `-sqrt(3)` with
//! probabilities 1/6, 2/3, 1/6, scaled by `1/sqrt(m)` so inner products are
//! preserved in expectation.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{ByteReader, ByteWriter};
use crate::core::{Dataset, QueryResult, SparseVector};
use crate::error::{Error, Result};
use crate::hashing::{fmix64, mix};
use crate::oracle::jaccard;

const PROJ_MAGIC: &[u8; 4] = b"RPRJ";
const SAMPLE_MAGIC: &[u8; 4] = b"RSMP";

/// Magic, version, `m`, seed, dataset size, skipped count.
pub const PROJECTED_HEADER_LEN: usize = 4 + 2 + 4 + 8 + 8 + 8;
/// Magic, version, fraction, entry count.
pub const SAMPLED_HEADER_LEN: usize = 4 + 2 + 8 + 8;
/// Original index and length of every kept vector.
pub const SAMPLED_PER_VECTOR: usize = 4 + 4;

/// Projection entry for output coordinate `k` and input ID `id`.
#[inline]
fn sign(seed: u64, k: u32, id: u32) -> f32 {
    let h = mix(fmix64(seed ^ (k as u64).wrapping_mul(0xa076_1d64_78bd_642f)), id);
    match h % 6 {
        0 => 3f32.sqrt(),
        1 => -(3f32.sqrt()),
        _ => 0.0,
    }
}

/// Projects a binary vector onto `m` dimensions.
pub fn project(x: &SparseVector, m: u32, seed: u64) -> Result<Vec<f32>> {
    if m == 0 {
        return Err(Error::domain("projection dimension must be positive"));
    }
    let scale = 1.0 / (m as f32).sqrt();
    Ok((0..m)
        .map(|k| x.ids().iter().map(|&id| sign(seed, k, id)).sum::<f32>() * scale)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDataset {
    m: u32,
    seed: u64,
    /// Row-major, `m` floats per stored vector, in dataset order.
    data: Vec<f32>,
    /// Dataset index of every stored row.
    index: Vec<u32>,
    /// Dataset size, counting skipped indices.
    total: u64,
    /// Indices left out of the projection, ascending.
    skipped: Vec<u32>,
}

impl ProjectedDataset {
    /// Projects `ds`, skipping indices where `keep` is false.
    pub fn build(ds: &Dataset, m: u32, seed: u64, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let mut data = Vec::new();
        let mut index = Vec::new();
        let mut skipped = Vec::new();
        for (j, x) in ds.vectors().iter().enumerate() {
            if keep(j) {
                data.extend(project(x, m, seed)?);
                index.push(j as u32);
            } else {
                skipped.push(j as u32);
            }
        }
        Ok(Self {
            m,
            seed,
            data,
            index,
            total: ds.len() as u64,
            skipped,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// `N * m * 4` plus the header and 4 bytes per skipped index.
    pub fn bytes(&self) -> u64 {
        (PROJECTED_HEADER_LEN + self.data.len() * 4 + self.skipped.len() * 4) as u64
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(self.bytes() as usize);
        w.header(PROJ_MAGIC);
        w.u32(self.m);
        w.u64(self.seed);
        w.u64(self.total);
        w.u64(self.skipped.len() as u64);
        for &j in &self.skipped {
            w.u32(j);
        }
        for &x in &self.data {
            w.f32(x);
        }
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.header(PROJ_MAGIC)?;
        let m = r.u32()?;
        let seed = r.u64()?;
        let total = r.u64()?;
        let n_skipped = r.u64()?;
        if m == 0 || n_skipped > total {
            return Err(Error::corrupt("bad projected header"));
        }
        let stored = total - n_skipped;
        if r.remaining() as u64 != n_skipped * 4 + stored * 4 * m as u64 {
            return Err(Error::corrupt("projected payload size mismatch"));
        }
        let skipped = (0..n_skipped).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if skipped.windows(2).any(|w| w[0] >= w[1]) || skipped.last().is_some_and(|&l| l as u64 >= total) {
            return Err(Error::corrupt("bad skipped index list"));
        }
        let data = (0..stored * m as u64).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        let mut it = skipped.iter().peekable();
        let index = (0..total as u32)
            .filter(|j| {
                if it.peek() == Some(&j) {
                    it.next();
                    false
                } else {
                    true
                }
            })
            .collect();
        Ok(Self {
            m,
            seed,
            data,
            index,
            total,
            skipped,
        })
    }

    /// Exact Euclidean scan; scores are negative distances.
    pub fn query(&self, q: &[f32], v: usize) -> Result<QueryResult> {
        if q.len() != self.m as usize {
            return Err(Error::ConfigMismatch(format!(
                "query has {} dimensions, dataset {}",
                q.len(),
                self.m
            )));
        }
        let m = self.m as usize;
        let mut scored: Vec<(f64, usize)> = self
            .data
            .chunks_exact(m)
            .zip(&self.index)
            .map(|(row, &j)| {
                let d2: f32 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (-(d2 as f64).sqrt(), j as usize)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(v);
        Ok(QueryResult {
            neighbors: scored.iter().map(|s| s.1).collect(),
            scores: scored.iter().map(|s| s.0).collect(),
        })
    }
}

/// Projects `q` with the dataset's parameters and scans.
pub fn query_projected(pd: &ProjectedDataset, q: &SparseVector, v: usize) -> Result<QueryResult> {
    pd.query(&project(q, pd.m, pd.seed)?, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledDataset {
    fraction: f64,
    kept: Vec<(u32, SparseVector)>,
}

impl SampledDataset {
    pub fn kept(&self) -> &[(u32, SparseVector)] {
        &self.kept
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// 4-byte IDs, plus index and length per kept vector, plus header.
    pub fn bytes(&self) -> u64 {
        let ids: usize = self.kept.iter().map(|(_, x)| x.len()).sum();
        (SAMPLED_HEADER_LEN + self.kept.len() * SAMPLED_PER_VECTOR + ids * 4) as u64
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(self.bytes() as usize);
        w.header(SAMPLE_MAGIC);
        w.f64(self.fraction);
        w.u64(self.kept.len() as u64);
        for (j, x) in &self.kept {
            w.u32(*j);
            w.u32(x.len() as u32);
            for &id in x.ids() {
                w.u32(id);
            }
        }
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.header(SAMPLE_MAGIC)?;
        let fraction = r.f64()?;
        let n = r.u64()?;
        let mut kept = Vec::new();
        for _ in 0..n {
            let j = r.u32()?;
            let len = r.u32()? as usize;
            let ids = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let x = SparseVector::from_sorted(ids).map_err(|e| Error::corrupt(e.to_string()))?;
            kept.push((j, x));
        }
        r.finish()?;
        Ok(Self { fraction, kept })
    }
}

/// Keeps `ceil(fraction * n)` of the eligible indices uniformly without
/// replacement, in index order.
pub fn sample(ds: &Dataset, fraction: f64, seed: u64) -> Result<SampledDataset> {
    sample_eligible(ds, fraction, seed, |_| true)
}

pub fn sample_eligible(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
    eligible: impl Fn(usize) -> bool,
) -> Result<SampledDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!("sampling fraction {fraction} not in (0, 1]")));
    }
    let pool: Vec<usize> = (0..ds.len()).filter(|&j| eligible(j)).collect();
    let keep = ((fraction * pool.len() as f64).ceil() as usize).min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample_indices(&mut rng, pool.len(), keep)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    chosen.sort_unstable();
    Ok(SampledDataset {
        fraction,
        kept: chosen
            .into_iter()
            .map(|j| (j as u32, ds.vectors()[j].clone()))
            .collect(),
    })
}

/// Exact Jaccard top-v over the kept vectors, reporting original indices.
pub fn query_sampled(sd: &SampledDataset, q: &SparseVector, v: usize) -> Result<QueryResult> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut scored = sd
        .kept
        .iter()
        .map(|(j, x)| Ok((jaccard(x, q)?, *j as usize)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(v);
    Ok(QueryResult {
        neighbors: scored.iter().map(|s| s.1).collect(),
        scores: scored.iter().map(|s| s.0).collect(),
    })
}
