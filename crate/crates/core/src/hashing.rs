//! MinHash, K-wise concatenation with a universal rehash into `[0, r)`, and
//! the count-min row hashes.
//!
//! All seeds are derived from `SketchConfig::master_seed` so that two plans
//! built from equal configs hash identically, which is what makes sketches
//! built on different machines mergeable.

use crate::core::{LshSharing, SketchConfig, SparseVector};
use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

const TAG_MINHASH: u64 = 1;
const TAG_REHASH: u64 = 2;
const TAG_CMS: u64 = 3;

/// MurmurHash3 64-bit finalizer.
#[inline]
pub fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of one element ID.
#[inline]
pub fn mix(seed: u64, id: u32) -> u64 {
    fmix64(fmix64(seed) ^ (id as u64 ^ GOLDEN).wrapping_mul(GOLDEN))
}

/// Maps a 64-bit hash onto `[0, n)` by multiply-shift.
#[inline]
pub fn reduce(h: u64, n: u32) -> u32 {
    ((h as u128 * n as u128) >> 64) as u32
}

/// Derives a child seed from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Minimum of `mix(seed, id)` over the set.
pub fn minhash(seed: u64, x: &SparseVector) -> Result<u64> {
    x.ids()
        .iter()
        .map(|&id| mix(seed, id))
        .min()
        .ok_or(Error::EmptyInput)
}

/// Probability that two sets with Jaccard similarity `j` land in the same
/// bucket after `k` concatenated MinHashes and an ideal rehash into `r`
/// buckets: `J^K + (1 - J^K) / r`.
pub fn collision_model(j: f64, k: u32, r: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&j) {
        return Err(Error::domain(format!("jaccard {j} outside [0, 1]")));
    }
    if r == 0 {
        return Err(Error::domain("rehash range must be positive"));
    }
    let jk = j.powi(k as i32);
    Ok(jk + (1.0 - jk) / r as f64)
}

/// One concatenated LSH function: `K` MinHash seeds and a rehash seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LshSlot {
    pub minhash_seeds: Vec<u64>,
    pub rehash_seed: u64,
}

impl LshSlot {
    /// Slot whose seeds are derived from `seed` alone.
    pub fn from_seed(seed: u64, k: u32) -> Self {
        Self {
            minhash_seeds: (0..k as u64)
                .map(|t| derive_seed(seed, &[TAG_MINHASH, t]))
                .collect(),
            rehash_seed: derive_seed(seed, &[TAG_REHASH]),
        }
    }

    /// Bucket of `x` in `[0, range)`.
    pub fn bucket(&self, x: &SparseVector, range: u32) -> Result<u32> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut acc = self.rehash_seed;
        for &seed in &self.minhash_seeds {
            let m = minhash(seed, x)?;
            acc = fmix64(acc.wrapping_mul(GOLDEN) ^ m);
        }
        Ok(reduce(fmix64(acc ^ self.rehash_seed), range))
    }
}

/// Every hash function used by one sketch family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashPlan {
    k: u32,
    rows: u32,
    cols: u32,
    reps: u32,
    range: u32,
    sharing: LshSharing,
    slots: Vec<LshSlot>,
    cms_seeds: Vec<u64>,
}

impl HashPlan {
    pub fn new(cfg: &SketchConfig) -> Self {
        let m = cfg.master_seed;
        let mut slots = Vec::new();
        for i in 0..cfg.rows as u64 {
            match cfg.lsh_sharing {
                LshSharing::PerRowRep => {
                    for o in 0..cfg.reps as u64 {
                        slots.push(make_slot(m, &[i, o], cfg.k));
                    }
                }
                LshSharing::PerCell => {
                    for j in 0..cfg.cols as u64 {
                        for o in 0..cfg.reps as u64 {
                            slots.push(make_slot(m, &[i, o, j], cfg.k));
                        }
                    }
                }
            }
        }
        let cms_seeds = (0..cfg.rows as u64)
            .map(|i| derive_seed(m, &[TAG_CMS, i]))
            .collect();
        Self {
            k: cfg.k,
            rows: cfg.rows,
            cols: cfg.cols,
            reps: cfg.reps,
            range: cfg.range,
            sharing: cfg.lsh_sharing,
            slots,
            cms_seeds,
        }
    }

    pub fn sharing(&self) -> LshSharing {
        self.sharing
    }

    pub fn cms_seeds(&self) -> &[u64] {
        &self.cms_seeds
    }

    pub fn slots(&self) -> &[LshSlot] {
        &self.slots
    }

    /// The LSH slot for `(row, rep)` or `(row, col, rep)`. `col` must be
    /// given exactly when LSH functions are per cell.
    pub fn slot(&self, row: u32, rep: u32, col: Option<u32>) -> Result<&LshSlot> {
        if row >= self.rows || rep >= self.reps {
            return Err(Error::domain(format!("slot ({row}, {rep}) out of range")));
        }
        let idx = match (self.sharing, col) {
            (LshSharing::PerRowRep, None) => row as usize * self.reps as usize + rep as usize,
            (LshSharing::PerCell, Some(c)) if c < self.cols => {
                (row as usize * self.cols as usize + c as usize) * self.reps as usize
                    + rep as usize
            }
            (LshSharing::PerCell, Some(c)) => {
                return Err(Error::domain(format!("column {c} out of range")))
            }
            (LshSharing::PerCell, None) => {
                return Err(Error::domain("per-cell LSH requires a column"))
            }
            (LshSharing::PerRowRep, Some(_)) => {
                return Err(Error::domain("per-row LSH takes no column"))
            }
        };
        Ok(&self.slots[idx])
    }

    /// Concatenated-MinHash bucket of `x` for one sketch slot.
    pub fn lsh_bucket(&self, row: u32, rep: u32, col: Option<u32>, x: &SparseVector) -> Result<u32> {
        self.slot(row, rep, col)?.bucket(x, self.range)
    }

    /// Count-min column of dataset index `j` in `row`.
    #[inline]
    pub fn cms_column(&self, row: u32, j: u64) -> u32 {
        reduce(fmix64(self.cms_seeds[row as usize] ^ splitmix64(j)), self.cols)
    }
}

fn make_slot(master: u64, path: &[u64], k: u32) -> LshSlot {
    let mut p = vec![0u64; path.len() + 1];
    p[1..].copy_from_slice(path);
    LshSlot::from_seed(derive_seed(master, &p), k)
}
