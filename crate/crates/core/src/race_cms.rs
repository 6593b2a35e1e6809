//! The RACE-CMS sketch.
//!
//! A `d x w` count-min grid whose every cell holds `R` arrays of `r` counters.
//! Inserting element `j` with set `x` increments, for every row `i` and
//! repetition `o`, the counter `A[i, h_i(j), o][L(x)]`. Counters are
//! increment-only, so sketches of disjoint streams merge by addition.
//!
//! Cell `(i, c, o)` has the flat index `(i * w + c) * R + o`. Dense storage
//! lays counters out as `cell * r + bucket`; map storage keys them by
//! `cell << 32 | bucket`.

use std::collections::BTreeMap;

use crate::codec::{storage_tag, ByteReader, ByteWriter, CONFIG_BLOCK_LEN};
use crate::core::{validate_config, LshSharing, SketchConfig, SparseVector, StorageMode};
use crate::error::{Error, Result};
use crate::hashing::{HashPlan, LshSlot};

const MAGIC: &[u8; 4] = b"RACE";

/// Bytes before the counter payload: magic, version, config block, storage
/// tag and the inserted-element count.
pub const HEADER_LEN: usize = 4 + 2 + CONFIG_BLOCK_LEN + 1 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
enum DenseCounters {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl DenseCounters {
    fn zeros(bits: u8, n: usize) -> Self {
        match bits {
            8 => DenseCounters::U8(vec![0; n]),
            16 => DenseCounters::U16(vec![0; n]),
            _ => DenseCounters::U32(vec![0; n]),
        }
    }

    #[inline]
    fn get(&self, idx: usize) -> u32 {
        match self {
            DenseCounters::U8(v) => v[idx] as u32,
            DenseCounters::U16(v) => v[idx] as u32,
            DenseCounters::U32(v) => v[idx],
        }
    }

    #[inline]
    fn set(&mut self, idx: usize, value: u32) {
        match self {
            DenseCounters::U8(v) => v[idx] = value as u8,
            DenseCounters::U16(v) => v[idx] = value as u16,
            DenseCounters::U32(v) => v[idx] = value,
        }
    }

    fn len(&self) -> usize {
        match self {
            DenseCounters::U8(v) => v.len(),
            DenseCounters::U16(v) => v.len(),
            DenseCounters::U32(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Storage {
    Array(DenseCounters),
    Map(BTreeMap<u64, u32>),
}

/// The sketch. See the module docs for the layout.
#[derive(Debug, Clone)]
pub struct RaceCmsSketch {
    cfg: SketchConfig,
    plan: HashPlan,
    storage: Storage,
    n_inserted: u64,
}

impl PartialEq for RaceCmsSketch {
    fn eq(&self, other: &Self) -> bool {
        // The plan is a function of the config.
        self.cfg == other.cfg
            && self.n_inserted == other.n_inserted
            && self.storage == other.storage
    }
}

impl RaceCmsSketch {
    pub fn new(cfg: SketchConfig) -> Result<Self> {
        validate_config(&cfg)?;
        let storage = match cfg.storage_mode {
            StorageMode::Array => {
                let n = usize::try_from(cfg.cells() * cfg.range as u64)
                    .map_err(|_| Error::InvalidConfig("r"))?;
                Storage::Array(DenseCounters::zeros(cfg.counter_bits, n))
            }
            StorageMode::Map => Storage::Map(BTreeMap::new()),
        };
        Ok(Self {
            plan: HashPlan::new(&cfg),
            cfg,
            storage,
            n_inserted: 0,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &HashPlan {
        &self.plan
    }

    pub fn n_inserted(&self) -> u64 {
        self.n_inserted
    }

    #[inline]
    pub fn cell_index(&self, row: u32, col: u32, rep: u32) -> u64 {
        (row as u64 * self.cfg.cols as u64 + col as u64) * self.cfg.reps as u64 + rep as u64
    }

    /// Counter `A[row, col, rep][bucket]`.
    pub fn counter(&self, row: u32, col: u32, rep: u32, bucket: u32) -> u32 {
        self.counter_at(self.cell_index(row, col, rep), bucket)
    }

    #[inline]
    fn counter_at(&self, cell: u64, bucket: u32) -> u32 {
        match &self.storage {
            Storage::Array(c) => c.get((cell * self.cfg.range as u64 + bucket as u64) as usize),
            Storage::Map(m) => m.get(&(cell << 32 | bucket as u64)).copied().unwrap_or(0),
        }
    }

    fn set_counter_at(&mut self, cell: u64, bucket: u32, value: u32) {
        let range = self.cfg.range as u64;
        match &mut self.storage {
            Storage::Array(c) => c.set((cell * range + bucket as u64) as usize, value),
            Storage::Map(m) => {
                let key = cell << 32 | bucket as u64;
                if value == 0 {
                    m.remove(&key);
                } else {
                    m.insert(key, value);
                }
            }
        }
    }

    /// The `d * R` (cell, bucket) targets element `j` with set `x` updates.
    pub fn targets(&self, j: u64, x: &SparseVector) -> Result<Vec<(u64, u32)>> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut out = Vec::with_capacity((self.cfg.rows * self.cfg.reps) as usize);
        for i in 0..self.cfg.rows {
            let col = self.plan.cms_column(i, j);
            let col_opt = match self.cfg.lsh_sharing {
                LshSharing::PerRowRep => None,
                LshSharing::PerCell => Some(col),
            };
            for o in 0..self.cfg.reps {
                let bucket = self.plan.lsh_bucket(i, o, col_opt, x)?;
                out.push((self.cell_index(i, col, o), bucket));
            }
        }
        Ok(out)
    }

    /// Absorbs stream element `j`. On overflow the sketch is left unchanged.
    pub fn insert(&mut self, j: u64, x: &SparseVector) -> Result<()> {
        let targets = self.targets(j, x)?;
        let max = self.cfg.counter_max();
        // Every target lies in a distinct cell, so each is bumped exactly once.
        if targets.iter().any(|&(c, b)| self.counter_at(c, b) >= max) {
            return Err(Error::CounterOverflow { max });
        }
        for (c, b) in targets {
            let v = self.counter_at(c, b);
            self.set_counter_at(c, b, v + 1);
        }
        self.n_inserted += 1;
        Ok(())
    }

    /// Elementwise sum of two sketches of disjoint streams.
    pub fn merge(&self, other: &RaceCmsSketch) -> Result<RaceCmsSketch> {
        if self.cfg != other.cfg {
            return Err(Error::ConfigMismatch(format!(
                "{:?} vs {:?}",
                self.cfg, other.cfg
            )));
        }
        let max = self.cfg.counter_max();
        let add = |a: u32, b: u32| {
            a.checked_add(b)
                .filter(|s| *s <= max)
                .ok_or(Error::CounterOverflow { max })
        };
        let storage = match (&self.storage, &other.storage) {
            (Storage::Array(a), Storage::Array(b)) => {
                let mut out = a.clone();
                for idx in 0..a.len() {
                    out.set(idx, add(a.get(idx), b.get(idx))?);
                }
                Storage::Array(out)
            }
            (Storage::Map(a), Storage::Map(b)) => {
                let mut out = a.clone();
                for (&k, &v) in b {
                    let e = out.entry(k).or_insert(0);
                    *e = add(*e, v)?;
                }
                Storage::Map(out)
            }
            _ => unreachable!("storage mode is part of the config"),
        };
        Ok(RaceCmsSketch {
            cfg: self.cfg,
            plan: self.plan.clone(),
            storage,
            n_inserted: self.n_inserted + other.n_inserted,
        })
    }

    /// Sum of every counter.
    pub fn counter_sum(&self) -> u64 {
        match &self.storage {
            Storage::Array(c) => (0..c.len()).map(|i| c.get(i) as u64).sum(),
            Storage::Map(m) => m.values().map(|&v| v as u64).sum(),
        }
    }

    /// Number of nonzero counters.
    pub fn nonzero_counters(&self) -> u64 {
        match &self.storage {
            Storage::Array(c) => (0..c.len()).filter(|&i| c.get(i) != 0).count() as u64,
            Storage::Map(m) => m.len() as u64,
        }
    }

    /// Visits every nonzero counter as `(row, col, rep, bucket, value)`.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(u32, u32, u32, u32, u32)) {
        let (cols, reps, range) = (self.cfg.cols as u64, self.cfg.reps as u64, self.cfg.range as u64);
        let mut emit = |cell: u64, bucket: u32, v: u32| {
            let o = cell % reps;
            let rc = cell / reps;
            f((rc / cols) as u32, (rc % cols) as u32, o as u32, bucket, v);
        };
        match &self.storage {
            Storage::Array(c) => {
                for idx in 0..c.len() {
                    let v = c.get(idx);
                    if v != 0 {
                        emit(idx as u64 / range, (idx as u64 % range) as u32, v);
                    }
                }
            }
            Storage::Map(m) => {
                for (&k, &v) in m {
                    emit(k >> 32, k as u32, v);
                }
            }
        }
    }

    /// Exact byte size of [`serialize`](Self::serialize)'s output.
    ///
    /// Array mode stores `d*w*R*r` counters. Map mode stores a `u32` entry
    /// count per cell followed by one `(u32 bucket, counter)` pair per
    /// nonzero counter.
    pub fn memory_footprint(&self) -> u64 {
        let cb = self.cfg.counter_bytes() as u64;
        HEADER_LEN as u64
            + match &self.storage {
                Storage::Array(c) => c.len() as u64 * cb,
                Storage::Map(m) => self.cfg.cells() * 4 + m.len() as u64 * (4 + cb),
            }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(self.memory_footprint() as usize);
        w.header(MAGIC);
        w.config(&self.cfg);
        w.u8(storage_tag(self.cfg.storage_mode));
        w.u64(self.n_inserted);
        let bits = self.cfg.counter_bits;
        let put = |w: &mut ByteWriter, v: u32| match bits {
            8 => w.u8(v as u8),
            16 => w.u16(v as u16),
            _ => w.u32(v),
        };
        match &self.storage {
            Storage::Array(c) => {
                for idx in 0..c.len() {
                    put(&mut w, c.get(idx));
                }
            }
            Storage::Map(m) => {
                let mut counts = vec![0u32; self.cfg.cells() as usize];
                for k in m.keys() {
                    counts[(k >> 32) as usize] += 1;
                }
                for n in counts {
                    w.u32(n);
                }
                // BTreeMap order is (cell, bucket) order.
                for (&k, &v) in m {
                    w.u32(k as u32);
                    put(&mut w, v);
                }
            }
        }
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.header(MAGIC)?;
        let cfg = r.config()?;
        validate_config(&cfg).map_err(|e| Error::corrupt(e.to_string()))?;
        let tag = r.u8()?;
        if tag != storage_tag(cfg.storage_mode) {
            return Err(Error::corrupt("storage tag disagrees with config"));
        }
        let n_inserted = r.u64()?;
        let mut sk = RaceCmsSketch::new(cfg)?;
        sk.n_inserted = n_inserted;
        let max = cfg.counter_max();
        let bits = cfg.counter_bits;
        let get = |r: &mut ByteReader| -> Result<u32> {
            match bits {
                8 => r.u8().map(u32::from),
                16 => r.u16().map(u32::from),
                _ => r.u32(),
            }
        };
        match &mut sk.storage {
            Storage::Array(c) => {
                if r.remaining() < c.len() * cfg.counter_bytes() {
                    return Err(Error::corrupt("truncated counter payload"));
                }
                for idx in 0..c.len() {
                    c.set(idx, get(&mut r)?);
                }
            }
            Storage::Map(m) => {
                let cells = cfg.cells() as usize;
                if r.remaining() < cells * 4 {
                    return Err(Error::corrupt("truncated cell directory"));
                }
                let counts = (0..cells).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                for (cell, n) in counts.into_iter().enumerate() {
                    let mut prev: Option<u32> = None;
                    for _ in 0..n {
                        let bucket = r.u32()?;
                        let v = get(&mut r)?;
                        if bucket >= cfg.range || v == 0 || v > max || prev.is_some_and(|p| p >= bucket) {
                            return Err(Error::corrupt(format!("bad entry in cell {cell}")));
                        }
                        prev = Some(bucket);
                        m.insert((cell as u64) << 32 | bucket as u64, v);
                    }
                }
            }
        }
        r.finish()?;
        Ok(sk)
    }
}

/// A single signed-coefficient count array. Test instrument for estimating
/// linear combinations `sum_i c_i p(x_i, q)^K` with `c_i` in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct WeightedAce {
    slot: LshSlot,
    array: Vec<f64>,
}

impl WeightedAce {
    pub fn new(seed: u64, k: u32, range: u32) -> Result<Self> {
        if k == 0 || range < 2 {
            return Err(Error::domain("need K >= 1 and r >= 2"));
        }
        Ok(Self {
            slot: LshSlot::from_seed(seed, k),
            array: vec![0.0; range as usize],
        })
    }

    pub fn insert(&mut self, coeff: f64, x: &SparseVector) -> Result<()> {
        if !(-1.0..=1.0).contains(&coeff) {
            return Err(Error::domain(format!("coefficient {coeff} outside [-1, 1]")));
        }
        let b = self.slot.bucket(x, self.array.len() as u32)?;
        self.array[b as usize] += coeff;
        Ok(())
    }

    /// `A[L(q)]`.
    pub fn estimate(&self, q: &SparseVector) -> Result<f64> {
        Ok(self.array[self.slot.bucket(q, self.array.len() as u32)? as usize])
    }

    pub fn array(&self) -> &[f64] {
        &self.array
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_sparse_vector;
    use crate::hashing::collision_model;
    use crate::oracle::jaccard;

    fn toy5() -> Vec<SparseVector> {
        vec![
            make_sparse_vector(vec![1, 2, 3]),
            make_sparse_vector(vec![2, 3, 4, 5]),
            make_sparse_vector(vec![10, 11]),
            make_sparse_vector(vec![1, 2, 3, 4]),
            make_sparse_vector(vec![7]),
        ]
    }

    #[test]
    fn new_sketch_is_zero_and_deterministic() {
        let cfg = SketchConfig::new(1, 2, 100, 4, 100).with_seed(3);
        let a = RaceCmsSketch::new(cfg).unwrap();
        assert_eq!(a.counter_sum(), 0);
        assert_eq!(a.n_inserted(), 0);
        assert_eq!(a.serialize(), RaceCmsSketch::new(cfg).unwrap().serialize());
        assert_eq!(a.memory_footprint(), 160_000 + HEADER_LEN as u64);
        assert!(RaceCmsSketch::new(SketchConfig::new(1, 0, 1, 1, 2)).is_err());
    }

    #[test]
    fn empty_map_sketch_is_header_plus_directory() {
        let cfg = SketchConfig::new(1, 2, 3, 4, 100).with_storage(StorageMode::Map);
        let sk = RaceCmsSketch::new(cfg).unwrap();
        assert_eq!(sk.memory_footprint(), HEADER_LEN as u64 + 24 * 4);
        assert_eq!(sk.serialize().len() as u64, sk.memory_footprint());
    }

    #[test]
    fn insert_increments_d_times_r_counters() {
        let cfg = SketchConfig::new(2, 3, 5, 4, 16);
        let mut sk = RaceCmsSketch::new(cfg).unwrap();
        sk.insert(0, &toy5()[0]).unwrap();
        assert_eq!(sk.counter_sum(), 12);
        for (j, x) in toy5().iter().enumerate().skip(1) {
            sk.insert(j as u64, x).unwrap();
        }
        assert_eq!(sk.counter_sum(), 5 * 12);
        assert_eq!(sk.n_inserted(), 5);
        assert!(matches!(sk.insert(9, &make_sparse_vector(vec![])), Err(Error::EmptyInput)));
    }

    #[test]
    fn toy_cells_match_brute_force_tally() {
        for sharing in [LshSharing::PerRowRep, LshSharing::PerCell] {
            let cfg = SketchConfig::new(1, 2, 4, 3, 8).with_seed(11).with_sharing(sharing);
            let mut sk = RaceCmsSketch::new(cfg).unwrap();
            let data = toy5();
            for (j, x) in data.iter().enumerate() {
                sk.insert(j as u64, x).unwrap();
            }
            // Independent recomputation of every hash.
            let plan = HashPlan::new(&cfg);
            for i in 0..2 {
                for c in 0..4 {
                    for o in 0..3 {
                        for b in 0..8 {
                            let want = data
                                .iter()
                                .enumerate()
                                .filter(|(j, x)| {
                                    plan.cms_column(i, *j as u64) == c
                                        && plan
                                            .lsh_bucket(
                                                i,
                                                o,
                                                (sharing == LshSharing::PerCell).then_some(c),
                                                x,
                                            )
                                            .unwrap()
                                            == b
                                })
                                .count() as u32;
                            assert_eq!(sk.counter(i, c, o, b), want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn overflow_leaves_sketch_unchanged() {
        let cfg = SketchConfig::new(1, 1, 1, 1, 2).with_counter_bits(8);
        let mut sk = RaceCmsSketch::new(cfg).unwrap();
        let x = make_sparse_vector(vec![1]);
        for j in 0..255 {
            sk.insert(j, &x).unwrap();
        }
        let before = sk.clone();
        assert!(matches!(sk.insert(255, &x), Err(Error::CounterOverflow { max: 255 })));
        assert_eq!(sk, before);
        assert!(matches!(sk.merge(&before), Err(Error::CounterOverflow { .. })));
    }

    #[test]
    fn merge_rules() {
        let cfg = SketchConfig::new(1, 2, 4, 3, 8);
        let data = toy5();
        let mut whole = RaceCmsSketch::new(cfg).unwrap();
        let mut a = RaceCmsSketch::new(cfg).unwrap();
        let mut b = RaceCmsSketch::new(cfg).unwrap();
        for (j, x) in data.iter().enumerate() {
            whole.insert(j as u64, x).unwrap();
            if j < 2 { &mut a } else { &mut b }.insert(j as u64, x).unwrap();
        }
        assert_eq!(a.merge(&b).unwrap(), whole);
        assert_eq!(whole.merge(&RaceCmsSketch::new(cfg).unwrap()).unwrap(), whole);
        let other = RaceCmsSketch::new(cfg.with_seed(1)).unwrap();
        assert!(matches!(whole.merge(&other), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn serialize_round_trip_and_corruption() {
        for mode in [StorageMode::Array, StorageMode::Map] {
            for bits in [8, 16, 32] {
                let cfg = SketchConfig::new(2, 2, 3, 2, 16)
                    .with_storage(mode)
                    .with_counter_bits(bits);
                let mut sk = RaceCmsSketch::new(cfg).unwrap();
                for (j, x) in toy5().iter().enumerate() {
                    sk.insert(j as u64, x).unwrap();
                }
                let bytes = sk.serialize();
                assert_eq!(bytes.len() as u64, sk.memory_footprint());
                assert_eq!(RaceCmsSketch::deserialize(&bytes).unwrap(), sk);
                for cut in [0, 3, HEADER_LEN - 1, bytes.len() - 1] {
                    assert!(matches!(
                        RaceCmsSketch::deserialize(&bytes[..cut]),
                        Err(Error::CorruptSketch(_))
                    ));
                }
                let mut bad = bytes.clone();
                bad[0] = b'X';
                assert!(RaceCmsSketch::deserialize(&bad).is_err());
                let mut bad = bytes.clone();
                bad[4] = 9;
                assert!(RaceCmsSketch::deserialize(&bad).is_err());
                let mut long = bytes;
                long.push(0);
                assert!(RaceCmsSketch::deserialize(&long).is_err());
            }
        }
    }

    #[test]
    fn weighted_ace_basics() {
        let x = make_sparse_vector(vec![1, 2]);
        let mut a = WeightedAce::new(1, 1, 16).unwrap();
        a.insert(0.0, &x).unwrap();
        assert!(a.array().iter().all(|&v| v == 0.0));
        a.insert(-0.25, &x).unwrap();
        assert_eq!(a.array().iter().sum::<f64>(), -0.25);
        assert_eq!(a.estimate(&x).unwrap(), -0.25);
        assert!(a.insert(1.5, &x).is_err());
        assert!(matches!(a.insert(0.5, &make_sparse_vector(vec![])), Err(Error::EmptyInput)));
    }

    #[test]
    fn weighted_ace_mean_matches_linear_combination() {
        let data = toy5();
        let q = make_sparse_vector(vec![1, 2, 3]);
        let coeffs = [1.0, -0.5, 0.75, 0.3, -1.0];
        let (k, r) = (1, 16);
        let want: f64 = data
            .iter()
            .zip(coeffs)
            .map(|(x, c)| c * collision_model(jaccard(x, &q).unwrap(), k, r).unwrap())
            .sum();
        let trials = 5000;
        let vals: Vec<f64> = (0..trials)
            .map(|t| {
                let mut a = WeightedAce::new(t, k, r).unwrap();
                for (x, c) in data.iter().zip(coeffs) {
                    a.insert(c, x).unwrap();
                }
                a.estimate(&q).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} (se {se})");
    }
}
