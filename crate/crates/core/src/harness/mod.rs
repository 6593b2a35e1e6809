//! Recall-vs-memory evaluation: ground truth, query selection, method
//! sweeps, Pareto marking and CSV output.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{query_projected, query_sampled, sample_eligible, ProjectedDataset};
use crate::core::{Dataset, QueryResult, SketchConfig, SparseVector, StorageMode};
use crate::error::{Error, Result};
use crate::ingest::raw_size_bytes;
use crate::race_cms::RaceCmsSketch;
use crate::recovery::{query_scores, top_v_masked};

pub mod planted;
pub mod selftest;

pub const DEFAULT_V: usize = 20;
pub const THRESHOLDS: [f64; 2] = [0.8, 0.9];
pub const CSV_HEADER: [&str; 10] = [
    "method",
    "params",
    "bytes",
    "inv_ratio",
    "recall_080",
    "recall_090",
    "n_queries",
    "build_s",
    "query_s",
    "pareto",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ArrayRace,
    MapRace,
    RandomProjection,
    RandomSampling,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ArrayRace => "array_race",
            Method::MapRace => "map_race",
            Method::RandomProjection => "random_projection",
            Method::RandomSampling => "random_sampling",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "array" | "array_race" => Ok(Method::ArrayRace),
            "map" | "map_race" => Ok(Method::MapRace),
            "proj" | "projection" | "random_projection" => Ok(Method::RandomProjection),
            "sample" | "sampling" | "random_sampling" => Ok(Method::RandomSampling),
            other => Err(Error::domain(format!("unknown method {other:?}"))),
        }
    }
}

/// One parameter point of one method.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodPoint {
    Race(SketchConfig),
    Projection { m: u32, seed: u64 },
    Sampling { fraction: f64, seed: u64 },
}

impl MethodPoint {
    pub fn method(&self) -> Method {
        match self {
            MethodPoint::Race(c) if c.storage_mode == StorageMode::Array => Method::ArrayRace,
            MethodPoint::Race(_) => Method::MapRace,
            MethodPoint::Projection { .. } => Method::RandomProjection,
            MethodPoint::Sampling { .. } => Method::RandomSampling,
        }
    }

    pub fn params(&self) -> String {
        match self {
            MethodPoint::Race(c) => format!(
                "K={} d={} w={} R={} r={} bits={} seed={}",
                c.k, c.rows, c.cols, c.reps, c.range, c.counter_bits, c.master_seed
            ),
            MethodPoint::Projection { m, seed } => format!("m={m} seed={seed}"),
            MethodPoint::Sampling { fraction, seed } => format!("f={fraction} seed={seed}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub method: Method,
    pub params: String,
    pub bytes: u64,
    pub inv_ratio: f64,
    pub recall_080: f64,
    pub recall_090: f64,
    pub n_queries: usize,
    pub build_seconds: f64,
    pub query_seconds: f64,
    pub pareto: bool,
}

/// `|result ∩ truth| / |truth|`, or `None` when the truth set is empty.
pub fn recall_at(result: &QueryResult, truth: &[usize]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let got: HashSet<usize> = result.neighbors.iter().copied().collect();
    let hit = truth.iter().filter(|j| got.contains(j)).count();
    Some(hit as f64 / truth.len() as f64)
}

/// Inverted index over a dataset for exact thresholded Jaccard neighbors.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    ds: &'a Dataset,
    postings: Vec<Vec<u32>>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        let max_id = ds
            .vectors()
            .iter()
            .filter_map(|v| v.ids().last())
            .max()
            .map_or(0, |&m| m as usize + 1);
        let mut postings = vec![Vec::new(); max_id];
        for (j, x) in ds.vectors().iter().enumerate() {
            for &id in x.ids() {
                postings[id as usize].push(j as u32);
            }
        }
        Self { ds, postings }
    }

    /// Indices `j` with `J(x_j, q) >= tau` for every `tau` in `taus`,
    /// ascending, excluding indices where `exclude` holds. Each `tau` must
    /// be positive.
    pub fn neighbors(
        &self,
        q: &SparseVector,
        taus: &[f64],
        exclude: impl Fn(usize) -> bool,
    ) -> Vec<Vec<usize>> {
        let mut counts: std::collections::HashMap<u32, u32> = Default::default();
        for &id in q.ids() {
            if let Some(p) = self.postings.get(id as usize) {
                for &j in p {
                    *counts.entry(j).or_insert(0) += 1;
                }
            }
        }
        let mut sims: Vec<(usize, f64)> = counts
            .into_iter()
            .filter(|&(j, _)| !exclude(j as usize))
            .map(|(j, inter)| {
                let x = &self.ds.vectors()[j as usize];
                let union = q.len() + x.len() - inter as usize;
                (j as usize, inter as f64 / union as f64)
            })
            .collect();
        sims.sort_unstable_by_key(|s| s.0);
        taus.iter()
            .map(|&t| sims.iter().filter(|s| s.1 >= t).map(|s| s.0).collect())
            .collect()
    }
}

/// Rayon pool capped by `threads`, else by `RACE_THREADS`, else all cores.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = threads
        .or_else(|| std::env::var("RACE_THREADS").ok()?.parse().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::domain(e.to_string()))
}

/// Uniformly samples up to `count` query indices, with a seed, from the
/// non-empty indices that have at least one other index at similarity
/// `>= 0.9`. The result is in sampling order.
pub fn select_queries(ds: &Dataset, count: usize, seed: u64) -> Vec<usize> {
    let index = NeighborIndex::new(ds);
    let mut order: Vec<usize> = (0..ds.len()).filter(|&j| !ds.vectors()[j].is_empty()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(count);
    for chunk in order.chunks(256) {
        if out.len() >= count {
            break;
        }
        let ok: Vec<bool> = chunk
            .par_iter()
            .map(|&j| !index.neighbors(&ds.vectors()[j], &[0.9], |i| i == j)[0].is_empty())
            .collect();
        out.extend(chunk.iter().zip(ok).filter(|p| p.1).map(|p| *p.0));
    }
    out.truncate(count);
    out
}

/// Builds a sketch from the non-empty indices where `keep` holds. Shards
/// are built in parallel and merged; the result equals a sequential build.
pub fn build_sketch(ds: &Dataset, cfg: SketchConfig, keep: impl Fn(usize) -> bool + Sync) -> Result<RaceCmsSketch> {
    let idx: Vec<usize> = (0..ds.len())
        .filter(|&j| keep(j) && !ds.vectors()[j].is_empty())
        .collect();
    let shards = rayon::current_num_threads().clamp(1, idx.len().div_ceil(1024).max(1));
    let size = idx.len().div_ceil(shards).max(1);
    let parts = idx
        .par_chunks(size)
        .map(|chunk| {
            let mut sk = RaceCmsSketch::new(cfg)?;
            for &j in chunk {
                sk.insert(j as u64, &ds.vectors()[j])?;
            }
            Ok(sk)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = parts.into_iter();
    let first = match it.next() {
        Some(s) => s,
        None => return RaceCmsSketch::new(cfg),
    };
    it.try_fold(first, |acc, s| acc.merge(&s))
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub v: usize,
    /// Rebuild every structure per query with only that query removed.
    pub strict_removal: bool,
    /// Record wall times; when false both time columns are zero.
    pub timings: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            v: DEFAULT_V,
            strict_removal: false,
            timings: true,
        }
    }
}

enum Built {
    Race(RaceCmsSketch),
    Projection(ProjectedDataset),
    Sampling(crate::baselines::SampledDataset),
}

impl Built {
    fn build(ds: &Dataset, p: &MethodPoint, keep: &(dyn Fn(usize) -> bool + Sync)) -> Result<Self> {
        Ok(match p {
            MethodPoint::Race(cfg) => Built::Race(build_sketch(ds, *cfg, keep)?),
            MethodPoint::Projection { m, seed } => {
                Built::Projection(ProjectedDataset::build(ds, *m, *seed, keep)?)
            }
            MethodPoint::Sampling { fraction, seed } => {
                Built::Sampling(sample_eligible(ds, *fraction, *seed, keep)?)
            }
        })
    }

    fn bytes(&self) -> u64 {
        match self {
            Built::Race(s) => s.memory_footprint(),
            Built::Projection(p) => p.bytes(),
            Built::Sampling(s) => s.bytes(),
        }
    }

    fn query(&self, ds: &Dataset, q: &SparseVector, v: usize, keep: &dyn Fn(usize) -> bool) -> Result<QueryResult> {
        match self {
            Built::Race(sk) => {
                let s = query_scores(sk, q, ds.len())?;
                let allowed: Vec<bool> = (0..ds.len()).map(keep).collect();
                let n_allowed = allowed.iter().filter(|a| **a).count();
                top_v_masked(&s, v.min(n_allowed), &allowed)
            }
            Built::Projection(p) => query_projected(p, q, v),
            Built::Sampling(s) => query_sampled(s, q, v),
        }
    }
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs.flatten() {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Evaluates every method point on `queries`. All query indices are left out
/// of every structure and every truth set, unless `strict_removal` is set,
/// in which case each query gets its own build with only itself removed.
///
/// Runs on a pool sized by `RACE_THREADS` when set.
pub fn run_eval(
    ds: &Dataset,
    queries: &[usize],
    points: &[MethodPoint],
    opts: &EvalOptions,
) -> Result<Vec<EvalRecord>> {
    thread_pool(None)?.install(|| eval_points(ds, queries, points, opts))
}

fn eval_points(
    ds: &Dataset,
    queries: &[usize],
    points: &[MethodPoint],
    opts: &EvalOptions,
) -> Result<Vec<EvalRecord>> {
    if queries.is_empty() {
        return Err(Error::domain("no queries to evaluate"));
    }
    if let Some(&bad) = queries.iter().find(|&&j| j >= ds.len() || ds.vectors()[j].is_empty()) {
        return Err(Error::domain(format!("query index {bad} is out of range or empty")));
    }
    let raw = raw_size_bytes(ds) as f64;
    let mut is_query = vec![false; ds.len()];
    for &q in queries {
        is_query[q] = true;
    }
    let index = NeighborIndex::new(ds);
    let truth: Vec<Vec<Vec<usize>>> = queries
        .par_iter()
        .map(|&q| {
            let v = &ds.vectors()[q];
            if opts.strict_removal {
                index.neighbors(v, &THRESHOLDS, |j| j == q)
            } else {
                index.neighbors(v, &THRESHOLDS, |j| is_query[j])
            }
        })
        .collect();

    let mut records = Vec::with_capacity(points.len());
    for p in points {
        let mut build_s = 0.0;
        let mut query_s = 0.0;
        let mut bytes = 0;
        let results: Vec<QueryResult> = if opts.strict_removal {
            let mut out = Vec::with_capacity(queries.len());
            for &q in queries {
                let keep = |j: usize| j != q;
                let t = Instant::now();
                let built = Built::build(ds, p, &keep)?;
                build_s += t.elapsed().as_secs_f64();
                bytes = bytes.max(built.bytes());
                let t = Instant::now();
                out.push(built.query(ds, &ds.vectors()[q], opts.v, &keep)?);
                query_s += t.elapsed().as_secs_f64();
            }
            out
        } else {
            let keep = |j: usize| !is_query[j];
            let t = Instant::now();
            let built = Built::build(ds, p, &keep)?;
            build_s = t.elapsed().as_secs_f64();
            bytes = built.bytes();
            let t = Instant::now();
            let out = queries
                .par_iter()
                .map(|&q| built.query(ds, &ds.vectors()[q], opts.v, &keep))
                .collect::<Result<Vec<_>>>()?;
            query_s = t.elapsed().as_secs_f64();
            out
        };
        for (res, &q) in results.iter().zip(queries) {
            if res.neighbors.contains(&q) {
                return Err(Error::domain(format!("query {q} found itself")));
            }
        }
        let recall = |k: usize| {
            mean(results.iter().zip(&truth).map(|(r, t)| recall_at(r, &t[k])))
                .ok_or_else(|| Error::domain("no query has a non-empty truth set"))
        };
        records.push(EvalRecord {
            method: p.method(),
            params: p.params(),
            bytes,
            inv_ratio: bytes as f64 / raw,
            recall_080: recall(0)?,
            recall_090: recall(1)?,
            n_queries: queries.len(),
            build_seconds: if opts.timings { build_s } else { 0.0 },
            query_seconds: if opts.timings { query_s } else { 0.0 },
            pareto: false,
        });
    }
    mark_pareto(&mut records);
    Ok(records)
}

/// A record is on its method's frontier unless another record of the same
/// method has strictly fewer bytes and both recalls at least as high.
pub fn mark_pareto(records: &mut [EvalRecord]) {
    let flags: Vec<bool> = records
        .iter()
        .map(|a| {
            !records.iter().any(|b| {
                b.method == a.method
                    && b.bytes < a.bytes
                    && b.recall_080 >= a.recall_080
                    && b.recall_090 >= a.recall_090
            })
        })
        .collect();
    for (r, f) in records.iter_mut().zip(flags) {
        r.pareto = f;
    }
}

pub fn write_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.method.as_str().to_string(),
            r.params.clone(),
            r.bytes.to_string(),
            format!("{:.6}", r.inv_ratio),
            format!("{:.6}", r.recall_080),
            format!("{:.6}", r.recall_090),
            r.n_queries.to_string(),
            format!("{:.3}", r.build_seconds),
            format!("{:.3}", r.query_seconds),
            r.pareto.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameter lists for a sweep. Parsed from `key=v1,v2;key=...` with keys
/// `K d w R r bits m f`; missing keys keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub k: Vec<u32>,
    pub rows: Vec<u32>,
    pub cols: Vec<u32>,
    pub reps: Vec<u32>,
    pub range: Vec<u32>,
    pub bits: Vec<u8>,
    pub dims: Vec<u32>,
    pub fractions: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k: vec![1, 2],
            rows: vec![2, 3, 4, 5],
            cols: vec![100, 250, 500, 1000],
            reps: vec![2, 4, 8],
            range: vec![100, 1000],
            bits: vec![16],
            dims: vec![5, 10, 20, 50, 100, 200, 500],
            fractions: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
        }
    }
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    let v = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad value {t:?} for grid key {key}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if v.is_empty() {
        return Err(Error::domain(format!("empty list for grid key {key}")));
    }
    Ok(v)
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut g = GridSpec::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, vals) = part
                .split_once('=')
                .ok_or_else(|| Error::domain(format!("grid entry {part:?} lacks '='")))?;
            match key.trim() {
                "K" => g.k = parse_list(key, vals)?,
                "d" => g.rows = parse_list(key, vals)?,
                "w" => g.cols = parse_list(key, vals)?,
                "R" => g.reps = parse_list(key, vals)?,
                "r" => g.range = parse_list(key, vals)?,
                "bits" => g.bits = parse_list(key, vals)?,
                "m" => g.dims = parse_list(key, vals)?,
                "f" => g.fractions = parse_list(key, vals)?,
                other => return Err(Error::domain(format!("unknown grid key {other:?}"))),
            }
        }
        Ok(g)
    }
}

impl GridSpec {
    /// Cartesian product of the lists relevant to each method, in a fixed order.
    pub fn points(&self, methods: &[Method], seed: u64) -> Vec<MethodPoint> {
        let mut out = Vec::new();
        for &m in methods {
            match m {
                Method::ArrayRace | Method::MapRace => {
                    let mode = if m == Method::ArrayRace {
                        StorageMode::Array
                    } else {
                        StorageMode::Map
                    };
                    for &k in &self.k {
                        for &d in &self.rows {
                            for &w in &self.cols {
                                for &r_ in &self.reps {
                                    for &r in &self.range {
                                        for &b in &self.bits {
                                            out.push(MethodPoint::Race(
                                                SketchConfig::new(k, d, w, r_, r)
                                                    .with_counter_bits(b)
                                                    .with_storage(mode)
                                                    .with_seed(seed),
                                            ));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                Method::RandomProjection => {
                    out.extend(self.dims.iter().map(|&m| MethodPoint::Projection { m, seed }))
                }
                Method::RandomSampling => out.extend(
                    self.fractions
                        .iter()
                        .map(|&fraction| MethodPoint::Sampling { fraction, seed }),
                ),
            }
        }
        out
    }
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_sparse_vector;
    use crate::oracle::jaccard;

    #[test]
    fn recall_examples() {
        let r = QueryResult {
            neighbors: vec![1, 2, 3, 4],
            scores: vec![0.0; 4],
        };
        assert_eq!(recall_at(&r, &[2, 3]), Some(1.0));
        assert_eq!(recall_at(&r, &[1, 4, 9, 10]), Some(0.5));
        assert_eq!(recall_at(&r, &[]), None);
    }

    #[test]
    fn neighbor_index_matches_brute_force() {
        let p = planted::planted_dataset(&planted::PlantedSpec {
            n: 600,
            universe: 2000,
            clusters: 20,
            ..Default::default()
        })
        .unwrap();
        let ds = &p.dataset;
        let idx = NeighborIndex::new(ds);
        for q in 0..ds.len() {
            let got = idx.neighbors(&ds.vectors()[q], &[0.05, 0.9], |j| j == q);
            for (k, &tau) in [0.05, 0.9].iter().enumerate() {
                let want: Vec<usize> = (0..ds.len())
                    .filter(|&j| j != q && jaccard(&ds.vectors()[j], &ds.vectors()[q]).unwrap() >= tau)
                    .collect();
                assert_eq!(got[k], want);
            }
        }
    }

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "K=1;d=2,3;w=50; R=2;r=64;bits=8;m=5;f=0.5".parse().unwrap();
        assert_eq!(g.rows, vec![2, 3]);
        assert_eq!(g.points(&[Method::MapRace], 1).len(), 2);
        assert_eq!(g.points(&[Method::RandomProjection, Method::RandomSampling], 1).len(), 2);
        assert!("x=1".parse::<GridSpec>().is_err());
        assert!("d=a".parse::<GridSpec>().is_err());
        assert!("d".parse::<GridSpec>().is_err());
        assert_eq!(GridSpec::default().points(&[Method::ArrayRace], 0).len(), 2 * 4 * 4 * 3 * 2);
        assert_eq!(parse_methods("map,sample").unwrap(), vec![Method::MapRace, Method::RandomSampling]);
        assert!(parse_methods("bogus").is_err());
    }

    #[test]
    fn pareto_rule() {
        let rec = |m, bytes, a, b| EvalRecord {
            method: m,
            params: String::new(),
            bytes,
            inv_ratio: 1.0,
            recall_080: a,
            recall_090: b,
            n_queries: 1,
            build_seconds: 0.0,
            query_seconds: 0.0,
            pareto: false,
        };
        let mut rs = vec![
            rec(Method::MapRace, 10, 0.5, 0.5),
            rec(Method::MapRace, 20, 0.5, 0.5),
            rec(Method::MapRace, 30, 0.9, 0.4),
            rec(Method::RandomSampling, 40, 0.1, 0.1),
        ];
        mark_pareto(&mut rs);
        let flags: Vec<bool> = rs.iter().map(|r| r.pareto).collect();
        assert_eq!(flags, vec![true, false, true, true]);
    }

    #[test]
    fn build_sketch_equals_sequential() {
        let ds = Dataset::new((0..3000u32).map(|i| make_sparse_vector(vec![i % 97, i % 13 + 200, i])).collect());
        let cfg = SketchConfig::new(2, 2, 30, 3, 50).with_storage(StorageMode::Map);
        let par = build_sketch(&ds, cfg, |j| j % 7 != 0).unwrap();
        let mut seq = RaceCmsSketch::new(cfg).unwrap();
        for j in (0..3000).filter(|j| j % 7 != 0) {
            seq.insert(j as u64, &ds.vectors()[j]).unwrap();
        }
        assert_eq!(par, seq);
    }
}
