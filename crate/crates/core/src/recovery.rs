//! Query side: median-of-means estimates of every count-min measurement,
//! count-min minimum recovery of the score vector, and top-v selection.

use std::cmp::Ordering;

use crate::core::{LshSharing, QueryResult, ScoreVector, SparseVector};
use crate::error::{Error, Result};
use crate::hashing::HashPlan;
use crate::race_cms::RaceCmsSketch;

/// Repetition count from which median of means switches from the plain
/// median to grouped means.
const GROUPED_FROM: usize = 9;

/// `d x w` matrix of measurement estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEstimateMatrix {
    rows: u32,
    cols: u32,
    est: Vec<f64>,
}

impl CellEstimateMatrix {
    pub fn zeros(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            est: vec![0.0; rows as usize * cols as usize],
        }
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.est[row as usize * self.cols as usize + col as usize]
    }

    #[inline]
    pub fn get_mut(&mut self, row: u32, col: u32) -> &mut f64 {
        &mut self.est[row as usize * self.cols as usize + col as usize]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.est
    }
}

/// Grouping rule for median of means. Consecutive values are split into
/// groups of `group_size`, at most `max_groups` of them; a remainder joins
/// the last group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomPolicy {
    pub group_size: usize,
    pub max_groups: usize,
}

impl MomPolicy {
    pub fn new(group_size: usize) -> Result<Self> {
        if group_size == 0 {
            return Err(Error::domain("group size must be positive"));
        }
        Ok(Self {
            group_size,
            max_groups: usize::MAX,
        })
    }

    /// Plain median for fewer than 9 repetitions, otherwise 9 equal groups.
    pub fn for_reps(reps: usize) -> Self {
        if reps < GROUPED_FROM {
            Self {
                group_size: 1,
                max_groups: usize::MAX,
            }
        } else {
            Self {
                group_size: reps / GROUPED_FROM,
                max_groups: GROUPED_FROM,
            }
        }
    }
}

/// Median of the two central values for an even count.
fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn median_of_means(values: &[f64], policy: MomPolicy) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let g = policy.group_size.max(1);
    let groups = (values.len() / g).min(policy.max_groups).max(1);
    let mut means: Vec<f64> = (0..groups)
        .map(|k| {
            let end = if k + 1 == groups { values.len() } else { (k + 1) * g };
            let grp = &values[k * g..end];
            grp.iter().sum::<f64>() / grp.len() as f64
        })
        .collect();
    Ok(median_in_place(&mut means))
}

/// Median-of-means estimate of every measurement `y[i][c]` from the `R`
/// counters at the query's buckets.
pub fn cell_estimates(sk: &RaceCmsSketch, q: &SparseVector) -> Result<CellEstimateMatrix> {
    cell_estimates_with(sk, q, MomPolicy::for_reps(sk.config().reps as usize))
}

pub fn cell_estimates_with(
    sk: &RaceCmsSketch,
    q: &SparseVector,
    policy: MomPolicy,
) -> Result<CellEstimateMatrix> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cfg = sk.config();
    let plan = sk.plan();
    let mut out = CellEstimateMatrix::zeros(cfg.rows, cfg.cols);
    let mut vals = vec![0.0; cfg.reps as usize];
    let mut buckets = vec![0u32; cfg.reps as usize];
    for i in 0..cfg.rows {
        if cfg.lsh_sharing == LshSharing::PerRowRep {
            for o in 0..cfg.reps {
                buckets[o as usize] = plan.lsh_bucket(i, o, None, q)?;
            }
        }
        for c in 0..cfg.cols {
            for o in 0..cfg.reps {
                if cfg.lsh_sharing == LshSharing::PerCell {
                    buckets[o as usize] = plan.lsh_bucket(i, o, Some(c), q)?;
                }
                vals[o as usize] = sk.counter(i, c, o, buckets[o as usize]) as f64;
            }
            *out.get_mut(i, c) = median_of_means(&vals, policy)?;
        }
    }
    Ok(out)
}

/// `s_hat[j] = min_i est[i][h_i(j)]` for `j` in `0..n`.
pub fn recover_scores(est: &CellEstimateMatrix, n: usize, plan: &HashPlan) -> ScoreVector {
    ScoreVector(
        (0..n as u64)
            .map(|j| {
                (0..est.rows())
                    .map(|i| est.get(i, plan.cms_column(i, j)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    )
}

/// Score descending, then index ascending.
#[inline]
fn rank_order(s: &[f64], a: usize, b: usize) -> Ordering {
    s[b].total_cmp(&s[a]).then(a.cmp(&b))
}

fn select_top(s: &[f64], mut idx: Vec<usize>, v: usize) -> QueryResult {
    if v < idx.len() {
        idx.select_nth_unstable_by(v, |&a, &b| rank_order(s, a, b));
        idx.truncate(v);
    }
    idx.sort_unstable_by(|&a, &b| rank_order(s, a, b));
    QueryResult {
        scores: idx.iter().map(|&j| s[j]).collect(),
        neighbors: idx,
    }
}

/// The `v` highest-scoring indices, ties broken by ascending index.
pub fn top_v(s: &ScoreVector, v: usize) -> Result<QueryResult> {
    if v == 0 || v > s.len() {
        return Err(Error::domain(format!("need 1 <= v <= N, got v = {v}, N = {}", s.len())));
    }
    Ok(select_top(s.as_slice(), (0..s.len()).collect(), v))
}

/// [`top_v`] restricted to indices with `allowed[j]`.
pub fn top_v_masked(s: &ScoreVector, v: usize, allowed: &[bool]) -> Result<QueryResult> {
    if allowed.len() != s.len() {
        return Err(Error::domain("mask length differs from score length"));
    }
    let idx: Vec<usize> = (0..s.len()).filter(|&j| allowed[j]).collect();
    if v == 0 || v > idx.len() {
        return Err(Error::domain(format!(
            "need 1 <= v <= {} eligible indices, got v = {v}",
            idx.len()
        )));
    }
    Ok(select_top(s.as_slice(), idx, v))
}

/// Estimated scores of `q` against dataset indices `0..n`.
pub fn query_scores(sk: &RaceCmsSketch, q: &SparseVector, n: usize) -> Result<ScoreVector> {
    let est = cell_estimates(sk, q)?;
    Ok(recover_scores(&est, n, sk.plan()))
}

/// Top-v neighbors of `q` among dataset indices `0..n`. The sketch does not
/// record `n`, so the caller supplies the dataset size.
pub fn query(sk: &RaceCmsSketch, q: &SparseVector, n: usize, v: usize) -> Result<QueryResult> {
    top_v(&query_scores(sk, q, n)?, v)
}
