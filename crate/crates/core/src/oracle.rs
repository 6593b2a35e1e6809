//! Brute-force ground truth. Everything here is O(N) per query on purpose:
//! it is the reference the sketch is tested against.

use std::cmp::Ordering;

use crate::core::{Dataset, QueryResult, ScoreVector, SketchConfig, SparseVector};
use crate::error::{Error, Result};
use crate::hashing::{collision_model, HashPlan};
use crate::planner::StabilityProfile;
use crate::recovery::CellEstimateMatrix;

/// Size of the intersection of two sorted sets.
pub fn intersection_size(x: &SparseVector, y: &SparseVector) -> usize {
    let (a, b) = (x.ids(), y.ids());
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Exact Jaccard similarity `|x ∩ y| / |x ∪ y|`.
pub fn jaccard(x: &SparseVector, y: &SparseVector) -> Result<f64> {
    if x.is_empty() && y.is_empty() {
        return Err(Error::domain("jaccard of two empty sets"));
    }
    let inter = intersection_size(x, y);
    let union = x.len() + y.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Jaccard of `q` against every dataset vector. Empty vectors score 0.
pub fn similarities(ds: &Dataset, q: &SparseVector) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(Error::EmptyInput);
    }
    ds.vectors().iter().map(|x| jaccard(x, q)).collect()
}

/// `s_j = J(x_j, q)^K + (1 - J^K)/r`, the quantity the sketch estimates.
pub fn exact_scores(ds: &Dataset, q: &SparseVector, k: u32, r: u32) -> Result<ScoreVector> {
    similarities(ds, q)?
        .into_iter()
        .map(|j| collision_model(j, k, r))
        .collect::<Result<Vec<_>>>()
        .map(ScoreVector)
}

/// `s_j = J(x_j, q)^K` without the rehash floor.
pub fn exact_scores_raw(ds: &Dataset, q: &SparseVector, k: u32) -> Result<ScoreVector> {
    Ok(ScoreVector(
        similarities(ds, q)?
            .into_iter()
            .map(|j| j.powi(k as i32))
            .collect(),
    ))
}

/// Exact top-v by Jaccard similarity, ties broken by ascending index.
pub fn exact_top_v(ds: &Dataset, q: &SparseVector, v: usize) -> Result<QueryResult> {
    if v > ds.len() {
        return Err(Error::domain(format!("v = {v} exceeds N = {}", ds.len())));
    }
    let sims = similarities(ds, q)?;
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order.truncate(v);
    Ok(QueryResult {
        scores: order.iter().map(|&j| sims[j]).collect(),
        neighbors: order,
    })
}

/// Noise-free count-min measurements
/// `y[i][c] = sum over j with h_i(j) = c of collision_model(J(x_j, q), K, r)`.
pub fn exact_measurements(
    ds: &Dataset,
    q: &SparseVector,
    cfg: &SketchConfig,
    plan: &HashPlan,
) -> Result<CellEstimateMatrix> {
    let scores = if ds.is_empty() {
        ScoreVector(Vec::new())
    } else {
        exact_scores(ds, q, cfg.k, cfg.range)?
    };
    Ok(measurements_of(&scores, cfg, plan))
}

/// Count-min measurements of an arbitrary non-negative score vector.
pub fn measurements_of(
    scores: &ScoreVector,
    cfg: &SketchConfig,
    plan: &HashPlan,
) -> CellEstimateMatrix {
    let mut m = CellEstimateMatrix::zeros(cfg.rows, cfg.cols);
    for (j, &s) in scores.as_slice().iter().enumerate() {
        for i in 0..cfg.rows {
            let c = plan.cms_column(i, j as u64);
            *m.get_mut(i, c) += s;
        }
    }
    m
}

/// Stability profile of `q` with per-function collision probabilities
/// `p_i = collision_model(J_i, 1, r)`; the floor keeps `p_{v+1} > 0`.
pub fn stability_params(
    ds: &Dataset,
    q: &SparseVector,
    v: usize,
    k: u32,
    r: u32,
) -> Result<StabilityProfile> {
    if v == 0 || ds.len() < v + 1 {
        return Err(Error::domain(format!(
            "need N >= v + 1 (N = {}, v = {v})",
            ds.len()
        )));
    }
    let mut probs = exact_scores(ds, q, 1, r)?.0;
    probs.sort_by(|a, b| b.total_cmp(a));
    StabilityProfile::from_sorted_probabilities(&probs, v, k)
}
