//! Parameter selection from query stability.
//!
//! A query is summarized by the collision probabilities of its `v`-th and
//! `(v+1)`-th neighbors (`p_v`, `p_{v+1}`), their ratio `delta`, and the tail
//! mass `B = sum_{i>v} sqrt(p_i^K / p_{v+1}^K)`. From these the planner picks
//! the concatenation power `K`, the score resolution needed to separate the
//! `v`-th neighbor from the rest, count-min dimensions, repetition counts and
//! the memory exponent `b`; the sketch is sub-linear only when `b < 1`.
//!
//! Constants: 32 in the median-of-means repetition count, `e` in the
//! count-min width, and the error split `eps_E = eps/4`,
//! `eps_C = eps / (4 |s|_1)` with failure probability `delta/2` for each
//! part. Logarithms are natural.

// Negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Leading constant of the median-of-means repetition count.
pub const MOM_CONSTANT: f64 = 32.0;

/// Query-dependent stability quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityProfile {
    pub v: usize,
    pub k: u32,
    /// Collision probability of the `v`-th neighbor.
    pub p_v: f64,
    /// Collision probability of the `(v+1)`-th neighbor.
    pub p_v1: f64,
    /// `p_v1 / p_v`.
    pub delta: f64,
    /// `sum_{i>v} (p_i / p_v1)^(K/2)`.
    pub b: f64,
}

impl StabilityProfile {
    /// Builds a profile from probabilities sorted in non-increasing order.
    pub fn from_sorted_probabilities(probs: &[f64], v: usize, k: u32) -> Result<Self> {
        if v == 0 || probs.len() < v + 1 {
            return Err(Error::domain(format!(
                "need at least v + 1 = {} probabilities, got {}",
                v + 1,
                probs.len()
            )));
        }
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain("probabilities are not sorted"));
        }
        let (p_v, p_v1) = (probs[v - 1], probs[v]);
        if !(p_v1 > 0.0 && p_v <= 1.0) {
            return Err(Error::domain(format!(
                "need 0 < p_(v+1) <= p_v <= 1, got p_v = {p_v}, p_(v+1) = {p_v1}"
            )));
        }
        let half_k = k as f64 / 2.0;
        let b = probs[v..].iter().map(|p| (p / p_v1).powf(half_k)).sum();
        Ok(Self {
            v,
            k,
            p_v,
            p_v1,
            delta: p_v1 / p_v,
            b,
        })
    }
}

/// Everything the planner emits for one query profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerBudget {
    pub k: u32,
    pub epsilon: f64,
    pub rows: u32,
    pub cols: u32,
    /// Measurement count `d * w`.
    pub m: u64,
    /// Repetitions per measurement.
    pub reps: u64,
    pub delta_fail: f64,
    pub b: f64,
    pub b2: f64,
    pub size_bits: f64,
    pub sublinear: bool,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "stability ratio {delta} must lie in (0, 1); 1 means the query is unstable"
        )));
    }
    Ok(())
}

fn check_fail(delta_fail: f64) -> Result<()> {
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(Error::domain(format!("failure probability {delta_fail} not in (0, 1)")));
    }
    Ok(())
}

/// Smallest `K >= 1` with `delta^(-K/2) >= B`, i.e. `ceil(2 ln B / ln(1/delta))`.
pub fn choose_k(b: f64, delta: f64) -> Result<u32> {
    check_delta(delta)?;
    if !(b >= 1.0) {
        return Err(Error::domain(format!("tail mass B = {b} must be >= 1")));
    }
    let ok = |k: u32| delta.powf(-(k as f64) / 2.0) >= b;
    let mut k = (2.0 * b.ln() / (1.0 / delta).ln()).ceil().max(1.0) as u32;
    while k > 1 && ok(k - 1) {
        k -= 1;
    }
    while !ok(k) {
        k += 1;
    }
    Ok(k)
}

/// `p_v^K - p_{v+1}^K = p_v^K (1 - delta^K)`. `k` may be fractional.
pub fn resolution_epsilon(p_v: f64, delta: f64, k: f64) -> Result<f64> {
    if delta == 1.0 {
        return Err(Error::domain("delta = 1: neighbors v and v+1 are indistinguishable"));
    }
    check_delta(delta)?;
    if !(p_v > 0.0 && p_v <= 1.0) {
        return Err(Error::domain(format!("p_v = {p_v} not in (0, 1]")));
    }
    if !(k > 0.0) {
        return Err(Error::domain(format!("K = {k} must be positive")));
    }
    Ok(p_v.powf(k) * (1.0 - delta.powf(k)))
}

/// Unrounded repetitions per measurement, `32 |s~|_1^2 ln(M/delta) / eps^2`.
pub fn reps_needed_exact(s1_tilde_sq: f64, eps: f64, delta_fail: f64, m: u64) -> Result<f64> {
    check_fail(delta_fail)?;
    if !(s1_tilde_sq > 0.0 && eps > 0.0 && m >= 1) {
        return Err(Error::domain("reps_needed needs positive |s~|^2, eps and M"));
    }
    Ok(MOM_CONSTANT * s1_tilde_sq * (m as f64 / delta_fail).ln() / (eps * eps))
}

/// Median-of-means repetitions per measurement so that all `M` measurements
/// are within `eps` with probability `1 - delta_fail`.
pub fn reps_needed(s1_tilde_sq: f64, eps: f64, delta_fail: f64, m: u64) -> Result<u64> {
    Ok(reps_needed_exact(s1_tilde_sq, eps, delta_fail, m)?.ceil() as u64)
}

/// Count-min depth `ceil(ln(N / delta))`, at least 1.
pub fn cms_depth(n: u64, delta_fail: f64) -> Result<u32> {
    check_fail(delta_fail)?;
    if n == 0 {
        return Err(Error::domain("N must be positive"));
    }
    Ok(((n as f64 / delta_fail).ln().ceil() as u32).max(1))
}

/// Count-min width `ceil(e / eps_c)` for additive error `eps_c |s|_1`.
pub fn cms_width(eps_c: f64) -> Result<u32> {
    if !(eps_c > 0.0) {
        return Err(Error::domain(format!("eps_C = {eps_c} must be positive")));
    }
    Ok((E / eps_c).ceil() as u32)
}

/// `(d, w)` so that recovery error from collisions is at most `eps / 4`:
/// `eps_C = eps / (4 |s|_1)`.
pub fn cms_dimensions(s1: f64, eps: f64, delta_fail: f64, n: u64) -> Result<(u32, u32)> {
    if !(s1 > 0.0 && eps > 0.0) {
        return Err(Error::domain("cms_dimensions needs positive |s|_1 and eps"));
    }
    Ok((cms_depth(n, delta_fail)?, cms_width(eps / (4.0 * s1))?))
}

/// Memory exponents `(b, b2)` with `b = (6|ln p_v| + 2 ln r) / ln(1/delta)`
/// and `b2 = 2|ln p_v| / ln(1/delta)`.
pub fn memory_exponent(p_v: f64, delta: f64, r: u32) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if !(p_v > 0.0 && p_v < 1.0) {
        return Err(Error::domain(format!("p_v = {p_v} not in (0, 1)")));
    }
    if r < 2 {
        return Err(Error::domain("r must be at least 2"));
    }
    let denom = (1.0 / delta).ln();
    let lp = p_v.ln().abs();
    Ok(((6.0 * lp + 2.0 * (r as f64).ln()) / denom, 2.0 * lp / denom))
}

/// Largest `delta` with `b < 1` at fixed `(p_v, r)`: the sub-linearity frontier.
pub fn sublinear_delta_threshold(p_v: f64, r: u32) -> Result<f64> {
    if !(p_v > 0.0 && p_v < 1.0) || r < 2 {
        return Err(Error::domain("need 0 < p_v < 1 and r >= 2"));
    }
    Ok((-(6.0 * p_v.ln().abs() + 2.0 * (r as f64).ln())).exp())
}

/// Sketch bits when `|s~(q)|_1 <= C` holds at `K = 1`:
/// `32 r C^3/eps^3 * max(1, ln(C/(eps delta) ln(N/delta))) * ln(N/delta) * ln N`.
pub fn size_under_sparsity(c: f64, eps: f64, delta_fail: f64, r: u32, n: u64) -> Result<f64> {
    check_fail(delta_fail)?;
    if !(c > 0.0 && eps > 0.0) || r < 2 || n == 0 {
        return Err(Error::domain("size_under_sparsity needs positive C, eps, N and r >= 2"));
    }
    let log_n_delta = (n as f64 / delta_fail).ln();
    let nested = (c / (eps * delta_fail) * log_n_delta).ln().max(1.0);
    Ok(MOM_CONSTANT * r as f64 * (c / eps).powi(3) * nested * log_n_delta * (n as f64).ln())
}

/// Full budget for a `v`-NN query under the equidistant worst case
/// (`B = N - v`), where `|s|_1` and `|s~|_1` are both bounded by `v + 1`.
pub fn plan(p_v: f64, delta: f64, r: u32, n: u64, delta_fail: f64, v: usize) -> Result<PlannerBudget> {
    check_fail(delta_fail)?;
    if v == 0 || n <= v as u64 {
        return Err(Error::domain(format!("need 1 <= v < N, got v = {v}, N = {n}")));
    }
    let k = choose_k((n - v as u64) as f64, delta)?;
    let epsilon = resolution_epsilon(p_v, delta, k as f64)?;
    let bound = (v + 1) as f64;
    let (rows, cols) = cms_dimensions(bound, epsilon, delta_fail / 2.0, n)?;
    let m = rows as u64 * cols as u64;
    let reps = reps_needed(bound * bound, epsilon / 4.0, delta_fail / 2.0, m)?;
    let (b, b2) = memory_exponent(p_v, delta, r)?;
    let counter_bits = ((n + 1) as f64).log2().ceil();
    let size_bits = m as f64 * reps as f64 * (r as f64).powi(k as i32) * counter_bits;
    let sublinear = b < 1.0;
    if !sublinear {
        log::warn!("memory exponent b = {b:.3} >= 1: the sketch is not sub-linear for this query");
    }
    Ok(PlannerBudget {
        k,
        epsilon,
        rows,
        cols,
        m,
        reps,
        delta_fail,
        b,
        b2,
        size_bits,
        sublinear,
    })
}
