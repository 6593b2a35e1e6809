//! Quick oracle checks runnable from the CLI. Each check compares the
//! library against an independent computation with a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::planted::{planted_dataset, PlantedSpec};
use super::{run_eval, EvalOptions, MethodPoint};
use crate::core::{make_sparse_vector, Dataset, SketchConfig, SparseVector, StorageMode};
use crate::error::Result;
use crate::hashing::{collision_model, derive_seed, minhash, HashPlan};
use crate::ingest::{parse_edge_list, raw_size_bytes};
use crate::oracle::{exact_measurements, exact_scores, jaccard};
use crate::planner::{choose_k, memory_exponent};
use crate::race_cms::RaceCmsSketch;
use crate::recovery::recover_scores;

type CheckFn = fn() -> Result<Check>;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (SparseVector, SparseVector) {
    let shared = rng.gen_range(1..20u32);
    let a_only = rng.gen_range(0..20u32);
    let b_only = rng.gen_range(0..20u32);
    let a = (0..shared).chain(100..100 + a_only).collect();
    let b = (0..shared).chain(200..200 + b_only).collect();
    (a, b)
}

fn minhash_rate() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 2000u64;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (a, b) = random_pair(&mut rng);
        let j = jaccard(&a, &b)?;
        let mut hits = 0u64;
        for t in 0..trials {
            let s = derive_seed(77, &[t]);
            hits += (minhash(s, &a)? == minhash(s, &b)?) as u64;
        }
        let se = (j * (1.0 - j) / trials as f64).sqrt().max(1e-12);
        worst = worst.max((hits as f64 / trials as f64 - j).abs() / se);
    }
    Ok(check("minhash collision rate", worst <= 4.0, format!("worst deviation {worst:.2} SE")))
}

fn ace_mean() -> Result<Check> {
    let data: Vec<SparseVector> = (0..10u32).map(|i| (i..i + 8).collect()).collect();
    let q: SparseVector = (0..8).collect();
    let (k, r) = (2, 16);
    let ds = Dataset::new(data.clone());
    let want = exact_scores(&ds, &q, k, r)?.l1();
    let trials = 2000;
    let mut xs = Vec::with_capacity(trials);
    for t in 0..trials {
        let cfg = SketchConfig::new(k, 1, 1, 1, r).with_seed(t as u64);
        let mut sk = RaceCmsSketch::new(cfg)?;
        for (j, x) in data.iter().enumerate() {
            sk.insert(j as u64, x)?;
        }
        let b = sk.plan().lsh_bucket(0, 0, None, &q)?;
        xs.push(sk.counter(0, 0, 0, b) as f64);
    }
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let z = (mean - want).abs() / (var / trials as f64).sqrt();
    Ok(check("array-of-counts mean", z <= 3.0, format!("mean {mean:.4} vs {want:.4} ({z:.2} SE)")))
}

fn count_min_one_sided() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ds = Dataset::new(
        (0..300)
            .map(|_| (0..10).map(|_| rng.gen_range(0..60)).collect())
            .collect(),
    );
    let q = make_sparse_vector((0..10).collect());
    let mut ok = true;
    for seed in 0..20 {
        let cfg = SketchConfig::new(1, 3, 40, 1, 64).with_seed(seed);
        let plan = HashPlan::new(&cfg);
        let s = exact_scores(&ds, &q, 1, 64)?;
        let est = exact_measurements(&ds, &q, &cfg, &plan)?;
        let rec = recover_scores(&est, ds.len(), &plan);
        ok &= rec.0.iter().zip(&s.0).all(|(a, b)| *a >= *b - 1e-12);
    }
    Ok(check("count-min never underestimates", ok, "20 seeds".into()))
}

fn planner_examples() -> Result<Check> {
    let (b, _) = memory_exponent(0.9, 0.5, 4)?;
    let k = choose_k(100.0, 0.5)?;
    let m = collision_model(0.5, 2, 100)?;
    let ok = (b - 4.912).abs() < 5e-4 && k == 14 && (m - 0.2575).abs() < 1e-12;
    Ok(check("planner examples", ok, format!("b = {b:.3}, K = {k}")))
}

fn raw_size_toy() -> Result<Check> {
    let ds = parse_edge_list("0 1\n0 2\n1 2".as_bytes(), true)?;
    let n = raw_size_bytes(&ds);
    Ok(check("raw size of toy graph", n == 7, format!("{n} bytes")))
}

fn merge_matches_sequential() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<SparseVector> = (0..200)
        .map(|_| (0..5).map(|_| rng.gen_range(0..100)).collect())
        .collect();
    let cfg = SketchConfig::new(2, 2, 10, 3, 32).with_storage(StorageMode::Map);
    let mut all = RaceCmsSketch::new(cfg)?;
    let mut a = RaceCmsSketch::new(cfg)?;
    let mut b = RaceCmsSketch::new(cfg)?;
    for (j, x) in xs.iter().enumerate() {
        all.insert(j as u64, x)?;
        if j % 2 == 0 { &mut a } else { &mut b }.insert(j as u64, x)?;
    }
    let ok = a.merge(&b)? == all;
    Ok(check("merge equals sequential build", ok, "200 vectors".into()))
}

fn planted_recall() -> Result<Check> {
    let p = planted_dataset(&PlantedSpec {
        n: 2000,
        clusters: 40,
        seed: 3,
        ..Default::default()
    })?;
    let cfg = SketchConfig::new(1, 2, 60, 2, 65536)
        .with_storage(StorageMode::Map)
        .with_counter_bits(8);
    let rec = run_eval(
        &p.dataset,
        &p.queries,
        &[MethodPoint::Race(cfg)],
        &EvalOptions {
            timings: false,
            ..Default::default()
        },
    )?;
    let r = &rec[0];
    Ok(check(
        "planted recall at 0.9",
        r.recall_090 >= 0.85,
        format!("recall {:.3} at inv_ratio {:.3}", r.recall_090, r.inv_ratio),
    ))
}

/// Runs every check; errors are reported as failures.
pub fn run_selftest() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("minhash collision rate", minhash_rate),
        ("array-of-counts mean", ace_mean),
        ("count-min never underestimates", count_min_one_sided),
        ("planner examples", planner_examples),
        ("raw size of toy graph", raw_size_toy),
        ("merge equals sequential build", merge_matches_sequential),
        ("planted recall at 0.9", planted_recall),
    ];
    checks
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
