//! Synthetic dataset with planted near-duplicate clusters.
//!
//! Background vectors are uniform random subsets of the universe. Each
//! cluster is a query plus copies of it with 1 to `max_replaced` IDs swapped
//! for fresh ones, so a copy of a size-`s` query has Jaccard at least
//! `(s - t)/(s + t)` with `t = max_replaced`.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{make_sparse_vector, Dataset, SparseVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    /// Total vectors, planted ones included.
    pub n: usize,
    pub universe: u32,
    pub min_size: usize,
    pub max_size: usize,
    pub clusters: usize,
    pub neighbors_per_query: usize,
    pub max_replaced: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            universe: 100_000,
            min_size: 40,
            max_size: 60,
            clusters: 200,
            neighbors_per_query: 5,
            max_replaced: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: Dataset,
    /// Index of each cluster's query.
    pub queries: Vec<usize>,
    /// Indices of each cluster's planted neighbors.
    pub neighbors: Vec<Vec<usize>>,
}

fn random_set(rng: &mut ChaCha8Rng, universe: u32, size: usize) -> SparseVector {
    make_sparse_vector(
        sample_indices(rng, universe as usize, size)
            .into_iter()
            .map(|i| i as u32)
            .collect(),
    )
}

fn perturb(rng: &mut ChaCha8Rng, q: &SparseVector, universe: u32, t: usize) -> SparseVector {
    let mut ids = q.ids().to_vec();
    ids.shuffle(rng);
    ids.truncate(ids.len() - t);
    let mut added = 0;
    while added < t {
        let id = rng.gen_range(0..universe);
        if !q.contains(id) && !ids[ids.len() - added..].contains(&id) {
            ids.push(id);
            added += 1;
        }
    }
    make_sparse_vector(ids)
}

pub fn planted_dataset(spec: &PlantedSpec) -> Result<Planted> {
    let planted = spec.clusters * (1 + spec.neighbors_per_query);
    if planted > spec.n
        || spec.min_size == 0
        || spec.min_size > spec.max_size
        || spec.max_replaced == 0
        || spec.max_replaced >= spec.min_size
        || spec.max_size + spec.max_replaced > spec.universe as usize
    {
        return Err(Error::domain(format!("inconsistent planted spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut slots: Vec<usize> = (0..spec.n).collect();
    slots.shuffle(&mut rng);
    let mut vectors = vec![SparseVector::default(); spec.n];
    let mut queries = Vec::with_capacity(spec.clusters);
    let mut neighbors = Vec::with_capacity(spec.clusters);
    let mut next = slots.iter().copied();
    for _ in 0..spec.clusters {
        let size = rng.gen_range(spec.min_size..=spec.max_size);
        let q = random_set(&mut rng, spec.universe, size);
        let qi = next.next().unwrap();
        let mut nb = Vec::with_capacity(spec.neighbors_per_query);
        for _ in 0..spec.neighbors_per_query {
            let t = rng.gen_range(1..=spec.max_replaced);
            let j = next.next().unwrap();
            vectors[j] = perturb(&mut rng, &q, spec.universe, t);
            nb.push(j);
        }
        nb.sort_unstable();
        vectors[qi] = q;
        queries.push(qi);
        neighbors.push(nb);
    }
    for j in next {
        let size = rng.gen_range(spec.min_size..=spec.max_size);
        vectors[j] = random_set(&mut rng, spec.universe, size);
    }
    Ok(Planted {
        dataset: Dataset::new(vectors),
        queries,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::jaccard;

    #[test]
    fn planted_structure() {
        let spec = PlantedSpec {
            n: 2000,
            clusters: 30,
            ..Default::default()
        };
        let p = planted_dataset(&spec).unwrap();
        assert_eq!(p.dataset.len(), 2000);
        assert_eq!(p.queries.len(), 30);
        let mut seen = std::collections::HashSet::new();
        for (q, nb) in p.queries.iter().zip(&p.neighbors) {
            assert!(seen.insert(*q));
            for &j in nb {
                assert!(seen.insert(j));
                let s = jaccard(&p.dataset.vectors()[*q], &p.dataset.vectors()[j]).unwrap();
                assert!(s >= 0.9, "{s}");
            }
        }
        for v in p.dataset.vectors() {
            assert!((40..=60).contains(&v.len()));
        }
        let again = planted_dataset(&spec).unwrap();
        assert_eq!(again.dataset, p.dataset);
        assert!(planted_dataset(&PlantedSpec { n: 10, ..Default::default() }).is_err());
    }
}
