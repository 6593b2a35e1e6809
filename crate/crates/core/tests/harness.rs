use racecms::harness::planted::{planted_dataset, PlantedSpec};
use racecms::harness::{run_eval, select_queries, write_csv, EvalOptions, Method, MethodPoint, NeighborIndex};
use racecms::oracle::jaccard;
use racecms::{make_sparse_vector, Dataset, SketchConfig, SparseVector, StorageMode};

fn small() -> racecms::harness::planted::Planted {
    planted_dataset(&PlantedSpec {
        n: 1200,
        clusters: 25,
        seed: 17,
        ..Default::default()
    })
    .unwrap()
}

fn quiet() -> EvalOptions {
    EvalOptions {
        timings: false,
        ..Default::default()
    }
}

fn map_point(seed: u64) -> MethodPoint {
    MethodPoint::Race(
        SketchConfig::new(1, 2, 60, 3, 65536)
            .with_storage(StorageMode::Map)
            .with_counter_bits(8)
            .with_seed(seed),
    )
}

#[test]
fn full_sample_is_exact_search() {
    let p = small();
    let r = run_eval(&p.dataset, &p.queries, &[MethodPoint::Sampling { fraction: 1.0, seed: 1 }], &quiet()).unwrap();
    assert_eq!(r[0].recall_080, 1.0);
    assert_eq!(r[0].recall_090, 1.0);
    assert_eq!(r[0].n_queries, 25);
}

#[test]
fn strict_removal_matches_bulk_exclusion() {
    let p = small();
    let qs = &p.queries[..8];
    let points = [map_point(3), MethodPoint::Projection { m: 20, seed: 3 }];
    let bulk = run_eval(&p.dataset, qs, &points, &quiet()).unwrap();
    let strict = run_eval(
        &p.dataset,
        qs,
        &points,
        &EvalOptions {
            strict_removal: true,
            ..quiet()
        },
    )
    .unwrap();
    for (a, b) in bulk.iter().zip(&strict) {
        assert!((a.recall_090 - b.recall_090).abs() <= 0.1, "{a:?} vs {b:?}");
        assert!(a.recall_090 >= 0.8 && b.recall_090 >= 0.8 || a.method == Method::RandomProjection);
    }
}

#[test]
fn recall_is_capped_by_result_size() {
    // One query with 30 identical copies: only 20 fit in the results.
    let q: SparseVector = (0..40).collect();
    let mut v = vec![q.clone(); 31];
    for i in 0..200u32 {
        v.push(make_sparse_vector((1000 + i * 50..1000 + i * 50 + 40).collect()));
    }
    let ds = Dataset::new(v);
    let r = run_eval(&ds, &[0], &[MethodPoint::Sampling { fraction: 1.0, seed: 0 }], &quiet()).unwrap();
    assert!((r[0].recall_090 - 20.0 / 30.0).abs() < 1e-12);
}

#[test]
fn queries_are_eligible_and_seeded() {
    let p = small();
    let qs = select_queries(&p.dataset, 40, 5);
    assert_eq!(qs.len(), 40);
    assert_eq!(qs, select_queries(&p.dataset, 40, 5));
    assert_ne!(qs, select_queries(&p.dataset, 40, 6));
    for &q in &qs {
        let x = &p.dataset.vectors()[q];
        let best = (0..p.dataset.len())
            .filter(|&j| j != q)
            .map(|j| jaccard(x, &p.dataset.vectors()[j]).unwrap())
            .fold(0.0, f64::max);
        assert!(best >= 0.9);
    }
    // Only the 150 planted vectors are eligible.
    assert_eq!(select_queries(&p.dataset, 1000, 5).len(), 25 * 6);
}

#[test]
fn neighbor_index_excludes() {
    let p = small();
    let idx = NeighborIndex::new(&p.dataset);
    let q = p.queries[0];
    let got = idx.neighbors(&p.dataset.vectors()[q], &[0.9], |j| j == q);
    assert_eq!(got[0], p.neighbors[0]);
    let none = idx.neighbors(&p.dataset.vectors()[q], &[0.9], |j| j == q || p.neighbors[0].contains(&j));
    assert!(none[0].is_empty());
}

#[test]
fn csv_has_one_row_per_point_and_is_reproducible() {
    let p = small();
    let points = [map_point(1), map_point(2), MethodPoint::Sampling { fraction: 0.1, seed: 1 }];
    let write = || {
        let r = run_eval(&p.dataset, &p.queries, &points, &quiet()).unwrap();
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let a = write();
    assert_eq!(a.lines().count(), 4);
    assert_eq!(a, write());
    for line in a.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 10);
        for k in [4, 5] {
            let x: f64 = f[k].parse().unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
        assert!(f[3].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let p = small();
    let points = [map_point(4), MethodPoint::Projection { m: 10, seed: 4 }];
    let pool = |n| racecms::harness::thread_pool(Some(n)).unwrap();
    let one = pool(1).install(|| run_eval(&p.dataset, &p.queries, &points, &quiet()).unwrap());
    let four = pool(4).install(|| run_eval(&p.dataset, &p.queries, &points, &quiet()).unwrap());
    assert_eq!(one, four);
}

#[test]
fn rejects_bad_queries() {
    let p = small();
    assert!(run_eval(&p.dataset, &[], &[map_point(1)], &quiet()).is_err());
    assert!(run_eval(&p.dataset, &[p.dataset.len()], &[map_point(1)], &quiet()).is_err());
}
