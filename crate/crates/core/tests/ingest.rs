use std::io::Write;

use racecms::ingest::{dataset_stats, deserialize_dataset, parse_edge_list, raw_size_bytes, serialize_dataset};
use racecms::Error;

#[test]
fn parse_from_file_round_trips_through_cache() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "# Directed graph\n# FromNodeId\tToNodeId").unwrap();
    for (a, b) in [(10, 20), (10, 30), (20, 30), (30, 10), (10, 20), (40, 10)] {
        writeln!(f, "{a}\t{b}").unwrap();
    }
    let ds = parse_edge_list(std::io::BufReader::new(f.reopen().unwrap()), true).unwrap();
    assert_eq!(ds.labels().unwrap(), &[10, 20, 30, 40]);
    // five distinct (src, dst) lines
    assert_eq!(ds.nonzeros(), 5);
    assert_eq!(ds.vectors()[0].ids(), &[1, 2]);
    assert_eq!(ds.vectors()[3].ids(), &[0]);
    let again = parse_edge_list(std::io::BufReader::new(f.reopen().unwrap()), true).unwrap();
    assert_eq!(again, ds);
    let bytes = serialize_dataset(&ds);
    assert_eq!(deserialize_dataset(&bytes).unwrap(), ds);
    assert_eq!(raw_size_bytes(&ds), 5 + 5);
}

#[test]
fn undirected_doubles_edges() {
    let d = parse_edge_list("1 2\n2 3\n".as_bytes(), false).unwrap();
    assert_eq!(d.nonzeros(), 4);
    assert_eq!(d.vectors()[1].ids(), &[0, 2]);
}

#[test]
fn overflow_and_parse_errors() {
    let e = parse_edge_list("1 2\n3 5000000000\n".as_bytes(), true).unwrap_err();
    assert!(matches!(e, Error::OverflowError { line: 2, .. }), "{e}");
    let e = parse_edge_list("1 2\n\n3,4\n".as_bytes(), true).unwrap_err();
    assert!(matches!(e, Error::ParseError { line: 3, .. }), "{e}");
}

#[test]
fn mean_similarity_estimate() {
    // Half the vectors equal {0,1}, half equal {2,3}: pairs of distinct
    // indices agree with probability (n/2 - 1)/(n - 1).
    let mut edges = String::new();
    for v in 0..100 {
        let base = if v % 2 == 0 { 1000 } else { 2000 };
        edges.push_str(&format!("{v} {base}\n{v} {}\n", base + 1));
    }
    let ds = parse_edge_list(edges.as_bytes(), true).unwrap();
    let st = dataset_stats(&ds, 20_000, 3);
    let n = ds.len() as f64;
    // Every source has two edges; the 4 targets have none.
    let (a, b) = (50.0, 4.0);
    let p = (2.0 * a * (a - 1.0) + b * (b - 1.0) * 0.0) / (n * (n - 1.0));
    let se = (p * (1.0 - p) / 20_000.0).sqrt();
    assert!((st.mean_similarity - p).abs() < 4.0 * se, "{} vs {p}", st.mean_similarity);
    assert_eq!(st.nonzeros, 200);
}
