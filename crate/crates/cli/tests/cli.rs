use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn racecms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racecms"))
        .args(args)
        .output()
        .expect("run racecms")
}

fn ok(args: &[&str]) -> String {
    let out = racecms(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn plan_warns_when_not_sublinear() {
    let out = ok(&["plan", "--pv", "0.9", "--delta", "0.5", "--r", "4", "--N", "1000", "--delta-fail", "0.05"]);
    assert!(out.contains("b = 4.912"), "{out}");
    assert!(out.contains("not sub-linear"), "{out}");
    let quiet = ok(&["plan", "--pv", "0.99", "--delta", "0.001", "--r", "2", "--N", "1000"]);
    assert!(!quiet.contains("not sub-linear"), "{quiet}");
}

#[test]
fn ingest_sketch_query_toy_graph() {
    let dir = tempfile::tempdir().unwrap();
    let edges = p(dir.path(), "toy.txt");
    fs::write(&edges, "# toy\n0 1\n0 2\n1 2\n").unwrap();
    let cache = p(dir.path(), "toy.rdst");
    let stats = ok(&["ingest", &edges, "-o", &cache]);
    let row: Vec<&str> = stats.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[..2], &["3", "3"]);
    assert_eq!(row[4], "7");

    let sketch = p(dir.path(), "toy.race");
    let out = ok(&["sketch", &cache, "--K", "1", "--d", "2", "--w", "8", "--R", "4", "--r", "64", "--mode", "array", "-o", &sketch]);
    assert!(out.contains("memory_footprint"), "{out}");
    let expected = fs::metadata(&sketch).unwrap().len().to_string();
    assert!(out.contains(&format!("memory_footprint {expected} bytes")), "{out}");

    let res = ok(&["query", &sketch, &cache, "--node", "0", "--v", "1"]);
    let first: Vec<&str> = res.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(first[1], "1", "{res}");
    let with_self = ok(&["query", &sketch, &cache, "--node", "0", "--v", "2", "--include-self"]);
    assert_eq!(with_self.lines().nth(1).unwrap().split('\t').nth(1), Some("0"));
    assert!(!racecms(&["query", &sketch, &cache, "--node", "99"]).status.success());
}

#[test]
fn eval_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cache = p(dir.path(), "synth.rdst");
    ok(&["synth", "-o", &cache, "--n", "1500", "--clusters", "30", "--seed", "4"]);
    let grid = "K=1;d=2;w=60,120;R=2;r=1000;bits=8;m=10;f=0.1";
    let run = |name: &str| {
        let out = p(dir.path(), name);
        ok(&["eval", &cache, "--methods", "map,proj,sample", "--grid", grid, "--queries", "25", "--seed", "9", "--no-timings", "-o", &out]);
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "method,params,bytes,inv_ratio,recall_080,recall_090,n_queries,build_s,query_s,pareto");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("map_race,"));
    assert!(lines[4].starts_with("random_sampling,"));
    for l in &lines[1..] {
        assert!(l.contains(",0.000,0.000,"), "{l}");
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let edges = p(dir.path(), "bad.txt");
    fs::write(&edges, "0 1\n0 banana\n").unwrap();
    let out = racecms(&["ingest", &edges, "-o", &p(dir.path(), "x")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!racecms(&["plan", "--pv", "0.9", "--delta", "1.0", "--r", "4", "--N", "100"]).status.success());
    assert!(!racecms(&["query", "missing.race", "missing.rdst", "--node", "0"]).status.success());
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"]);
    assert!(!out.contains("FAIL"), "{out}");
    assert_eq!(out.lines().count(), 7);
}
