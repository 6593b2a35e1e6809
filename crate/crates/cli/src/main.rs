use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use racecms::harness::planted::{planted_dataset, PlantedSpec};
use racecms::harness::selftest::run_selftest;
use racecms::harness::{
    build_sketch, parse_methods, run_eval, select_queries, thread_pool, write_csv, EvalOptions, GridSpec,
};
use racecms::ingest::{dataset_stats, deserialize_dataset, parse_edge_list, raw_size_bytes, serialize_dataset};
use racecms::planner::plan;
use racecms::recovery::{query_scores, top_v_masked};
use racecms::{Dataset, LshSharing, RaceCmsSketch, SketchConfig, StorageMode};

#[derive(Parser)]
#[command(name = "racecms", version, about = "RACE-CMS near-neighbor sketches over sparse sets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Array,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sharing {
    PerRowRep,
    PerCell,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse an edge list into a dataset cache and print its statistics.
    Ingest {
        edgelist: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Add every edge in both directions.
        #[arg(long)]
        undirected: bool,
        /// Pairs sampled for the mean similarity.
        #[arg(long, default_value_t = 1_000_000)]
        sample_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a planted-cluster synthetic dataset cache.
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        clusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a sketch of every non-empty vector in a dataset cache.
    Sketch {
        cache: PathBuf,
        #[arg(long = "K", default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[arg(long, default_value_t = 100)]
        w: u32,
        #[arg(long = "R", default_value_t = 4)]
        reps: u32,
        #[arg(long, default_value_t = 100)]
        r: u32,
        #[arg(long, default_value_t = 16)]
        bits: u8,
        #[arg(long, value_enum, default_value_t = Mode::Map)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Sharing::PerRowRep)]
        sharing: Sharing,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rank the nearest neighbors of one node.
    Query {
        sketch: PathBuf,
        cache: PathBuf,
        /// Node label (the original ID for ingested edge lists).
        #[arg(long)]
        node: u64,
        #[arg(long, default_value_t = 20)]
        v: usize,
        /// Allow the node itself in the results.
        #[arg(long)]
        include_self: bool,
    },
    /// Sketch parameters for a query profile in the equidistant worst case.
    Plan {
        #[arg(long)]
        pv: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        r: u32,
        #[arg(long = "N")]
        n: u64,
        #[arg(long, default_value_t = 0.05)]
        delta_fail: f64,
        #[arg(long, default_value_t = 20)]
        v: usize,
    },
    /// Recall-vs-bytes sweep, written as CSV.
    Eval {
        cache: PathBuf,
        /// Comma-separated: array, map, proj, sample.
        #[arg(long, default_value = "map,proj,sample")]
        methods: String,
        /// `key=v1,v2;...` with keys K d w R r bits m f.
        #[arg(long, default_value = "")]
        grid: String,
        #[arg(long, default_value_t = 500)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        v: usize,
        /// Rebuild per query with only that query removed.
        #[arg(long)]
        strict_removal: bool,
        /// Write zero wall times so the CSV is byte-reproducible.
        #[arg(long)]
        no_timings: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn load(cache: &PathBuf) -> Result<Dataset> {
    let bytes = fs::read(cache).with_context(|| format!("reading {}", cache.display()))?;
    deserialize_dataset(&bytes).with_context(|| format!("decoding {}", cache.display()))
}

fn save(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest {
            edgelist,
            output,
            undirected,
            sample_pairs,
            seed,
        } => {
            let f = File::open(&edgelist).with_context(|| format!("opening {}", edgelist.display()))?;
            let ds = parse_edge_list(BufReader::new(f), !undirected)?;
            save(&output, &serialize_dataset(&ds))?;
            let st = dataset_stats(&ds, sample_pairs, seed);
            println!("nodes\tnonzeros\tmean_edges\tmean_similarity\traw_bytes");
            let sim = if st.similarity_defined {
                format!("{:.6}", st.mean_similarity)
            } else {
                "0 (undefined)".to_string()
            };
            println!(
                "{}\t{}\t{:.3}\t{}\t{}",
                st.nodes,
                st.nonzeros,
                st.mean_edges,
                sim,
                raw_size_bytes(&ds)
            );
        }
        Cmd::Synth {
            output,
            n,
            clusters,
            seed,
        } => {
            let p = planted_dataset(&PlantedSpec {
                n,
                clusters,
                seed,
                ..Default::default()
            })?;
            save(&output, &serialize_dataset(&p.dataset))?;
            println!("{} vectors, {} planted clusters", p.dataset.len(), p.queries.len());
        }
        Cmd::Sketch {
            cache,
            k,
            d,
            w,
            reps,
            r,
            bits,
            mode,
            sharing,
            seed,
            output,
        } => {
            let ds = load(&cache)?;
            let cfg = SketchConfig::new(k, d, w, reps, r)
                .with_counter_bits(bits)
                .with_seed(seed)
                .with_storage(match mode {
                    Mode::Array => StorageMode::Array,
                    Mode::Map => StorageMode::Map,
                })
                .with_sharing(match sharing {
                    Sharing::PerRowRep => LshSharing::PerRowRep,
                    Sharing::PerCell => LshSharing::PerCell,
                });
            let sk = thread_pool(None)?.install(|| build_sketch(&ds, cfg, |_| true))?;
            save(&output, &sk.serialize())?;
            println!(
                "inserted {} vectors; memory_footprint {} bytes ({:.4} of raw)",
                sk.n_inserted(),
                sk.memory_footprint(),
                sk.memory_footprint() as f64 / raw_size_bytes(&ds) as f64
            );
        }
        Cmd::Query {
            sketch,
            cache,
            node,
            v,
            include_self,
        } => {
            let sk = RaceCmsSketch::deserialize(&fs::read(&sketch).with_context(|| format!("reading {}", sketch.display()))?)?;
            let ds = load(&cache)?;
            let Some(j) = ds.index_of(node) else {
                bail!("node {node} is not in the dataset");
            };
            let s = query_scores(&sk, &ds.vectors()[j], ds.len())?;
            let allowed: Vec<bool> = (0..ds.len()).map(|i| include_self || i != j).collect();
            let n_allowed = allowed.iter().filter(|a| **a).count();
            let res = top_v_masked(&s, v.min(n_allowed), &allowed)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "rank\tnode\tscore")?;
            for (rank, (&i, sc)) in res.neighbors.iter().zip(&res.scores).enumerate() {
                writeln!(out, "{}\t{}\t{:.4}", rank + 1, ds.label(i), sc)?;
            }
        }
        Cmd::Plan {
            pv,
            delta,
            r,
            n,
            delta_fail,
            v,
        } => {
            let b = plan(pv, delta, r, n, delta_fail, v)?;
            println!("K = {}", b.k);
            println!("epsilon = {:.6e}", b.epsilon);
            println!("d = {}, w = {}, M = {}", b.rows, b.cols, b.m);
            println!("R = {}", b.reps);
            println!("b = {:.3}, b2 = {:.3}", b.b, b.b2);
            println!("predicted bits = {:.6e}", b.size_bits);
            if !b.sublinear {
                println!("warning: b = {:.3} >= 1, not sub-linear in N for this query profile", b.b);
            }
        }
        Cmd::Eval {
            cache,
            methods,
            grid,
            queries,
            seed,
            v,
            strict_removal,
            no_timings,
            output,
        } => {
            let ds = load(&cache)?;
            let methods = parse_methods(&methods)?;
            let grid: GridSpec = grid.parse()?;
            let points = grid.points(&methods, seed);
            let q = thread_pool(None)?.install(|| select_queries(&ds, queries, seed));
            if q.is_empty() {
                bail!("no node has a neighbor at similarity >= 0.9");
            }
            if q.len() < queries {
                log::warn!("only {} eligible queries", q.len());
            }
            let opts = EvalOptions {
                v,
                strict_removal,
                timings: !no_timings,
            };
            let records = run_eval(&ds, &q, &points, &opts)?;
            let f = File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            write_csv(&records, BufWriter::new(f))?;
            println!("{} records over {} queries -> {}", records.len(), q.len(), output.display());
        }
        Cmd::Selftest => {
            let mut failed = 0;
            for c in run_selftest() {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += !c.passed as usize;
            }
            if failed > 0 {
                bail!("{failed} selftest checks failed");
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse().cmd)
}
