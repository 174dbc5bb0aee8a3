use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use ftoracle_core::bundle::OracleBundle;
use ftoracle_core::ft::{FtLimits, VicinityMode};
use ftoracle_core::graph::{parse_graph, write_graph, GeoGraph};
use ftoracle_core::kernel::{KernelConfig, SplitMode};
use ftoracle_core::queries::{answer, parse_queries, random_queries, verify, write_queries, QueryKind};
use ftoracle_core::spanner_gen::{
    generate_ft_spanner, validate_ft_spanner, validate_ft_spanner_sampled, Distribution, SpannerSpec,
};

#[derive(Parser)]
#[command(name = "ftoracle", version, about = "Fault-tolerant distance and path oracles for Euclidean spanners")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a fault-tolerant spanner with the greedy construction.
    Gen(GenArgs),
    /// Write random queries for a graph.
    GenQueries(GenQueriesArgs),
    /// Check that a graph is an f-fault-tolerant t-spanner.
    Validate(ValidateArgs),
    /// Preprocess a graph into an oracle bundle.
    Build(BuildArgs),
    /// Answer a query file with a bundle.
    Query(QueryArgs),
    /// Compare bundle answers with exact distances on random queries.
    Verify(VerifyArgs),
    /// Time builds and queries over a range of sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    f: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform-square, clustered, grid or hierarchical.
    #[arg(long, default_value = "uniform-square")]
    distribution: Distribution,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenQueriesArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "distance")]
    kind: QueryKind,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    graph: PathBuf,
    /// Check this many random pairs instead of all pairs.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct OracleFlags {
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Node cap per fault-tolerant tree.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// pair or level.
    #[arg(long, default_value = "pair")]
    vicinity_mode: VicinityMode,
    /// auto, literal or off.
    #[arg(long, default_value = "auto")]
    split: SplitMode,
    /// Materialize all fault-tolerant trees at build time.
    #[arg(long)]
    eager_ft: bool,
}

impl OracleFlags {
    fn config(&self) -> KernelConfig {
        let defaults = KernelConfig::default();
        KernelConfig {
            split: self.split,
            vicinity_mode: self.vicinity_mode,
            eager_ft: self.eager_ft,
            ft_limits: FtLimits {
                max_nodes: self.max_nodes.unwrap_or(defaults.ft_limits.max_nodes),
                ..defaults.ft_limits
            },
            ..defaults
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    graph: PathBuf,
    #[command(flatten)]
    oracle: OracleFlags,
    /// Skip spanner validation.
    #[arg(long)]
    trust: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    bundle: PathBuf,
    queries: PathBuf,
    /// Refuse the bundle unless it was built for this graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Omit per-query timings, making output reproducible.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    graph: PathBuf,
    bundle: PathBuf,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    f: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value = "uniform-square")]
    distribution: Distribution,
    #[command(flatten)]
    oracle: OracleFlags,
}

fn read_graph(path: &Path) -> Result<GeoGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_graph(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn gen(a: GenArgs) -> Result<ExitCode> {
    let g = generate_ft_spanner(&SpannerSpec::new(a.n, a.t, a.f, a.seed, a.distribution)?)?;
    emit(&a.out, &write_graph(&g))?;
    Ok(ExitCode::SUCCESS)
}

fn gen_queries(a: GenQueriesArgs) -> Result<ExitCode> {
    let g = read_graph(&a.graph)?;
    emit(&a.out, &write_queries(&random_queries(&g, a.count, a.seed, a.kind)))?;
    Ok(ExitCode::SUCCESS)
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    let g = read_graph(&a.graph)?;
    let p = g.params;
    let r = match a.samples {
        Some(k) => validate_ft_spanner_sampled(&g, p.t, p.f, p.l, k, a.seed),
        None => validate_ft_spanner(&g, p.t, p.f, p.l),
    };
    print!("{}", r.to_kv());
    Ok(if r.is_valid() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn build(a: BuildArgs) -> Result<ExitCode> {
    let g = read_graph(&a.graph)?;
    if !a.trust {
        let p = g.params;
        let r = validate_ft_spanner(&g, p.t, p.f, p.l);
        if !r.is_valid() {
            eprint!("{}", r.to_kv());
            bail!("{} is not a valid fault-tolerant spanner (use --trust to skip)", a.graph.display());
        }
    }
    let start = Instant::now();
    let b = OracleBundle::build(&g, a.oracle.eps, a.oracle.config())?;
    b.save(&a.out)?;
    eprintln!(
        "built bundle={} scales={} sequences={} seconds={:.3}",
        a.out.display(),
        b.oracle.sequences.scale_count(),
        b.oracle.sequences.sequences.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

fn query(a: QueryArgs) -> Result<ExitCode> {
    let b = OracleBundle::load(&a.bundle).with_context(|| format!("loading {}", a.bundle.display()))?;
    if let Some(gp) = &a.graph {
        b.check_graph(&read_graph(gp)?)?;
    }
    let text = fs::read_to_string(&a.queries).with_context(|| format!("reading {}", a.queries.display()))?;
    let records = parse_queries(&text);
    let lines: Vec<std::result::Result<String, String>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let q = r.as_ref().map_err(|e| format!("query={i} skipped: {e}"))?;
            answer(&b.oracle, q, !a.no_timing)
                .map(|ans| ans.to_line(i))
                .map_err(|e| format!("query={i} skipped: {e}"))
        })
        .collect();
    let mut out = String::new();
    for l in lines {
        match l {
            Ok(s) => {
                out.push_str(&s);
                out.push('\n');
            }
            Err(e) => eprintln!("{e}"),
        }
    }
    emit(&a.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(a: VerifyArgs) -> Result<ExitCode> {
    let g = read_graph(&a.graph)?;
    let b = OracleBundle::load(&a.bundle).with_context(|| format!("loading {}", a.bundle.display()))?;
    b.check_graph(&g)?;
    let half = a.queries / 2;
    let mut qs = random_queries(&g, a.queries - half, a.seed, QueryKind::Distance);
    qs.extend(random_queries(&g, half, a.seed.wrapping_add(1), QueryKind::Path));
    let r = verify(&g, &b.oracle, &qs)?;
    print!("{}", r.to_kv());
    Ok(if r.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    println!("n m build_seconds bundle_bytes distance_micros path_micros max_kernel_vertices");
    for &n in &a.sizes {
        let g = generate_ft_spanner(&SpannerSpec::new(n, a.t, a.f, a.seed, a.distribution)?)?;
        let start = Instant::now();
        let b = OracleBundle::build(&g, a.oracle.eps, a.oracle.config())?;
        let build_s = start.elapsed().as_secs_f64();
        let bytes = b.to_bytes()?.len();
        let mut kv = 0;
        let mut time = |kind| -> Result<f64> {
            let qs = random_queries(&g, a.queries, a.seed, kind);
            let start = Instant::now();
            for q in &qs {
                kv = kv.max(answer(&b.oracle, q, false)?.trace.kernel_vertices);
            }
            Ok(start.elapsed().as_secs_f64() * 1e6 / qs.len().max(1) as f64)
        };
        let d = time(QueryKind::Distance)?;
        let p = time(QueryKind::Path)?;
        println!("{n} {} {build_s:.4} {bytes} {d:.1} {p:.1} {kv}", g.m());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let run = match cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::GenQueries(a) => gen_queries(a),
        Cmd::Validate(a) => validate(a),
        Cmd::Build(a) => build(a),
        Cmd::Query(a) => query(a),
        Cmd::Verify(a) => verify_cmd(a),
        Cmd::Bench(a) => bench(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
