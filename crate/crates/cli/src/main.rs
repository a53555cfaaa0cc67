use std::collections::BTreeMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use modmbo::data::io;
use modmbo::data::{knn_graph, planted_partition, PlantedPartitionSpec};
use modmbo::eigen::{self, default_n_eig, EigenBasis, EigenOptions};
use modmbo::functional::modularity;
use modmbo::metrics::{nmi, purity, MetricsRecord};
use modmbo::schemes::{run_multi_n, run_rmm_with_basis, SweepEntry};
use modmbo::{run_mbo, Graph, MboConfig, Partition, SchemeConfig};

#[derive(Parser)]
#[command(name = "modmbo", version, about = "Modularity-based community detection with MBO threshold dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect communities in an edge-list graph.
    Detect(DetectArgs),
    /// Sample a planted-partition graph and its ground truth.
    Generate(GenerateArgs),
    /// Build a k-nearest-neighbor similarity graph from node features.
    Knn(KnnArgs),
    /// Compare a partition with ground truth and report its modularity.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Scheme {
    Mbo,
    Rmm,
    Multi,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Scheme::Mbo)]
    scheme: Scheme,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Maximum number of communities (mbo scheme).
    #[arg(long)]
    nhat: Option<usize>,
    /// Inclusive n̂ range `A..B` (multi scheme).
    #[arg(long, value_parser = parse_range)]
    nrange: Option<RangeInclusive<usize>>,
    /// Eigenpairs to compute; defaults to min(80, N).
    #[arg(long)]
    neig: Option<usize>,
    #[arg(long, default_value_t = 5)]
    eta: usize,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random initial functions per setting (rmm and multi schemes).
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Partial labels `node,community` fixed in the initial function.
    #[arg(long = "known-labels")]
    known_labels: Option<PathBuf>,
    /// Ground truth `node,community` for NMI and purity.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("invalid range start {a:?}"))?;
    let b: usize = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("invalid range end {b:?}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok(a..=b)
}

#[derive(Args)]
struct GenerateArgs {
    /// `N,BLOCKS,PIN,POUT`.
    #[arg(long)]
    planted: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `graph.txt` and `truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Output edge list.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Serialize)]
struct ConfigEcho {
    graph: PathBuf,
    scheme: Scheme,
    gamma: f64,
    nhat: Option<usize>,
    nrange: Option<[usize; 2]>,
    neig: usize,
    eta: usize,
    dt: f64,
    max_iter: usize,
    seed: u64,
    restarts: usize,
    known_labels: Option<PathBuf>,
    truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct Timings {
    eigensolve_ms: f64,
    mbo_ms: f64,
    total_ms: f64,
}

#[derive(Serialize)]
struct SweepRow {
    n_hat: usize,
    restart: usize,
    seed: u64,
    modularity: f64,
    n_communities: usize,
    iterations: usize,
    converged: bool,
}

impl From<&SweepEntry> for SweepRow {
    fn from(e: &SweepEntry) -> Self {
        SweepRow {
            n_hat: e.n_hat,
            restart: e.restart,
            seed: e.seed,
            modularity: e.modularity,
            n_communities: e.n_communities,
            iterations: e.iterations,
            converged: e.converged,
        }
    }
}

#[derive(Serialize)]
struct RunReport {
    config: ConfigEcho,
    n_nodes: usize,
    n_edges: usize,
    unassigned_nodes: usize,
    partition_file: PathBuf,
    metrics: MetricsRecord,
    community_sizes: BTreeMap<usize, usize>,
    q_trace: Vec<f64>,
    iterations: Vec<usize>,
    sweep: Option<Vec<SweepRow>>,
    qtable_file: Option<PathBuf>,
    eig_cache_hit: bool,
    timings: Timings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Graph restricted to nodes with positive strength, and the kept node ids.
fn strip_isolated(g: &Graph) -> (Graph, Vec<usize>) {
    let keep: Vec<usize> = (0..g.n_nodes()).filter(|&i| g.strength(i) > 0.0).collect();
    if keep.len() == g.n_nodes() {
        return (g.clone(), keep);
    }
    warn!(
        "{} isolated node(s) left unassigned",
        g.n_nodes() - keep.len()
    );
    (g.induced_subgraph(&keep), keep)
}

fn eigenbasis(g: &Graph, n_eig: usize) -> Result<(EigenBasis, bool)> {
    let opts = EigenOptions::default();
    match std::env::var_os(eigen::CACHE_ENV) {
        Some(dir) => Ok(eigen::load_or_compute(Path::new(&dir), g, n_eig, &opts)?),
        None => Ok((eigen::smallest_eigenpairs_with(&g.laplacian(), n_eig, &opts)?, false)),
    }
}

fn detect(args: DetectArgs) -> Result<()> {
    let total = Instant::now();
    let full = io::read_edge_list(&args.graph)?;
    let (g, keep) = strip_isolated(&full);
    if g.n_nodes() == 0 {
        bail!("{}: graph has no edges", args.graph.display());
    }
    let mut local = vec![usize::MAX; full.n_nodes()];
    for (a, &i) in keep.iter().enumerate() {
        local[i] = a;
    }
    let known = match &args.known_labels {
        Some(path) => {
            let mut map = BTreeMap::new();
            for (node, label) in io::read_known_labels(path)? {
                match local.get(node) {
                    Some(&a) if a != usize::MAX => {
                        map.insert(a, label);
                    }
                    Some(_) => warn!("known label for isolated node {node} ignored"),
                    None => bail!("{}: node {node} is not in the graph", path.display()),
                }
            }
            Some(map)
        }
        None => None,
    };
    let truth = args
        .truth
        .as_ref()
        .map(|p| io::read_labels(p, Some(full.n_nodes())))
        .transpose()?;

    let requested = args.neig.unwrap_or_else(|| default_n_eig(g.n_nodes()));
    let n_eig = if requested > g.n_nodes() {
        warn!("--neig {requested} exceeds {} clustered nodes; using {}", g.n_nodes(), g.n_nodes());
        g.n_nodes()
    } else {
        requested
    };
    let base = MboConfig {
        gamma: args.gamma,
        n_hat: args.nhat.unwrap_or(2),
        eta: args.eta,
        dt: args.dt,
        n_eig,
        max_iter: args.max_iter,
        seed: args.seed,
        known_labels: known,
    };
    match args.scheme {
        Scheme::Mbo if args.nrange.is_some() => bail!("--nrange applies to --scheme multi"),
        Scheme::Multi if args.nhat.is_some() => bail!("--nhat applies to --scheme mbo; use --nrange"),
        _ => {}
    }

    let t = Instant::now();
    let (basis, cache_hit) = eigenbasis(&g, n_eig)?;
    let eigensolve_ms = ms(t);
    info!("eigensolve: {n_eig} pairs in {eigensolve_ms:.0} ms (cache hit: {cache_hit})");

    let t = Instant::now();
    let (local_partition, q_trace, iterations, sweep) = match args.scheme {
        Scheme::Mbo => {
            let run = run_mbo(&g, &basis, &base)?;
            (run.partition, run.q_trace, vec![run.iterations], None)
        }
        Scheme::Rmm => {
            let config = SchemeConfig {
                base,
                restarts: args.restarts,
                ..SchemeConfig::default()
            };
            let run = run_rmm_with_basis(&g, &basis, &config)?;
            let counts = run.iteration_counts();
            (run.partition, run.first_pass.q_trace, counts, None)
        }
        Scheme::Multi => {
            let config = SchemeConfig {
                base,
                restarts: args.restarts,
                multi_n_range: args.nrange.clone().unwrap_or(2..=10),
                ..SchemeConfig::default()
            };
            let run = run_multi_n(&g, &basis, &config)?;
            let counts = run.table.iter().map(|e| e.iterations).collect();
            (run.partition, run.q_trace, counts, Some(run.table))
        }
    };
    let mbo_ms = ms(t);
    info!(
        "outer iterations: {:?} (max {})",
        iterations,
        iterations.iter().max().unwrap_or(&0)
    );

    let mut labels = vec![Partition::UNASSIGNED; full.n_nodes()];
    for (a, &i) in keep.iter().enumerate() {
        labels[i] = local_partition.labels()[a];
    }
    let partition = Partition::new(labels);
    let q = modularity(&full, &partition, args.gamma)?;
    let (nmi_v, purity_v) = match &truth {
        Some(t) => (Some(nmi(&partition, t)?), Some(purity(&partition, t)?)),
        None => (None, None),
    };

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let partition_file = args.out.join("partition.csv");
    io::write_partition(&partition, &partition_file)?;
    let qtable_file = match &sweep {
        Some(table) => {
            let path = args.out.join("qtable.csv");
            let mut text = String::from("n_hat,restart,seed,modularity,n_communities,iterations,converged\n");
            for e in table {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    e.n_hat, e.restart, e.seed, e.modularity, e.n_communities, e.iterations, e.converged
                ));
            }
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            Some(path)
        }
        None => None,
    };
    let report = RunReport {
        config: ConfigEcho {
            graph: args.graph.clone(),
            scheme: args.scheme,
            gamma: args.gamma,
            nhat: args.nhat,
            nrange: args.nrange.as_ref().map(|r| [*r.start(), *r.end()]),
            neig: n_eig,
            eta: args.eta,
            dt: args.dt,
            max_iter: args.max_iter,
            seed: args.seed,
            restarts: args.restarts,
            known_labels: args.known_labels.clone(),
            truth: args.truth.clone(),
        },
        n_nodes: full.n_nodes(),
        n_edges: full.n_edges(),
        unassigned_nodes: full.n_nodes() - keep.len(),
        partition_file,
        metrics: MetricsRecord {
            nmi: nmi_v,
            purity: purity_v,
            modularity: q,
            n_communities: partition.n_communities(),
            runtime_ms: ms(total),
        },
        community_sizes: partition.size_histogram(),
        q_trace,
        iterations,
        sweep: sweep.as_ref().map(|t| t.iter().map(SweepRow::from).collect()),
        qtable_file,
        eig_cache_hit: cache_hit,
        timings: Timings {
            eigensolve_ms,
            mbo_ms,
            total_ms: ms(total),
        },
    };
    let path = args.out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "Q = {q:.6}, {} communities; wrote {}",
        partition.n_communities(),
        args.out.display()
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let parts: Vec<&str> = args.planted.split(',').map(str::trim).collect();
    let [n, blocks, p_in, p_out] = parts.as_slice() else {
        bail!("--planted expects N,BLOCKS,PIN,POUT, got {:?}", args.planted);
    };
    let spec = PlantedPartitionSpec {
        n_nodes: n.parse().context("N")?,
        n_blocks: blocks.parse().context("BLOCKS")?,
        p_in: p_in.parse().context("PIN")?,
        p_out: p_out.parse().context("POUT")?,
        seed: args.seed,
    };
    let (g, truth) = planted_partition(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    io::write_edge_list(&g, &args.out.join("graph.txt"))?;
    io::write_partition(&truth, &args.out.join("truth.csv"))?;
    println!(
        "{} nodes, {} edges; wrote {}",
        g.n_nodes(),
        g.n_edges(),
        args.out.display()
    );
    Ok(())
}

fn knn(args: KnnArgs) -> Result<()> {
    let x = io::read_features(&args.features)?;
    let g = knn_graph(&x, args.k)?;
    io::write_edge_list(&g, &args.out)?;
    println!("{} nodes, {} edges; wrote {}", g.n_nodes(), g.n_edges(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    nmi: Option<f64>,
    purity: Option<f64>,
    modularity: f64,
    n_communities: usize,
}

fn eval(args: EvalArgs) -> Result<()> {
    let g = io::read_edge_list(&args.graph)?;
    let p = io::read_labels(&args.partition, Some(g.n_nodes()))?;
    let (nmi_v, purity_v) = match &args.truth {
        Some(path) => {
            let t = io::read_labels(path, Some(g.n_nodes()))?;
            (Some(nmi(&p, &t)?), Some(purity(&p, &t)?))
        }
        None => (None, None),
    };
    let report = EvalReport {
        nmi: nmi_v,
        purity: purity_v,
        modularity: modularity(&g, &p, args.gamma)?,
        n_communities: p.n_communities(),
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Detect(a) => detect(a),
        Command::Generate(a) => generate(a),
        Command::Knn(a) => knn(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
