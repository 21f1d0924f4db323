//! Command-line tools: dataset generation, benchmarks, and the server.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use protokb::bench::{self, DatasetSpec};
use protokb::engine::KbBuilder;
use protokb::model::{ChainedKb, EmptyKb, KnowledgeBase, PredefinedKb, PrototypeId};
use protokb::server::{serve, ServerConfig};
use protokb::wire;

#[derive(Parser)]
#[command(name = "protokb", version, about = "Prototype knowledge base tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (newline-delimited canonical JSON).
    Gen(GenArgs),
    /// Run benchmarks and print a JSON report to standard output.
    Bench {
        #[command(subcommand)]
        bench: BenchCommand,
    },
    /// Serve a dataset over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct FamilyArgs {
    /// Dataset family: baseline | blocks | incremental.
    #[arg(long)]
    family: String,
    /// Size parameter: n for baseline, B,blockSize for blocks, M for
    /// incremental.
    #[arg(long)]
    param: String,
}

impl FamilyArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        let parts: Vec<&str> = self.param.split(',').collect();
        let number = |s: &str| -> Result<u64> {
            s.trim()
                .parse::<u64>()
                .with_context(|| format!("not a number: {s:?}"))
        };
        Ok(match self.family.as_str() {
            "baseline" => {
                let [n] = parts.as_slice() else {
                    bail!("baseline takes one parameter: --param <n>");
                };
                DatasetSpec::Baseline { n: number(n)? as u32 }
            }
            "blocks" => {
                let [blocks, block_size] = parts.as_slice() else {
                    bail!("blocks takes two parameters: --param <B>,<blockSize>");
                };
                DatasetSpec::Blocks {
                    blocks: number(blocks)? as u32,
                    block_size: number(block_size)? as u32,
                }
            }
            "incremental" => {
                let [count] = parts.as_slice() else {
                    bail!("incremental takes one parameter: --param <M>");
                };
                DatasetSpec::Incremental { count: number(count)? }
            }
            other => bail!("unknown family {other:?} (expected baseline, blocks or incremental)"),
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file for the definitions, one JSON object per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Time the consistency check and whole-interpretation computation.
    Local(BenchLocalArgs),
    /// Fetch random fixpoints from a running server and time each amount.
    Remote(BenchRemoteArgs),
}

#[derive(Args)]
struct BenchLocalArgs {
    /// Benchmark a dataset file instead of generating one.
    #[arg(long, conflicts_with_all = ["family", "param"])]
    dataset: Option<PathBuf>,
    #[arg(long, required_unless_present = "dataset")]
    family: Option<String>,
    #[arg(long, required_unless_present = "dataset")]
    param: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchRemoteArgs {
    /// Base URL of the server, e.g. http://127.0.0.1:8080
    #[arg(long)]
    url: String,
    /// Comma-separated request amounts, e.g. 1000,2000,3000
    #[arg(long)]
    amounts: String,
    #[arg(long, default_value_t = 100)]
    concurrency: usize,
    /// Seed for the random prototype selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw IDs from a dataset file...
    #[arg(long, conflicts_with_all = ["family", "param"])]
    dataset: Option<PathBuf>,
    /// ...or regenerate the ID universe from a family spec.
    #[arg(long, required_unless_present = "dataset")]
    family: Option<String>,
    #[arg(long, required_unless_present = "dataset")]
    param: Option<String>,
    /// Seed the family was generated with (must match the served data).
    #[arg(long, default_value_t = 0)]
    dataset_seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Dataset file with one canonical JSON definition per line.
    #[arg(long)]
    data: PathBuf,
    /// Cache-Control max-age advertised to clients, in seconds.
    #[arg(long, default_value_t = 3600)]
    max_age: u64,
    /// Materialize all fixpoints at startup.
    #[arg(long)]
    precompute_fixpoints: bool,
    /// JSON file mapping prototype IRIs to alternate provider URLs.
    #[arg(long)]
    alternates: Option<PathBuf>,
    /// Artificial per-request delay in milliseconds (latency simulation).
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => generate(args),
        Command::Bench { bench: BenchCommand::Local(args) } => bench_local(args),
        Command::Bench { bench: BenchCommand::Remote(args) } => bench_remote(args),
        Command::Serve(args) => run_server(args),
    }
}

fn generate(args: GenArgs) -> Result<()> {
    let spec = args.family.spec()?;
    let dataset = spec.generate(args.seed);
    let file = File::create(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    for def in &dataset.definitions {
        out.write_all(&wire::encode_definition(def))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    eprintln!(
        "wrote {} definitions ({spec}, seed {}) to {}",
        dataset.definitions.len(),
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn read_definition_lines(path: &Path) -> Result<Vec<Vec<u8>>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut lines = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push((number, line.into_bytes()));
    }
    Ok(lines.into_iter().map(|(_, l)| l).collect())
}

fn decode_dataset(path: &Path) -> Result<Vec<protokb::model::PrototypeDefinition>> {
    read_definition_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            wire::decode_definition(line)
                .with_context(|| format!("{}: line {}", path.display(), i + 1))
        })
        .collect()
}

fn bench_local(args: BenchLocalArgs) -> Result<()> {
    let report = match args.dataset {
        Some(path) => bench::run_local_bench_on_definitions(decode_dataset(&path)?)?,
        None => {
            let family = FamilyArgs {
                family: args.family.expect("enforced by clap"),
                param: args.param.expect("enforced by clap"),
            };
            bench::run_local_bench(family.spec()?, args.seed)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn bench_remote(args: BenchRemoteArgs) -> Result<()> {
    let amounts: Vec<usize> = args
        .amounts
        .split(',')
        .map(|a| a.trim().parse::<usize>().with_context(|| format!("bad amount {a:?}")))
        .collect::<Result<_>>()?;

    let (spec, universe): (Option<DatasetSpec>, Vec<PrototypeId>) = match &args.dataset {
        Some(path) => (
            None,
            decode_dataset(path)?.into_iter().map(|d| d.id).collect(),
        ),
        None => {
            let family = FamilyArgs {
                family: args.family.clone().expect("enforced by clap"),
                param: args.param.clone().expect("enforced by clap"),
            };
            let spec = family.spec()?;
            let ids = spec
                .generate(args.dataset_seed)
                .member_ids()
                .cloned()
                .collect();
            (Some(spec), ids)
        }
    };

    let runtime = tokio::runtime::Runtime::new()?;
    let remote = runtime.block_on(bench::run_remote_bench(
        &args.url,
        &universe,
        &amounts,
        args.concurrency,
        args.seed,
    ))?;

    let report = bench::BenchReport {
        spec,
        seed: Some(args.seed),
        prototype_count: universe.len() as u64,
        consistency_millis: None,
        fixpoint_millis: None,
        mean_props_per_fixpoint: None,
        stdev_props_per_fixpoint: None,
        remote: Some(remote),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_server(args: ServeArgs) -> Result<()> {
    let basis: Arc<dyn KnowledgeBase> = Arc::new(ChainedKb::new(vec![
        Arc::new(EmptyKb),
        Arc::new(PredefinedKb::standard()),
    ]));
    let mut builder = KbBuilder::new(basis);
    for line in read_definition_lines(&args.data)? {
        builder = builder.insert_document(&line)?;
    }
    let kb = match builder.build() {
        Ok(kb) => kb,
        Err(err) => bail!("refusing to serve: {err}"),
    };
    eprintln!("loaded {} definitions from {}", kb.layer_len(), args.data.display());

    let alternates: HashMap<PrototypeId, Vec<String>> = match &args.alternates {
        Some(path) => {
            let file = File::open(path)
                .with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("bad alternates file {}", path.display()))?
        }
        None => HashMap::new(),
    };

    let config = ServerConfig {
        bind: args.bind,
        cache_max_age_seconds: args.max_age,
        alternates,
        precompute_fixpoints: args.precompute_fixpoints,
        handler_delay: Duration::from_millis(args.delay_ms),
    };

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let handle = serve(Arc::new(kb), config).await?;
        eprintln!("serving on {}", handle.url());
        tokio::signal::ctrl_c().await.ok();
        eprintln!("shutting down");
        handle.shutdown().await;
        Ok(())
    })
}
