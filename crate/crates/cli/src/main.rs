//! Command-line runner for coflow scheduling experiments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::error;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use coflow_core::netgraph::fat_tree;
use coflow_core::sim::{
    prepare_offline, run_offline_on, run_online, summarize, write_csv, Algorithm, MetricsRecord, OfflineConfig,
    OnlineConfig,
};
use coflow_core::verify;

#[derive(Parser)]
#[command(name = "coflow", version, about = "Coflow routing and scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a FatTree as JSON.
    Topo(TopoArgs),
    /// One coflow per seed on a FatTree with static noise.
    Offline(RunArgs),
    /// Coflows arriving over time, competing with noise.
    Online(RunArgs),
    /// Offline (or online) runs over a grid of one parameter, e.g. `n_flows=10..100:10`.
    Sweep {
        grid: String,
        /// Sweep the online simulation instead.
        #[arg(long)]
        online: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the oracle suites and print one line per suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML or JSON file with configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set k=8` or `--set noise.rate_max=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TopoArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `1..20`, `3,5,8` or a single seed. Defaults to 20 seeds offline and 10 online.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated algorithms; defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print mean and standard deviation per algorithm to stderr.
    #[arg(long)]
    summary: bool,
    /// Fill the runtime column. Output is then no longer reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopoConfig {
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_alpha")]
    alpha_over: usize,
    #[serde(default = "default_capacity")]
    link_capacity: f64,
}

fn default_k() -> usize {
    4
}
fn default_alpha() -> usize {
    2
}
fn default_capacity() -> f64 {
    10.0
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every run succeeded.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Topo(args) => {
            let cfg: TopoConfig = load_config(&args.config, &[])?;
            let net = fat_tree(cfg.k, cfg.alpha_over, cfg.link_capacity)?;
            emit(args.out.as_deref(), format!("{}\n", net.to_json()).as_bytes())?;
            Ok(true)
        }
        Command::Offline(args) => {
            let cfg: OfflineConfig = load_config(&args.config, &[])?;
            let (rows, ok) = offline_rows(&cfg, &args)?;
            finish(&rows, &args)?;
            Ok(ok)
        }
        Command::Online(args) => {
            let cfg: OnlineConfig = load_config(&args.config, &[])?;
            let (rows, ok) = online_rows(&cfg, &args)?;
            finish(&rows, &args)?;
            Ok(ok)
        }
        Command::Sweep { grid, online, run } => {
            let (key, values) = parse_grid(&grid)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for value in values {
                let extra = [(key.clone(), value)];
                let (mut part, part_ok) = if online {
                    online_rows(&load_config(&run.config, &extra)?, &run)?
                } else {
                    offline_rows(&load_config(&run.config, &extra)?, &run)?
                };
                rows.append(&mut part);
                ok &= part_ok;
            }
            finish(&rows, &run)?;
            Ok(ok)
        }
        Command::Verify { seed } => {
            let reports = verify::run_all(seed);
            for r in &reports {
                println!("{r}");
            }
            Ok(reports.iter().all(|r| r.passed()))
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().lock().write_all(bytes)?),
    }
}

fn finish(rows: &[MetricsRecord], args: &RunArgs) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf, args.timing)?;
    emit(args.out.as_deref(), &buf)?;
    if args.summary {
        for s in summarize(rows) {
            eprintln!("{s}");
        }
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn algorithms(args: &RunArgs, configured: Algorithm) -> Vec<Algorithm> {
    let mut algos = if args.algo.is_empty() {
        vec![configured]
    } else {
        args.algo.clone()
    };
    algos.sort();
    algos.dedup();
    algos
}

/// Rows for every (seed, algorithm); failed runs are logged and left out.
fn offline_rows(cfg: &OfflineConfig, args: &RunArgs) -> Result<(Vec<MetricsRecord>, bool)> {
    cfg.validate()?;
    let seeds = parse_seeds(args.seeds.as_deref().unwrap_or("1..20"))?;
    let algos = algorithms(args, cfg.algorithm);
    let results: Vec<Vec<Result<MetricsRecord, String>>> = pool(args.jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = OfflineConfig { seed, ..cfg.clone() };
                match prepare_offline(&cfg) {
                    Ok(inst) => algos
                        .iter()
                        .map(|&algo| {
                            run_offline_on(&inst, &cfg, algo)
                                .map(|r| r.record)
                                .map_err(|e| format!("seed {seed}, {algo}: {e}"))
                        })
                        .collect(),
                    Err(e) => vec![Err(format!("seed {seed}: {e}"))],
                }
            })
            .collect()
    });
    Ok(collect(results.into_iter().flatten()))
}

fn online_rows(cfg: &OnlineConfig, args: &RunArgs) -> Result<(Vec<MetricsRecord>, bool)> {
    cfg.validate()?;
    let seeds = parse_seeds(args.seeds.as_deref().unwrap_or("1..10"))?;
    let algos = algorithms(args, cfg.algorithm);
    let jobs: Vec<(u64, Algorithm)> = seeds
        .iter()
        .flat_map(|&s| algos.iter().map(move |&a| (s, a)))
        .collect();
    let results: Vec<Result<MetricsRecord, String>> = pool(args.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(seed, algorithm)| {
                let cfg = OnlineConfig {
                    seed,
                    algorithm,
                    ..cfg.clone()
                };
                run_online(&cfg)
                    .map(|r| r.record)
                    .map_err(|e| format!("seed {seed}, {algorithm}: {e}"))
            })
            .collect()
    });
    Ok(collect(results))
}

fn collect(results: impl IntoIterator<Item = Result<MetricsRecord, String>>) -> (Vec<MetricsRecord>, bool) {
    let mut ok = true;
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                error!("{e}");
                ok = false;
            }
        }
    }
    rows.sort_by_key(|r| (r.seed, r.algo));
    (rows, ok)
}

/// `a..b` (inclusive), a comma-separated list, or one seed.
fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty seed range {text}");
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("invalid seed list {text}"))?
    };
    Ok(seeds)
}

/// `key=start..end:step` (inclusive, numeric) or `key=a,b,c`.
fn parse_grid(text: &str) -> Result<(String, Vec<String>)> {
    let (key, rhs) = text
        .split_once('=')
        .with_context(|| format!("grid must look like key=10..100:10, got {text}"))?;
    let values = if let Some((range, step)) = rhs.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .with_context(|| format!("invalid range {range}"))?;
        let (a, b, step): (i64, i64, i64) = (a.parse()?, b.parse()?, step.parse()?);
        if step <= 0 || a > b {
            bail!("invalid grid {rhs}");
        }
        (a..=b).step_by(step as usize).map(|v| v.to_string()).collect()
    } else {
        rhs.split(',').map(str::to_string).collect()
    };
    Ok((key.to_string(), values))
}

/// Reads the config file, applies `--set` overrides and then `extra`, and
/// deserializes. Unknown keys are errors that name the key.
fn load_config<T: DeserializeOwned>(args: &ConfigArgs, extra: &[(String, String)]) -> Result<T> {
    let mut root = match &args.config {
        Some(path) => read_config_file(path)?,
        None => Value::Object(Map::new()),
    };
    for raw in &args.overrides {
        let (key, value) = raw
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got {raw}"))?;
        set_key(&mut root, key.trim(), parse_value(value.trim()))?;
    }
    for (key, value) in extra {
        set_key(&mut root, key, parse_value(value))?;
    }
    serde_json::from_value(root).context("invalid configuration")
}

fn read_config_file(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(table)?
    };
    if !value.is_object() {
        bail!("{} must hold a table of keys", path.display());
    }
    Ok(value)
}

/// Numbers, booleans and quoted strings are read as TOML; anything else is
/// taken as a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_key(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let map = node
            .as_object_mut()
            .with_context(|| format!("{key}: {part} is not a table"))?;
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .with_context(|| format!("{key} does not name a table entry"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
