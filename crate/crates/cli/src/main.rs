//! `logicreg`: analyze a CSV dataset, benchmark a simulation scenario, or
//! sweep a scenario parameter.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use logicreg::config::ConfigFile;
use logicreg::gmjmcmc::{aggregate, run_chains, GmjmcmcConfig};
use logicreg::io::read_csv_file;
use logicreg::likelihood::RobustGConfig;
use logicreg::parallel::resolve_threads;
use logicreg::report::{curve_csv, detections_csv, metrics_csv, AnalysisReport, BenchReport};
use logicreg::score::DataContext;
use logicreg::simbench::{bench, sweep, sweep_engine_config, BenchConfig, Scenario, SweepAxis, SCENARIO_N};
use logicreg::{Family, PriorKind};

#[derive(Parser, Debug)]
#[command(name = "logicreg", version, about = "Bayesian logic regression with GMJMCMC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run chains on a CSV dataset and report detected trees.
    Analyze(AnalyzeArgs),
    /// Simulate replicates of a built-in scenario and score detections.
    Bench(BenchArgs),
    /// Power to detect scenario 5's four-way tree across a parameter grid.
    Sweep(SweepArgs),
    /// Print the built-in scenario definitions as JSON.
    Scenarios,
}

#[derive(Args, Debug)]
struct EngineArgs {
    /// Tuning preset: 1-6, RD1 or RD2.
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` tuning file; applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tuning override `KEY=VALUE`, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent chains per dataset.
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value = "jeffreys")]
    prior: PriorKind,
    /// Detection threshold on the aggregated inclusion probability.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Start from random trees instead of a data-driven first population.
    #[arg(long)]
    random_init: bool,
    #[arg(long, env = "LOGICREG_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    #[arg(long)]
    family: Family,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Scenario id, 1 to 6.
    #[arg(long)]
    scenario: u32,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Simulated sample size.
    #[arg(long, default_value_t = SCENARIO_N)]
    n: usize,
    /// Number of simulated covariates.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    axis: SweepAxis,
    /// Grid as `start:end:count` or a comma-separated list.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    #[arg(long, default_value_t = SCENARIO_N)]
    n: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

/// Error raised before any computation starts.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_engine(args: &EngineArgs, default_preset: &str, base: Option<GmjmcmcConfig>) -> Result<GmjmcmcConfig> {
    let mut cfg = match (&args.preset, base) {
        (Some(name), _) => GmjmcmcConfig::preset(name).ok_or_else(|| usage(format!("unknown preset {name:?}")))?,
        (None, Some(base)) => base,
        (None, None) => GmjmcmcConfig::preset(default_preset).expect("built-in preset"),
    };
    if let Some(path) = &args.config {
        ConfigFile::load(path)
            .and_then(|f| f.apply(&mut cfg))
            .map_err(|e| usage(e.to_string()))?;
    }
    // later --set flags win over earlier ones
    for pair in &args.set {
        ConfigFile::parse(pair)
            .and_then(|f| f.apply(&mut cfg))
            .map_err(|e| usage(format!("--set {pair}: {e}")))?;
    }
    cfg.chains = args.chains;
    cfg.seed = args.seed;
    cfg.random_init = args.random_init;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(usage(format!("threshold {} is not in (0, 1)", args.threshold)));
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

#[derive(Serialize)]
struct Timing {
    command: &'static str,
    threads: usize,
    wall_clock_seconds: f64,
}

fn write_timing(dir: &Path, command: &'static str, threads: usize, start: Instant) -> Result<()> {
    write_json(
        dir,
        "timing.json",
        &Timing {
            command,
            threads,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let cfg = resolve_engine(&args.engine, "RD2", None)?;
    let threads = resolve_threads(args.engine.threads);
    let start = Instant::now();
    let ingested = read_csv_file(&args.input, &args.response, args.family)?;
    let data = &ingested.data;
    if cfg.c_max > data.m() {
        log::warn!("C_max = {} exceeds the {} covariates", cfg.c_max, data.m());
    }
    prepare_out(&args.engine.out)?;
    let ctx = DataContext::new(data, args.engine.prior, RobustGConfig::default(), cfg.prior_cfg(data.m())?);
    let summaries = run_chains(&ctx, &cfg, threads)?;
    let agg = aggregate(&summaries)?;
    let report = AnalysisReport::new(
        data,
        ingested.dropped.clone(),
        &cfg,
        args.engine.prior,
        args.engine.threshold,
        &summaries,
        &agg,
    )?;
    for d in &report.detections {
        println!("{:.4}\t{}", d.probability, d.tree);
    }
    let out = &args.engine.out;
    write_json(out, "detections.json", &report)?;
    write(out, "detections.csv", &detections_csv(&report.detections))?;
    write_timing(out, "analyze", threads, start)
}

fn bench_config(engine: &EngineArgs, cfg: GmjmcmcConfig, n: usize, replicates: usize) -> Result<BenchConfig> {
    if replicates == 0 {
        return Err(usage("need at least one replicate"));
    }
    if n < 2 {
        return Err(usage("sample size must be at least 2"));
    }
    Ok(BenchConfig {
        n,
        replicates,
        prior: engine.prior,
        threshold: engine.threshold,
        seed: engine.seed,
        engine: cfg,
    })
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let mut scenario = Scenario::builtin(args.scenario).map_err(|e| usage(e.to_string()))?;
    if let Some(m) = args.m {
        scenario = scenario.with_m(m).map_err(|e| usage(e.to_string()))?;
    }
    let cfg = resolve_engine(&args.engine, &args.scenario.to_string(), None)?;
    let settings = bench_config(&args.engine, cfg, args.n, args.replicates)?;
    let threads = resolve_threads(args.engine.threads);
    let start = Instant::now();
    prepare_out(&args.engine.out)?;
    let (metrics, results) = bench(&scenario, &settings, threads)?;
    let csv = metrics_csv(&metrics, &scenario);
    print!("{csv}");
    let out = &args.engine.out;
    write_json(out, "metrics.json", &BenchReport::new(&scenario, &settings, metrics, &results))?;
    write(out, "metrics.csv", &csv)?;
    write_timing(out, "bench", threads, start)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("bad grid value {s:?}")))
    };
    let grid = if let [a, b, k] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, b) = (parse(a)?, parse(b)?);
        let k: usize = k.trim().parse().map_err(|_| usage(format!("bad grid count {k:?}")))?;
        match k {
            0 => bail!(usage("grid count must be positive")),
            1 => vec![a],
            _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
        }
    } else {
        text.split(',').map(parse).collect::<Result<Vec<_>>>()?
    };
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(usage("grid must be nondecreasing"));
    }
    Ok(grid)
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let cfg = resolve_engine(&args.engine, "5", Some(sweep_engine_config()))?;
    if args.axis == SweepAxis::D && grid.iter().any(|&d| d < cfg.k_max as f64) {
        return Err(usage(format!("population sizes below k_max = {} are not allowed", cfg.k_max)));
    }
    let settings = bench_config(&args.engine, cfg, args.n, args.replicates)?;
    let threads = resolve_threads(args.engine.threads);
    let start = Instant::now();
    prepare_out(&args.engine.out)?;
    let curve = sweep(args.axis, &grid, &settings, threads)?;
    let csv = curve_csv(args.axis, &curve);
    print!("{csv}");
    write(&args.engine.out, "curve.csv", &csv)?;
    write_timing(&args.engine.out, "sweep", threads, start)
}

fn scenarios() -> Result<()> {
    let all: Vec<Scenario> = (1..=6).map(Scenario::builtin).collect::<Result<_, _>>()?;
    println!("{}", serde_json::to_string_pretty(&all)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Bench(b) => run_bench(b),
        Command::Sweep(s) => run_sweep(s),
        Command::Scenarios => scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
