//! Command-line front end: `gen`, `run`, `sweep`, `verify` and `report`.
//!
//! Exit codes: 0 on success, 1 on a failed check or an I/O error, 2 on a
//! usage error. Diagnostics go to stderr; data goes to `--out` or stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::datagen::{gen_stream, DatasetKind, DatasetSpec, LabeledStream};
use crate::error::Error;
use crate::harness::{
    aggregate, default_grid, format_params, read_report_csv, run_laser_tuned, run_learner, sweep,
    write_bounds_csv, write_plot_script, write_report_csv, write_summary_csv, AlgoId, Params,
    RunOptions, RunReport, SweepSpec,
};
use crate::oracle::suite::{run_suite, Suite};
use crate::oracle::Regime;

/// Environment variable capping the worker pool; 0 means one per core.
pub const THREADS_ENV: &str = "DRIFTLEARN_THREADS";

const DESK_T: usize = 200;
const DESK_D: usize = 4;
const DESK_SEEDS: usize = 20;
const FULL_T: usize = 2000;
const FULL_D: usize = 20;
const FULL_SEEDS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "driftlearn", version, about = "Online regression under drift")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic stream and write it as CSV.
    Gen(GenArgs),
    /// Run learners over one or more streams and write the report CSV.
    Run(RunArgs),
    /// Grid-search one algorithm on a single tuning stream; writes JSON.
    Sweep(SweepArgs),
    /// Run the numerical property suites.
    Verify(VerifyArgs),
    /// Aggregate report CSVs into mean curves and a gnuplot script.
    Report(ReportArgs),
}

#[derive(Debug, Default, Args)]
struct DataArgs {
    /// Dataset kind: A, B, C or D.
    #[arg(long)]
    kind: Option<String>,
    /// Horizon (rounds per stream).
    #[arg(long = "T", alias = "horizon")]
    horizon: Option<usize>,
    /// Input dimension (at least 2).
    #[arg(long = "d", alias = "dim")]
    dim: Option<usize>,
    /// Rotation step of kinds A/C [default: 2π/T].
    #[arg(long)]
    omega: Option<f64>,
    /// Rounds between pair switches of kinds B/D [default: 50].
    #[arg(long)]
    switch_period: Option<usize>,
    /// Label-noise variance of kinds C/D [default: 0.05].
    #[arg(long)]
    noise_var: Option<f64>,
    /// Kinds B/D stay on the last pair instead of cycling.
    #[arg(long)]
    no_wrap: bool,
    /// Full-scale defaults: T=2000, d=20, 100 seeds.
    #[arg(long)]
    full: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
struct ParamArgs {
    #[arg(long)]
    b: Option<f64>,
    /// Drift penalty; `inf` gives the stationary learner.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Reset period; `inf` never resets.
    #[arg(long)]
    period: Option<f64>,
    /// Any parameter as `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Algorithm names, comma separated, or `all`.
    #[arg(long)]
    algo: Option<String>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Read the stream from this CSV instead of generating it.
    #[arg(long = "data", value_name = "CSV")]
    data_file: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Set LASER's c from the tuned bound: `low` or `high` drift.
    #[arg(long, value_name = "REGIME")]
    tuned: Option<String>,
    /// `b = tune_eps·c` for `--tuned` runs.
    #[arg(long, default_value_t = 0.01)]
    tune_eps: f64,
    /// JSON config; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the bound checks here.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Exit 1 if any bound check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    algo: Option<String>,
    /// Grid axis as `key=v1,v2,...`; repeatable. Unlisted keys use the
    /// default grid.
    #[arg(long, value_name = "KEY=V1,V2")]
    grid: Vec<String>,
    #[command(flatten)]
    data: DataArgs,
    /// Seed of the tuning stream.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Best-parameter JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// oracle, lemma3, lemma5, lemma6, lemma7, bounds or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report CSVs written by `run`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Summary CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a gnuplot script reading the summary CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, default_value = "mean cumulative loss")]
    title: String,
}

/// Contents of a `--config` file. Every field is optional; the output of
/// `sweep` is a valid config.
#[derive(Debug, Default, Deserialize)]
struct Config {
    algo: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, Value>,
    kind: Option<String>,
    #[serde(rename = "T")]
    horizon: Option<usize>,
    #[serde(rename = "d")]
    dim: Option<usize>,
    omega: Option<f64>,
    switch_period: Option<usize>,
    noise_var: Option<f64>,
    wrap: Option<bool>,
    seed: Option<u64>,
    seeds: Option<usize>,
    full: Option<bool>,
}

enum Failure {
    Usage(String),
    Fatal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fatal(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Fatal(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the CLI on `std::env::args` and returns the exit code.
pub fn main() -> i32 {
    run_with_args(std::env::args_os())
}

/// Runs the CLI on explicit arguments (the first is the program name).
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = init_threads().and_then(|()| match cli.cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
    });
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Fatal(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| usage(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`")))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn read_config(path: Option<&Path>) -> CliResult<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let file = File::open(path).map_err(|e| Failure::Fatal(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Fatal(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_value(s: &str) -> CliResult<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| usage(format!("`{s}` is not a number")))
}

fn json_value(key: &str, v: &Value) -> CliResult<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| usage(format!("param {key}: bad number"))),
        Value::String(s) => parse_value(s),
        _ => Err(usage(format!("param {key} must be a number or a string"))),
    }
}

/// Non-finite values are written as strings, which JSON numbers cannot hold.
fn value_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn dataset(data: &DataArgs, cfg: &Config, seed: u64) -> CliResult<DatasetSpec> {
    let full = data.full || cfg.full.unwrap_or(false);
    let kind: DatasetKind = data
        .kind
        .as_deref()
        .or(cfg.kind.as_deref())
        .unwrap_or("A")
        .parse()
        .map_err(usage)?;
    let horizon = data
        .horizon
        .or(cfg.horizon)
        .unwrap_or(if full { FULL_T } else { DESK_T });
    let dim = data.dim.or(cfg.dim).unwrap_or(if full { FULL_D } else { DESK_D });
    let mut spec = DatasetSpec::new(kind, horizon, dim, seed);
    if let Some(w) = data.omega.or(cfg.omega) {
        spec.omega = w;
    }
    if let Some(p) = data.switch_period.or(cfg.switch_period) {
        spec.switch_period = p;
    }
    if let Some(v) = data.noise_var.or(cfg.noise_var) {
        spec.noise_var = v;
    }
    spec.wrap = !data.no_wrap && cfg.wrap.unwrap_or(true);
    spec.validate().map_err(usage)?;
    Ok(spec)
}

fn seed_count(data: &DataArgs, flag: Option<usize>, cfg: &Config) -> usize {
    let full = data.full || cfg.full.unwrap_or(false);
    flag.or(cfg.seeds)
        .unwrap_or(if full { FULL_SEEDS } else { DESK_SEEDS })
}

fn parse_algos(s: &str) -> CliResult<Vec<AlgoId>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(AlgoId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in s.split(',') {
        let a: AlgoId = name.trim().parse().map_err(usage)?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

/// Config params first, then `--param`, then the named flags.
fn collect_params(p: &ParamArgs, cfg: &Config) -> CliResult<Params> {
    let mut out = Params::new();
    for (k, v) in &cfg.params {
        out.insert(k.clone(), json_value(k, v)?);
    }
    for kv in &p.extra {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects key=value, got `{kv}`")))?;
        out.insert(k.trim().to_string(), parse_value(v)?);
    }
    let named = [
        ("b", p.b),
        ("c", p.c),
        ("a", p.a),
        ("eta", p.eta),
        ("eps", p.eps),
        ("period", p.period),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            out.insert(k.to_string(), v);
        }
    }
    Ok(out)
}

/// With one algorithm every key must belong to it. With several, each key
/// goes to the algorithms that accept it and must be accepted by one.
fn split_params(algos: &[AlgoId], given: &Params) -> CliResult<Vec<(AlgoId, Params)>> {
    if let [a] = algos {
        return Ok(vec![(*a, a.resolve(given).map_err(usage)?)]);
    }
    let mut out = Vec::new();
    for &a in algos {
        let defaults = a.default_params();
        let mine: Params = given
            .iter()
            .filter(|(k, _)| defaults.contains_key(*k))
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        out.push((a, a.resolve(&mine).map_err(usage)?));
    }
    for k in given.keys() {
        if !algos.iter().any(|a| a.default_params().contains_key(k)) {
            return Err(usage(format!("no selected algorithm has parameter `{k}`")));
        }
    }
    Ok(out)
}

fn cmd_gen(a: GenArgs) -> CliResult<i32> {
    let spec = dataset(&a.data, &Config::default(), a.seed.unwrap_or(0))?;
    let stream = gen_stream(&spec)?;
    let mut out = open_out(a.out.as_deref())?;
    stream.write_csv(&mut out)?;
    out.flush()?;
    Ok(0)
}

fn cmd_run(a: RunArgs) -> CliResult<i32> {
    let cfg = read_config(a.config.as_deref())?;
    let algos = parse_algos(a.algo.as_deref().or(cfg.algo.as_deref()).unwrap_or("laser"))?;
    let given = collect_params(&a.params, &cfg)?;
    let base = a.seed.or(cfg.seed).unwrap_or(0);

    let tuned = match a.tuned.as_deref() {
        None => None,
        Some("low") => Some(Regime::LowDrift),
        Some("high") => Some(Regime::HighDrift),
        Some(other) => return Err(usage(format!("--tuned expects low or high, got `{other}`"))),
    };
    let jobs = if tuned.is_some() {
        if algos != [AlgoId::Laser] || !given.is_empty() {
            return Err(usage("--tuned sets LASER's parameters itself"));
        }
        Vec::new()
    } else {
        split_params(&algos, &given)?
    };

    // (seed, stream) pairs; a stream file is a single run labelled with the base seed.
    let streams: Vec<(u64, LabeledStream)> = match &a.data_file {
        Some(path) => {
            let f = File::open(path).map_err(|e| Failure::Fatal(format!("{}: {e}", path.display())))?;
            vec![(base, LabeledStream::read_csv(BufReader::new(f))?)]
        }
        None => {
            let n = seed_count(&a.data, a.seeds, &cfg);
            let template = dataset(&a.data, &cfg, base)?;
            (0..n as u64)
                .map(|k| {
                    let spec = DatasetSpec {
                        seed: base + k,
                        ..template.clone()
                    };
                    Ok((spec.seed, gen_stream(&spec)?))
                })
                .collect::<CliResult<_>>()?
        }
    };

    let mut reports: Vec<RunReport> = Vec::new();
    if let Some(regime) = tuned {
        for (seed, s) in &streams {
            let mut r = run_laser_tuned(regime, a.tune_eps, s).map_err(usage)?;
            r.seed = *seed;
            reports.push(r);
        }
    } else {
        for (algo, params) in &jobs {
            let runs: Vec<RunReport> = {
                use rayon::prelude::*;
                streams
                    .par_iter()
                    .map(|(seed, s)| {
                        let mut r = run_learner(*algo, params, s, RunOptions::default())?;
                        r.seed = *seed;
                        Ok(r)
                    })
                    .collect::<crate::Result<_>>()?
            };
            reports.extend(runs);
        }
    }

    let mut out = open_out(a.out.as_deref())?;
    write_report_csv(&reports, &mut out)?;
    out.flush()?;
    if let Some(path) = &a.bounds {
        let mut b = open_out(Some(path))?;
        write_bounds_csv(&reports, &mut b)?;
        b.flush()?;
    }

    let mut failed = 0usize;
    for r in &reports {
        eprintln!(
            "{} seed={} {} L_T={:.6e} regret_vs_truth={:.6e}",
            r.algo,
            r.seed,
            format_params(&r.params),
            r.cum_loss,
            r.regret_vs_truth
        );
        for c in r.violations() {
            failed += 1;
            eprintln!("  {c}");
        }
    }
    if failed > 0 {
        eprintln!("{failed} bound check(s) failed");
    }
    Ok(if a.strict && failed > 0 { 1 } else { 0 })
}

fn parse_grid(items: &[String]) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let mut grid = BTreeMap::new();
    for item in items {
        let (k, vs) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--grid expects key=v1,v2,..., got `{item}`")))?;
        let vals = vs.split(',').map(parse_value).collect::<CliResult<Vec<_>>>()?;
        grid.insert(k.trim().to_string(), vals);
    }
    Ok(grid)
}

fn cmd_sweep(a: SweepArgs) -> CliResult<i32> {
    let cfg = read_config(a.config.as_deref())?;
    let name = a.algo.as_deref().or(cfg.algo.as_deref()).unwrap_or("laser");
    let algo: AlgoId = name.parse().map_err(usage)?;
    let mut grid = default_grid(algo);
    for (k, v) in parse_grid(&a.grid)? {
        if !grid.contains_key(&k) {
            return Err(usage(format!("{algo} has no parameter `{k}`")));
        }
        grid.insert(k, v);
    }
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let ds = dataset(&a.data, &cfg, seed)?;
    let spec = SweepSpec {
        algo,
        grid,
        tuning_seed: seed,
    };
    let res = sweep(&spec, &ds)?;
    for (p, why) in &res.skipped {
        eprintln!("skipped {}: {why}", format_params(p));
    }
    eprintln!(
        "{algo}: best {} L_T={:.6e} ({} points, {} skipped)",
        format_params(&res.best),
        res.best_loss,
        res.evaluated.len(),
        res.skipped.len()
    );

    let params: Map<String, Value> = res
        .best
        .iter()
        .map(|(k, &v)| (k.clone(), value_json(v)))
        .collect();
    let doc = json!({
        "algo": algo.name(),
        "params": params,
        "cum_loss": value_json(res.best_loss),
        "kind": ds.kind.to_string(),
        "T": ds.horizon,
        "d": ds.dim,
        "seed": seed,
    });
    let mut out = open_out(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> CliResult<i32> {
    let suite: Suite = a.suite.parse().map_err(usage)?;
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let reports = run_suite(suite, a.trials, a.seed)?;
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        ok &= r.passed();
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_report(a: ReportArgs) -> CliResult<i32> {
    let mut reports = Vec::new();
    for path in &a.inputs {
        let f = File::open(path).map_err(|e| Failure::Fatal(format!("{}: {e}", path.display())))?;
        reports.extend(read_report_csv(BufReader::new(f))?);
    }
    let rows = aggregate(&reports)?;
    let mut out = open_out(a.out.as_deref())?;
    write_summary_csv(&rows, &mut out)?;
    out.flush()?;
    if let Some(plot) = &a.plot {
        let summary = a
            .out
            .as_deref()
            .map_or("summary.csv".to_string(), |p| p.display().to_string());
        let mut algos: Vec<AlgoId> = rows.iter().map(|r| r.algo).collect();
        algos.dedup();
        let mut w = open_out(Some(plot))?;
        write_plot_script(&summary, &algos, &a.title, &mut w)?;
        w.flush()?;
    }
    Ok(0)
}
