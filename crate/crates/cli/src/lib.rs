//! Scenario runner: loads a JSON config, executes it against `moment-core`
//! and writes a deterministic JSON report plus optional CSV tables.
//!
//! Exit codes: 0 when every assertion passes, 1 on an assertion failure,
//! 2 on a config or IO error, 3 on a numerical error.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod construct;
pub mod scenarios;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use config::{diagnose, ScenarioConfig, ScenarioKind};
use moment_core::tolerances;
use scenarios::{execute, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "MOMENTS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] moment_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ScenarioKind,
    pub passed: bool,
    pub failures: Vec<String>,
    pub report_path: PathBuf,
    pub report: Value,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Tolerances recorded in every report.
pub fn tolerance_table() -> Value {
    json!({
        "psd": tolerances::PSD_TOL,
        "symmetry": tolerances::SYMMETRY_TOL,
        "trace_agreement": tolerances::TRACE_AGREEMENT,
        "inequality_slack": tolerances::INEQUALITY_SLACK,
        "flat_rank": tolerances::FLAT_RANK_TOL,
        "negative_weight": tolerances::NEGATIVE_WEIGHT_TOL,
        "max_condition": tolerances::MAX_CONDITION,
        "moment_match": tolerances::MOMENT_MATCH_TOL,
        "mc_sigmas": tolerances::MC_SIGMAS,
    })
}

/// The report body for `cfg`; identical inputs give identical values.
pub fn build_report(cfg: &ScenarioConfig) -> Result<(Value, Vec<String>, Vec<Table>), CliError> {
    let outcome = execute(cfg)?;
    let report = json!({
        "kind": cfg.kind.name(),
        "version": VERSION,
        "seed": cfg.seed,
        "tolerances": tolerance_table(),
        "passed": outcome.passed,
        "failures": outcome.failures,
        "result": outcome.result,
    });
    Ok((report, outcome.failures, outcome.tables))
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(&table.headers).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    io(path, w.flush())
}

#[derive(Serialize)]
struct Meta<'a> {
    config: &'a str,
    started_unix_ms: u128,
    elapsed_ms: u128,
    threads: usize,
    version: &'a str,
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Thread count from the explicit option, then the environment.
pub fn resolve_threads(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok())).filter(|&k| k > 0)
}

/// Loads, executes and writes `<stem>.report.json`, `<stem>.meta.json` and one
/// `<stem>.<table>.csv` per table into the output directory.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = ScenarioConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let threads = resolve_threads(opts.threads);
    let start = unix_ms();
    let clock = Instant::now();
    let (report, failures, tables) = match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| build_report(&cfg))?
        }
        None => build_report(&cfg)?,
    };
    let elapsed = clock.elapsed().as_millis();

    let out_dir = opts.out.clone().or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("."));
    io(&out_dir, std::fs::create_dir_all(&out_dir))?;
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or(cfg.kind.name()).to_string();
    let report_path = out_dir.join(format!("{stem}.report.json"));
    let text = serde_json::to_string_pretty(&report).expect("values serialize");
    io(&report_path, std::fs::write(&report_path, text + "\n"))?;
    let meta = Meta {
        config: config_path.to_str().unwrap_or_default(),
        started_unix_ms: start,
        elapsed_ms: elapsed,
        threads: threads.unwrap_or_else(rayon::current_num_threads),
        version: VERSION,
    };
    let meta_path = out_dir.join(format!("{stem}.meta.json"));
    io(&meta_path, std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("serializes") + "\n"))?;
    for t in &tables {
        write_table(&out_dir.join(format!("{stem}.{}.csv", t.name)), t)?;
    }
    Ok(RunSummary { kind: cfg.kind, passed: failures.is_empty(), failures, report_path, report })
}

/// Dry-run validation: every schema problem in the file, or empty if it is valid.
pub fn validate(config_path: &Path) -> Result<Vec<String>, CliError> {
    let text = io(config_path, std::fs::read_to_string(config_path))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(v) => Ok(diagnose(&v)),
        Err(e) => Ok(vec![format!("malformed JSON: {e}")]),
    }
}

/// One line per scenario kind with its parameters (`?` marks optional ones).
pub fn list_scenarios() -> Vec<String> {
    ScenarioKind::ALL
        .iter()
        .map(|k| format!("{:<18} {}  [{}]", k.name(), k.summary(), k.parameters().join(", ")))
        .collect()
}
