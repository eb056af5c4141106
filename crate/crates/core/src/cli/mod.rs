//! The `ubayfs` command line: `select`, `bench` and `synth`.
//!
//! Exit codes: 0 on success, 1 for configuration and usage errors, 2 when a
//! valid configuration fails at run time.

mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{CsvInput, InputConfig, NamedTerm, Prepared, PriorConfig, RunConfig, SyntheticSpec, TruthFile};

use crate::data::{write_csv, BlockSpec, Dataset};
use crate::evaluation::{benchmark, EvaluationReport};
use crate::optimizer::select_features;
use crate::prior::{EstimateMethod, MhDiagnostics, PosteriorModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Invalid configuration or usage; exit code 1.
    Config(String),
    /// Failure while running a valid configuration; exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ubayfs", version, about = "User-guided Bayesian ensemble feature selection")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select features once on the full input.
    Select(RunArgs),
    /// Repeat selection on stratified splits and report F1, stability and
    /// redundancy.
    Bench(RunArgs),
    /// Write a synthetic dataset as CSV plus truth (and block) sidecars.
    Synth(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON configuration (for `synth`: a generator spec).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; reports go to stdout when omitted (required for `synth`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ubayfs: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // A global pool can only be installed once per process; later calls
        // keep the first setting.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    RunConfig::from_file(&args.config)?.prepare(args.seed, &config_dir(&args.config))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(runtime)?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(runtime),
    }
}

/// `report.json` -> `report.<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

#[derive(Debug, Serialize)]
struct Admissibility {
    constraint: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct SelectReport<'a> {
    config: &'a RunConfig,
    seed: u64,
    n_samples: usize,
    n_features: usize,
    selected_indices: Vec<usize>,
    selected_names: Vec<String>,
    counts: &'a [u32],
    posterior: &'a PosteriorModel,
    theta_hat: &'a [f64],
    estimate_method: EstimateMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    mh: Option<&'a MhDiagnostics>,
    utility: f64,
    risk: f64,
    kappa: f64,
    admissibilities: Vec<Admissibility>,
    ga_trace: &'a [f64],
    runtime_seconds: f64,
}

fn names(d: &Dataset, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| d.feature_names()[i].clone()).collect()
}

fn cmd_select(args: &RunArgs) -> Result<(), CliError> {
    let p = prepare(args)?;
    let start = Instant::now();
    let sel = select_features(&p.dataset, &p.pipeline, &p.system, p.config.seed).map_err(runtime)?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    let idx = sel.selected.indices();
    let admissibilities = p
        .system
        .constraints()
        .iter()
        .zip(p.system.admissibilities(&sel.selected))
        .map(|(c, value)| Admissibility {
            constraint: c.label(),
            value,
        })
        .collect();
    let report = SelectReport {
        config: &p.config,
        seed: p.config.seed,
        n_samples: p.dataset.n_samples(),
        n_features: p.dataset.n_features(),
        selected_names: names(&p.dataset, &idx),
        selected_indices: idx,
        counts: &sel.counts.counts,
        posterior: &sel.posterior,
        theta_hat: &sel.importance.theta,
        estimate_method: sel.importance.method,
        mh: sel.importance.mh.as_ref(),
        utility: sel.utility,
        risk: sel.risk,
        kappa: sel.kappa,
        admissibilities,
        ga_trace: &sel.ga_trace,
        runtime_seconds,
    };
    emit(args.out.as_deref(), &to_json(&report)?)
}

#[derive(Debug, Serialize)]
struct BenchReport<'a> {
    config: &'a RunConfig,
    seed: u64,
    n_samples: usize,
    n_features: usize,
    feature_names: &'a [String],
    report: serde_json::Value,
}

#[derive(Debug, Serialize)]
struct Timing {
    runtime_seconds: Vec<f64>,
    mean_runtime_seconds: f64,
}

/// The JSON report leaves out wall-clock times so that equal seeds give
/// byte-identical files; times go to the `.timing.json` sidecar.
fn deterministic_view(r: &EvaluationReport) -> Result<serde_json::Value, CliError> {
    let mut v = serde_json::to_value(r).map_err(runtime)?;
    if let Some(runs) = v["runs"].as_array_mut() {
        for run in runs {
            if let Some(o) = run.as_object_mut() {
                o.remove("runtime_seconds");
            }
        }
    }
    if let Some(o) = v["aggregates"].as_object_mut() {
        o.remove("mean_runtime_seconds");
    }
    Ok(v)
}

fn runs_csv(r: &EvaluationReport, d: &Dataset) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "n_selected", "selected", "feature_f1", "redundancy", "utility", "kappa"])
        .map_err(runtime)?;
    for run in &r.runs {
        w.write_record([
            run.run.to_string(),
            run.selected.len().to_string(),
            names(d, &run.selected).join(";"),
            run.feature_f1.map(|f| f.to_string()).unwrap_or_default(),
            run.redundancy.to_string(),
            run.utility.to_string(),
            run.kappa.to_string(),
        ])
        .map_err(runtime)?;
    }
    String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
}

fn cmd_bench(args: &RunArgs) -> Result<(), CliError> {
    let p = prepare(args)?;
    let r = benchmark(
        &p.dataset,
        p.truth.as_ref(),
        &p.pipeline,
        &p.config.constraints,
        &p.config.evaluation,
        p.config.seed,
    )
    .map_err(runtime)?;
    let report = BenchReport {
        config: &p.config,
        seed: p.config.seed,
        n_samples: p.dataset.n_samples(),
        n_features: p.dataset.n_features(),
        feature_names: p.dataset.feature_names(),
        report: deterministic_view(&r)?,
    };
    emit(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(out) = &args.out {
        write_text(&sibling(out, "runs.csv"), &runs_csv(&r, &p.dataset)?)?;
        let timing = Timing {
            runtime_seconds: r.runs.iter().map(|x| x.runtime_seconds).collect(),
            mean_runtime_seconds: r.aggregates.mean_runtime_seconds,
        };
        write_text(&sibling(out, "timing.json"), &to_json(&timing)?)?;
    }
    Ok(())
}

fn cmd_synth(args: &RunArgs) -> Result<(), CliError> {
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config("synth requires --out".into()))?;
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid generator spec: {e}")))?;
    let s = spec
        .generate(args.seed.unwrap_or(0))
        .map_err(|e| CliError::Config(format!("invalid generator spec: {e}")))?;
    let d = &s.dataset;
    write_csv(d, out).map_err(runtime)?;
    let relevant: Vec<usize> = s.truth.relevant().iter().copied().collect();
    let truth = TruthFile {
        relevant_names: names(d, &relevant),
        relevant,
    };
    write_text(&sibling(out, "truth.json"), &to_json(&truth)?)?;
    if let Some(bm) = d.block_matrix() {
        let blocks: BlockSpec = (0..bm.n_blocks())
            .map(|w| (bm.names()[w].clone(), names(d, bm.members(w))))
            .collect();
        write_text(&sibling(out, "blocks.json"), &to_json(&blocks)?)?;
    }
    Ok(())
}
