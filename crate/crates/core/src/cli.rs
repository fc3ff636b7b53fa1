//! `zipsel` command line: argument parsing, run manifests and the
//! subcommand drivers.
//!
//! Exit codes: 0 success, 1 usage, 2 input validation, 3 internal invariant
//! breach.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, Family, XAxis};
use crate::compressor::{self, Codec, CodecConfig, CodecError};
use crate::corpus::{BudgetSpec, CorpusError, Mode, Pool, RenderTemplate};
use crate::oracle::{self, OracleError, SynthSpec};
use crate::selector::{self, IterationRecord, SelectError, Selection, SelectorConfig, Spent};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Env var consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "ZIPSEL_THREADS";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            error: error.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::BadBudget(_) => Self::usage(e),
            _ => Self::input(e),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::EmptyInput => Self::input(e),
            _ => Self::usage(e),
        }
    }
}

impl From<SelectError> for CliError {
    fn from(e: SelectError) -> Self {
        match e {
            SelectError::Config(_) => Self::usage(e),
            SelectError::EmptyPool | SelectError::EmptyPayload { .. } => Self::input(e),
            SelectError::Codec(c) => c.into(),
            SelectError::PoolExhausted | SelectError::Invariant(_) => Self::internal(e),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Codec(c) => c.into(),
            OracleError::Corpus(c) => c.into(),
            OracleError::BadSpec(_) => Self::usage(e),
            OracleError::TooLarge { .. } | OracleError::BadK { .. } => Self::input(e),
        }
    }
}

impl From<analysis::AnalysisError> for CliError {
    fn from(e: analysis::AnalysisError) -> Self {
        Self::input(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "zipsel", version, about = "Compression-ratio driven data selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select a subset of a JSONL pool under a budget.
    Select(SelectArgs),
    /// Print the standalone compression ratio of every sample as CSV.
    Score(ScoreArgs),
    /// Length and ratio statistics for a selection manifest.
    Stats(StatsArgs),
    /// Fit trend curves and flag anomalous versions from a versions CSV.
    Analyze(AnalyzeArgs),
    /// Run selection over a grid of k1/k2/k3 values.
    Sweep(SweepArgs),
    /// Generate a synthetic pool with known duplicates.
    Synth(SynthArgs),
    /// Compare the greedy selection with exhaustive search on a tiny pool.
    Oracle(OracleArgs),
    /// Re-run a manifest against its input and check the ids match.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Zip,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Single,
    Pair,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Single => Mode::Single,
            ModeArg::Pair => Mode::Pair,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CodecArg {
    Deflate,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "single")]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    #[arg(long, value_enum, default_value = "deflate")]
    pub codec: CodecArg,
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// Only the trailing BYTES of the selected buffer serve as context.
    #[arg(long = "context-cap", value_name = "BYTES")]
    pub context_cap: Option<usize>,
}

impl CodecArgs {
    fn config(&self) -> Result<CodecConfig, CodecError> {
        let codec = match self.codec {
            CodecArg::Deflate => Codec::Deflate,
        };
        CodecConfig::new(codec, self.level, self.context_cap)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ThreadArgs {
    /// Worker threads (falls back to ZIPSEL_THREADS, then all cores).
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

impl ThreadArgs {
    fn resolve(&self) -> CliResult<usize> {
        match self.threads {
            Some(0) => Err(CliError::usage(anyhow::anyhow!("--threads must be >= 1"))),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "zip")]
    pub strategy: Strategy,
    /// UNIT:AMOUNT with UNIT in samples|bytes|tokens.
    #[arg(long)]
    pub budget: BudgetSpec,
    #[arg(long, default_value_t = selector::DEFAULT_K1)]
    pub k1: usize,
    #[arg(long, default_value_t = selector::DEFAULT_K2)]
    pub k2: usize,
    #[arg(long, default_value_t = selector::DEFAULT_K3)]
    pub k3: usize,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[arg(long = "fine-with-selected")]
    pub fine_with_selected: bool,
    #[command(flatten)]
    pub threads: ThreadArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Selected records, one JSON object per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest (defaults to OUT with a `.manifest.json` suffix).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Write selected records in input order instead of selection order.
    #[arg(long = "keep-input-order")]
    pub keep_input_order: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub threads: ThreadArgs,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Second manifest whose lengths are binned on the same edges.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// JSON report destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Token-length histogram as `bin_lo,bin_hi,count` CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Linear,
    Exponential,
    IsotonicDecreasing,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Ratio,
    Loss,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// CSV with header `label,compression_ratio,training_loss,performance`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "ratio")]
    pub x: AxisArg,
    #[arg(long, value_enum, default_value = "all")]
    pub family: FamilyArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub budget: BudgetSpec,
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    pub k1: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "200")]
    pub k2: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub k3: Vec<usize>,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[arg(long = "fine-with-selected")]
    pub fine_with_selected: bool,
    #[command(flatten)]
    pub threads: ThreadArgs,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long = "n-base")]
    pub n_base: usize,
    #[arg(long = "dup-fraction", default_value_t = 0.0)]
    pub dup_fraction: f64,
    #[arg(long = "near-dup-fraction", default_value_t = 0.0)]
    pub near_dup_fraction: f64,
    #[arg(long = "doc-bytes", default_value_t = 512)]
    pub doc_bytes: usize,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Subset size.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub k3: Option<usize>,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub samples: usize,
    pub total_bytes: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_secs: f64,
    pub select_secs: f64,
    pub total_secs: f64,
}

/// Everything needed to reproduce a selection from its input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub strategy: Strategy,
    pub mode: Mode,
    pub seed: u64,
    pub config: SelectorConfig,
    pub keep_input_order: bool,
    pub input: InputInfo,
    pub selected_ids: Vec<String>,
    pub final_set_ratio: Option<f64>,
    pub final_original_bytes: Option<u64>,
    pub final_compressed_bytes: Option<u64>,
    pub spent: Spent,
    pub budget_met: bool,
    pub trajectory: Vec<IterationRecord>,
    pub timings: Timings,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::input)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(CliError::input)?;
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CliError::input)
}

fn emit(path: Option<&Path>, contents: &str) -> CliResult {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Loads a pool and its checksum.
pub fn load_input(path: &Path, mode: Mode) -> CliResult<(Pool, InputInfo)> {
    let bytes = read_bytes(path)?;
    let sha256 = sha256_hex(&bytes);
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::input(anyhow::anyhow!("{}: not UTF-8: {e}", path.display())))?;
    let pool = Pool::parse_jsonl(text, mode, RenderTemplate::RoleContent)
        .map_err(|e| CliError::input(anyhow::Error::new(e).context(path.display().to_string())))?;
    let info = InputInfo {
        path: path.display().to_string(),
        sha256,
        samples: pool.len(),
        total_bytes: pool.total_bytes(),
        total_tokens: pool.total_tokens(),
    };
    Ok((pool, info))
}

fn run_strategy(
    pool: &Pool,
    strategy: Strategy,
    config: SelectorConfig,
    seed: u64,
) -> CliResult<Selection> {
    match strategy {
        Strategy::Zip => Ok(selector::zip_select(pool, config)?),
        Strategy::Random => {
            config.validate()?;
            Ok(oracle::random_select(pool, config.budget, seed, &config.codec)?)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_manifest(
    strategy: Strategy,
    mode: Mode,
    seed: u64,
    config: SelectorConfig,
    keep_input_order: bool,
    input: InputInfo,
    selection: &Selection,
    timings: Timings,
) -> RunManifest {
    let mut warnings = Vec::new();
    if selection.exhausted {
        warnings.push(format!(
            "budget {} not reached: pool exhausted after {} samples ({} {})",
            config.budget,
            selection.len(),
            selection.spent.get(config.budget.unit),
            config.budget.unit
        ));
    }
    if let Some(cap) = config.codec.context_cap_bytes {
        warnings.push(format!(
            "approximate joint scoring: context capped at {cap} bytes"
        ));
    }
    RunManifest {
        tool: "zipsel".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        strategy,
        mode,
        seed,
        config,
        keep_input_order,
        input,
        selected_ids: selection.ids.clone(),
        final_set_ratio: selection.final_ratio.map(|r| r.ratio),
        final_original_bytes: selection.final_ratio.map(|r| r.original_bytes),
        final_compressed_bytes: selection.final_ratio.map(|r| r.compressed_bytes),
        spent: selection.spent,
        budget_met: !selection.exhausted,
        trajectory: selection.trajectory.clone(),
        timings,
        warnings,
    }
}

fn selected_jsonl(pool: &Pool, selection: &Selection, keep_input_order: bool) -> String {
    let mut order = selection.indices.clone();
    if keep_input_order {
        order.sort_unstable();
    }
    let mut out = String::new();
    for i in order {
        out.push_str(&pool.records()[i]);
        out.push('\n');
    }
    out
}

fn default_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn cmd_select(args: &SelectArgs) -> CliResult {
    let started = Instant::now();
    let mode: Mode = args.input.mode.into();
    let (pool, info) = load_input(&args.input.input, mode)?;
    let load_secs = started.elapsed().as_secs_f64();

    let config = SelectorConfig {
        k1: args.k1,
        k2: args.k2,
        k3: args.k3,
        budget: args.budget,
        codec: args.codec.config()?,
        threads: args.threads.resolve()?,
        fine_with_selected: args.fine_with_selected,
    };
    config.validate()?;

    let t = Instant::now();
    let selection = run_strategy(&pool, args.strategy, config, args.seed)?;
    let select_secs = t.elapsed().as_secs_f64();

    let manifest = build_manifest(
        args.strategy,
        mode,
        args.seed,
        config,
        args.keep_input_order,
        info,
        &selection,
        Timings {
            load_secs,
            select_secs,
            total_secs: started.elapsed().as_secs_f64(),
        },
    );
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    write_file(
        &args.out,
        selected_jsonl(&pool, &selection, args.keep_input_order),
    )?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(&args.out));
    write_file(&manifest_path, to_json(&manifest))?;
    log::info!(
        "selected {} of {} samples, set ratio {:?}",
        selection.len(),
        pool.len(),
        manifest.final_set_ratio
    );
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs) -> CliResult {
    let (pool, _) = load_input(&args.input.input, args.input.mode.into())?;
    let codec = args.codec.config()?;
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.resolve()?)
        .build()
        .map_err(CliError::internal)?;
    let scores = workers.install(|| {
        pool.samples()
            .par_iter()
            .map(|s| compressor::ratio_of(&s.payload, &codec))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "bytes", "compressed_bytes", "ratio"])
        .map_err(CliError::internal)?;
    for (s, r) in pool.samples().iter().zip(&scores) {
        w.write_record([
            s.id.clone(),
            r.original_bytes.to_string(),
            r.compressed_bytes.to_string(),
            r.ratio.to_string(),
        ])
        .map_err(CliError::internal)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::internal(e.into_error()))?;
    emit(
        args.out.as_deref(),
        std::str::from_utf8(&bytes).expect("csv output is UTF-8"),
    )
}

fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    RunManifest::from_json(&text)
        .with_context(|| format!("{}: invalid manifest", path.display()))
        .map_err(CliError::input)
}

fn selection_from_manifest(pool: &Pool, manifest: &RunManifest) -> CliResult<Selection> {
    let index: std::collections::HashMap<&str, usize> = pool
        .samples()
        .iter()
        .map(|s| (s.id.as_str(), s.source_index))
        .collect();
    let indices = manifest
        .selected_ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| CliError::input(anyhow::anyhow!("manifest id {id:?} is not in the pool")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut sel = Selection::from_indices(pool, &indices);
    sel.trajectory = manifest.trajectory.clone();
    sel.exhausted = !manifest.budget_met;
    sel.finalize(&manifest.config.codec)?;
    Ok(sel)
}

pub fn cmd_stats(args: &StatsArgs) -> CliResult {
    let (pool, _) = load_input(&args.input.input, args.input.mode.into())?;
    let manifest = read_manifest(&args.manifest)?;
    let selection = selection_from_manifest(&pool, &manifest)?;
    let reference = match &args.reference {
        Some(p) => Some(selection_from_manifest(&pool, &read_manifest(p)?)?),
        None => None,
    };
    let report =
        analysis::selection_stats(&selection, &pool, reference.as_ref(), &manifest.config.codec)?;
    if let Some(h) = &args.histogram {
        write_file(h, analysis::histogram_csv(&report.token_histogram))?;
    }
    emit(args.out.as_deref(), &to_json(&report))
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    x: XAxis,
    fits: Vec<analysis::CurveFit>,
    fit_errors: Vec<String>,
    anomalies: Vec<String>,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> CliResult {
    let bytes = read_bytes(&args.input)?;
    let points = analysis::read_versions_csv(bytes.as_slice())?;
    let x = match args.x {
        AxisArg::Ratio => XAxis::Ratio,
        AxisArg::Loss => XAxis::Loss,
    };
    let families: &[Family] = match args.family {
        FamilyArg::Linear => &[Family::Linear],
        FamilyArg::Exponential => &[Family::Exponential],
        FamilyArg::IsotonicDecreasing => &[Family::IsotonicDecreasing],
        FamilyArg::All => &[Family::Linear, Family::Exponential, Family::IsotonicDecreasing],
    };
    let mut fits = Vec::new();
    let mut fit_errors = Vec::new();
    for &family in families {
        match analysis::fit_entropy_curve(&points, x, family) {
            Ok(f) => fits.push(f),
            Err(e) => fit_errors.push(format!("{family:?}: {e}")),
        }
    }
    let report = AnalyzeReport {
        x,
        fits,
        fit_errors,
        anomalies: analysis::detect_anomaly(&points),
    };
    emit(args.out.as_deref(), &to_json(&report))
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let started = Instant::now();
    let mode: Mode = args.input.mode.into();
    let (pool, info) = load_input(&args.input.input, mode)?;
    let load_secs = started.elapsed().as_secs_f64();
    let codec = args.codec.config()?;
    let threads = args.threads.resolve()?;

    let mut summary = String::from(
        "k1,k2,k3,selected,spent,budget_met,final_set_ratio,wall_time_secs,manifest\n",
    );
    let mut cells = 0usize;
    for &k1 in &args.k1 {
        for &k2 in &args.k2 {
            for &k3 in &args.k3 {
                let config = SelectorConfig {
                    k1,
                    k2,
                    k3,
                    budget: args.budget,
                    codec,
                    threads,
                    fine_with_selected: args.fine_with_selected,
                };
                if let Err(e) = config.validate() {
                    log::warn!("skipping k1={k1} k2={k2} k3={k3}: {e}");
                    continue;
                }
                let t = Instant::now();
                let selection = selector::zip_select(&pool, config)?;
                let select_secs = t.elapsed().as_secs_f64();
                let manifest = build_manifest(
                    Strategy::Zip,
                    mode,
                    0,
                    config,
                    false,
                    info.clone(),
                    &selection,
                    Timings {
                        load_secs,
                        select_secs,
                        total_secs: load_secs + select_secs,
                    },
                );
                let name = format!("k1-{k1}_k2-{k2}_k3-{k3}.manifest.json");
                write_file(&args.out_dir.join(&name), to_json(&manifest))?;
                summary.push_str(&format!(
                    "{k1},{k2},{k3},{},{},{},{},{},{name}\n",
                    selection.len(),
                    selection.spent.get(args.budget.unit),
                    manifest.budget_met,
                    manifest.final_set_ratio.unwrap_or(f64::NAN),
                    select_secs,
                ));
                cells += 1;
            }
        }
    }
    if cells == 0 {
        return Err(CliError::usage(anyhow::anyhow!(
            "no valid (k1, k2, k3) cell: every cell needs k3 <= k2 <= k1"
        )));
    }
    write_file(&args.out_dir.join("summary.csv"), summary)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult {
    let spec = SynthSpec {
        n_base: args.n_base,
        dup_fraction: args.dup_fraction,
        near_dup_fraction: args.near_dup_fraction,
        doc_bytes: args.doc_bytes,
        vocab: args.vocab,
        seed: args.seed,
    };
    let synth = oracle::gen_synthetic_pool(&spec)?;
    write_file(&args.out, synth.to_jsonl())
}

#[derive(Debug, Serialize)]
struct OracleReport {
    k: usize,
    pool_size: usize,
    exhaustive_ids: Vec<String>,
    exhaustive_ratio: f64,
    greedy_ids: Vec<String>,
    greedy_ratio: f64,
    /// `greedy / exhaustive - 1`.
    relative_gap: f64,
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult {
    let (pool, _) = load_input(&args.input.input, args.input.mode.into())?;
    let codec = args.codec.config()?;
    let best = oracle::exhaustive_best_subset(&pool, args.k, &codec)?;
    let n = pool.len();
    let k1 = args.k1.unwrap_or(n);
    let k2 = args.k2.unwrap_or(k1);
    let k3 = args.k3.unwrap_or(k2);
    let config = SelectorConfig {
        k1,
        k2,
        k3,
        budget: BudgetSpec::samples(args.k as u64),
        codec,
        threads: 1,
        fine_with_selected: false,
    };
    let greedy = selector::zip_select(&pool, config)?;
    let mut sorted = greedy.indices.clone();
    sorted.sort_unstable();
    let pool_order = Selection::from_indices(&pool, &sorted);
    let greedy_ratio = compressor::ratio_of(&pool_order.buffer, &codec)?.ratio;
    let report = OracleReport {
        k: args.k,
        pool_size: n,
        exhaustive_ids: best.ids,
        exhaustive_ratio: best.ratio,
        greedy_ids: greedy.ids,
        greedy_ratio,
        relative_gap: greedy_ratio / best.ratio - 1.0,
    };
    emit(args.out.as_deref(), &to_json(&report))
}

pub fn cmd_replay(args: &ReplayArgs) -> CliResult {
    let manifest = read_manifest(&args.manifest)?;
    let (pool, info) = load_input(&args.input, manifest.mode)?;
    if info.sha256 != manifest.input.sha256 {
        return Err(CliError::input(anyhow::anyhow!(
            "input checksum {} does not match manifest {}",
            info.sha256,
            manifest.input.sha256
        )));
    }
    let mut config = manifest.config;
    if args.threads.threads.is_some() {
        config.threads = args.threads.resolve()?;
    }
    let selection = run_strategy(&pool, manifest.strategy, config, manifest.seed)?;
    if selection.ids != manifest.selected_ids {
        let diverge = selection
            .ids
            .iter()
            .zip(&manifest.selected_ids)
            .position(|(a, b)| a != b)
            .unwrap_or(selection.ids.len().min(manifest.selected_ids.len()));
        return Err(CliError::internal(anyhow::anyhow!(
            "replay diverged at position {diverge} ({} vs {} ids)",
            selection.ids.len(),
            manifest.selected_ids.len()
        )));
    }
    println!("replay ok: {} ids reproduced", selection.len());
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Score(a) => cmd_score(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
