//! Command-line driver. Every subcommand reads and writes artifacts inside a
//! workspace directory whose `manifest.json` records content hashes and the
//! parameters that produced each file.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal or I/O error |
//! | 2 | usage error (unknown flag, bad argument) |
//! | 3 | invalid configuration or hyperparameters |
//! | 4 | malformed input records |
//! | 5 | missing artifact |
//! | 6 | artifact hash mismatch |
//! | 7 | data cannot support the computation |

pub mod workspace;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::align::{align_chain, read_chain, shared_vocab, write_chain, AlignedChain, CHAIN_MANIFEST};
use crate::corpus::{ingest_path, IngestOptions, Lexicon, PeriodConfig, PeriodCorpus, Pos};
use crate::error::Error;
use crate::eval::{self, PValueMethod};
use crate::senti::{self, SentimentClassifier, SentimentMode};
use crate::sgns::{self, EmbeddingSpace, Hyperparams};
use crate::shift::{self, NeighborQuery, REPORT_SCHEMA_VERSION};
use crate::synth::{self, DriftSpec};

use workspace::{sha256_file, Workspace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;
pub const EXIT_MISSING: i32 = 5;
pub const EXIT_HASH: i32 = 6;
pub const EXIT_DATA: i32 = 7;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            kind,
            message: message.into(),
        }
    }

    pub fn usage(m: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, "usage", m)
    }

    pub fn config(m: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, "config", m)
    }

    pub fn malformed(m: impl Into<String>) -> Self {
        Self::new(EXIT_MALFORMED, "malformed_input", m)
    }

    pub fn missing(m: impl Into<String>) -> Self {
        Self::new(EXIT_MISSING, "missing_artifact", m)
    }

    pub fn hash(m: impl Into<String>) -> Self {
        Self::new(EXIT_HASH, "hash_mismatch", m)
    }

    pub fn to_json(&self) -> String {
        json!({"error": {"code": self.code, "kind": self.kind, "message": self.message}}).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Config(_) => CliError::config(message),
            Error::Format(_) | Error::Json(_) => CliError::malformed(message),
            Error::Io(_) | Error::IoAt { .. } => CliError::new(EXIT_INTERNAL, "io", message),
            Error::Empty(_)
            | Error::MissingWord { .. }
            | Error::NonFinite(_)
            | Error::Dimension { .. }
            | Error::Insufficient(_) => CliError::new(EXIT_DATA, "data", message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::from(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::from(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "driftlab", version, about = "Diachronic word embeddings and semantic shift analysis")]
struct Cli {
    /// Workspace directory holding artifacts and the manifest.
    #[arg(long, env = "DRIFTLAB_WORKSPACE", global = true)]
    workspace: Option<PathBuf>,
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split an annotated JSON-lines corpus into per-period corpora.
    Ingest(IngestArgs),
    /// Train SGNS embeddings for one or all periods.
    Train(TrainArgs),
    /// Rotate all periods into the frame of the last one.
    Align(AlignArgs),
    /// Rank candidate words by cumulative shift.
    Shift(ShiftArgs),
    /// Trace a word's nearest neighbors across periods.
    Neighbors(NeighborsArgs),
    /// Spearman correlation with human similarity ratings.
    EvalSim(EvalSimArgs),
    /// Contrastive spread on synonym-choice items.
    EvalSyn(EvalSynArgs),
    /// Train one sentiment classifier per period on aligned vectors.
    SentiTrain(SentiTrainArgs),
    /// Sentiment transfer matrix between periods.
    SentiMatrix(SentiMatrixArgs),
    /// Share of positive lexicon words per period.
    SentiShare(SentiShareArgs),
    /// Generate a synthetic corpus with planted drift.
    Synth(SynthArgs),
    /// Verify all artifacts and write a summary.
    Report,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Period boundaries (TOML); defaults to the config file, then 2000-2024 in five-year spans.
    #[arg(long)]
    periods: Option<PathBuf>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Surface/POS to lemma overrides, TSV.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Skip malformed records instead of failing.
    #[arg(long)]
    allow_malformed: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `all` or a period index.
    #[arg(long, default_value = "all")]
    period: String,
    #[arg(long)]
    vector_size: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negative: Option<usize>,
    #[arg(long)]
    sample: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the text export.
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug)]
struct AlignArgs {
    /// Minimum count in every period for a word to join the shared vocabulary.
    #[arg(long)]
    min_count: Option<u64>,
    /// Fit rotations on raw rather than length-normalized vectors.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Debug)]
struct ShiftArgs {
    /// One candidate key per line.
    #[arg(long, conflicts_with = "all")]
    candidates: Option<PathBuf>,
    /// Score every shared word.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    freq_floor: Option<u64>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args, Debug)]
struct NeighborsArgs {
    #[arg(long)]
    word: String,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    freq_floor: Option<u64>,
    /// POS tag to keep, or `any`.
    #[arg(long)]
    pos: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PMethodArg {
    T,
    Permutation,
}

#[derive(Args, Debug)]
struct EvalSimArgs {
    #[arg(long)]
    data: PathBuf,
    /// Period index; defaults to the last period.
    #[arg(long)]
    period: Option<usize>,
    /// Evaluate the aligned space instead of the trained one.
    #[arg(long)]
    aligned: bool,
    #[arg(long, value_enum, default_value = "t")]
    p_method: PMethodArg,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalSynArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "NOUN")]
    pos: String,
    #[arg(long)]
    period: Option<usize>,
    #[arg(long)]
    aligned: bool,
}

#[derive(Args, Debug)]
struct SentiTrainArgs {
    /// Labeled examples, TSV `label<TAB>tokens`.
    #[arg(long)]
    data: PathBuf,
    /// Inverse regularization strength.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Hard,
    Expected,
}

#[derive(Args, Debug)]
struct SentiMatrixArgs {
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Add cross-validated p-values for every off-diagonal cell.
    #[arg(long)]
    significance: bool,
    /// Labeled data for the cross-validation; defaults to the test set.
    #[arg(long)]
    cv_data: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SentiShareArgs {
    /// TSV `word<TAB>positive|negative`.
    #[arg(long)]
    lexicon: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Mini,
    Full,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<PresetArg>,
    /// Drift specification, TOML.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory relative to the workspace.
    #[arg(long, default_value = "synth")]
    out: String,
    #[arg(long, default_value_t = 600)]
    sentiment_examples: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    workspace: Option<PathBuf>,
    periods: Option<toml::Value>,
    ingest: IngestSection,
    train: TrainSection,
    align: AlignSection,
    shift: ShiftSection,
    neighbors: NeighborsSection,
    senti: SentiSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestSection {
    min_count: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    vector_size: Option<usize>,
    window: Option<usize>,
    negative: Option<usize>,
    sample: Option<f64>,
    alpha: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AlignSection {
    min_count: Option<u64>,
    normalize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ShiftSection {
    freq_floor: Option<u64>,
    top_k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NeighborsSection {
    pool: Option<usize>,
    keep: Option<usize>,
    freq_floor: Option<u64>,
    pos: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SentiSection {
    c: Option<f64>,
    mode: Option<SentimentMode>,
    folds: Option<usize>,
    seed: Option<u64>,
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    toml::from_str(&raw).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub const DEFAULT_START_YEAR: i32 = 2000;
pub const DEFAULT_SPAN_YEARS: u32 = 5;
pub const DEFAULT_PERIODS: usize = 5;
pub const DEFAULT_TOTAL_FREQ_FLOOR: u64 = 1000;
pub const DEFAULT_TOP_K: usize = 20;
pub const DEFAULT_ALIGN_MIN_COUNT: u64 = 1;

const PERIODS_FILE: &str = "corpus/periods.toml";
const CHAIN_DIR: &str = "chain";

fn corpus_path(i: usize) -> String {
    format!("corpus/period_{i}.json")
}

fn space_path(i: usize) -> String {
    format!("spaces/period_{i}.bin")
}

fn classifier_path(i: usize) -> String {
    format!("classifiers/period_{i}.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::from(Error::io_at(dir, e)))?;
    }
    let json = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, json).map_err(|e| CliError::from(Error::io_at(path, e)))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let raw = std::fs::read(path).map_err(|e| CliError::from(Error::io_at(path, e)))?;
    Ok(serde_json::from_slice(&raw)?)
}

fn create_file(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::from(Error::io_at(dir, e)))?;
    }
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::from(Error::io_at(path, e)))
}

fn input_provenance(path: &Path) -> CliResult<serde_json::Value> {
    if !path.exists() {
        return Err(CliError::from(Error::io_at(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        )));
    }
    Ok(json!({"path": path.to_string_lossy(), "sha256": sha256_file(path)?}))
}

struct Context {
    ws: Workspace,
    config: ConfigFile,
    written: Vec<String>,
}

impl Context {
    fn record(&mut self, command: &str, kind: &str, rel: &str, params: &serde_json::Value) -> CliResult<()> {
        let path = self.ws.path(rel);
        self.ws.record(command, kind, &path, params)?;
        self.written.push(rel.to_owned());
        Ok(())
    }

    fn period_config(&self) -> CliResult<PeriodConfig> {
        let path = self.ws.require(PERIODS_FILE)?;
        let raw = std::fs::read_to_string(&path).map_err(|e| CliError::from(Error::io_at(&path, e)))?;
        Ok(PeriodConfig::from_toml_str(&raw)?)
    }

    fn corpus(&self, i: usize) -> CliResult<PeriodCorpus> {
        read_json(&self.ws.require(&corpus_path(i))?)
    }

    fn space(&self, i: usize) -> CliResult<EmbeddingSpace> {
        let path = self.ws.require(&space_path(i))?;
        Ok(sgns::read_embeddings(&path)?)
    }

    fn chain(&self) -> CliResult<AlignedChain> {
        self.ws.require(&format!("{CHAIN_DIR}/{CHAIN_MANIFEST}"))?;
        for e in self.ws.latest().values() {
            if e.path.starts_with(&format!("{CHAIN_DIR}/")) {
                self.ws.verify(e)?;
            }
        }
        Ok(read_chain(&self.ws.path(CHAIN_DIR))?)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are printed to stderr as JSON.
/// What one invocation would print, and its exit code.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses and executes a command line without printing anything.
pub fn invoke<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let done = |code, stdout: String, stderr: String| Invocation { code, stdout, stderr };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return done(EXIT_OK, e.to_string(), String::new());
            }
            let err = CliError::usage(e.to_string().trim().to_owned());
            return done(err.code, String::new(), format!("{}\n", err.to_json()));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli) {
        Ok(summary) => done(EXIT_OK, format!("{summary}\n"), String::new()),
        Err(e) => done(e.code, String::new(), format!("{}\n", e.to_json())),
    }
}

/// Runs a command line, printing its summary or error; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let out = invoke(args);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

fn execute(cli: Cli) -> CliResult<String> {
    let config = load_config(cli.config.as_deref())?;
    let root = cli
        .workspace
        .clone()
        .or_else(|| config.workspace.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ws = Workspace::open(root)?;
    let mut ctx = Context {
        ws,
        config,
        written: Vec::new(),
    };
    let name = match &cli.command {
        Command::Ingest(a) => {
            cmd_ingest(&mut ctx, a)?;
            "ingest"
        }
        Command::Train(a) => {
            cmd_train(&mut ctx, a)?;
            "train"
        }
        Command::Align(a) => {
            cmd_align(&mut ctx, a)?;
            "align"
        }
        Command::Shift(a) => {
            cmd_shift(&mut ctx, a)?;
            "shift"
        }
        Command::Neighbors(a) => {
            cmd_neighbors(&mut ctx, a)?;
            "neighbors"
        }
        Command::EvalSim(a) => {
            cmd_eval_sim(&mut ctx, a)?;
            "eval-sim"
        }
        Command::EvalSyn(a) => {
            cmd_eval_syn(&mut ctx, a)?;
            "eval-syn"
        }
        Command::SentiTrain(a) => {
            cmd_senti_train(&mut ctx, a)?;
            "senti-train"
        }
        Command::SentiMatrix(a) => {
            cmd_senti_matrix(&mut ctx, a)?;
            "senti-matrix"
        }
        Command::SentiShare(a) => {
            cmd_senti_share(&mut ctx, a)?;
            "senti-share"
        }
        Command::Synth(a) => {
            cmd_synth(&mut ctx, a)?;
            "synth"
        }
        Command::Report => {
            cmd_report(&mut ctx)?;
            "report"
        }
    };
    Ok(json!({"command": name, "artifacts": ctx.written}).to_string())
}

fn cmd_ingest(ctx: &mut Context, a: &IngestArgs) -> CliResult<()> {
    let periods = match (&a.periods, &ctx.config.periods) {
        (Some(p), _) => {
            let raw = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            PeriodConfig::from_toml_str(&raw)?
        }
        (None, Some(v)) => PeriodConfig::from_toml_value(v.clone())?,
        (None, None) => PeriodConfig::uniform(DEFAULT_START_YEAR, DEFAULT_SPAN_YEARS, DEFAULT_PERIODS)?,
    };
    let min_count = a.min_count.or(ctx.config.ingest.min_count).unwrap_or(1);
    let lexicon = a.lexicon.as_deref().map(Lexicon::from_path).transpose()?;
    let options = IngestOptions {
        min_count,
        lexicon: lexicon.as_ref(),
    };
    let input = input_provenance(&a.input)?;
    let ingested = ingest_path(&a.input, &periods, &options)?;
    let stats = &ingested.stats;
    if stats.skipped_malformed > 0 && !a.allow_malformed {
        let examples: Vec<String> = stats
            .malformed_examples
            .iter()
            .map(|(line, reason)| format!("line {line}: {reason}"))
            .collect();
        return Err(CliError::malformed(format!(
            "{} malformed record(s); first: {}",
            stats.skipped_malformed,
            examples.join("; ")
        )));
    }
    let params = json!({
        "input": input,
        "min_count": min_count,
        "allow_malformed": a.allow_malformed,
        "lexicon": a.lexicon.as_ref().map(|p| p.to_string_lossy().into_owned()),
    });
    let periods_path = ctx.ws.path(PERIODS_FILE);
    let mut f = create_file(&periods_path)?;
    f.write_all(periods.to_toml_string().as_bytes())?;
    f.flush()?;
    drop(f);
    ctx.record("ingest", "periods", PERIODS_FILE, &params)?;
    for c in &ingested.corpora {
        let rel = corpus_path(c.period_index);
        write_json(&ctx.ws.path(&rel), c)?;
        ctx.record("ingest", "corpus", &rel, &params)?;
    }
    let rel = "reports/ingest_stats.json";
    write_json(
        &ctx.ws.path(rel),
        &json!({"schema_version": REPORT_SCHEMA_VERSION, "stats": stats}),
    )?;
    ctx.record("ingest", "ingest_stats", rel, &params)
}

fn hyperparams(ctx: &Context, a: &TrainArgs) -> CliResult<Hyperparams> {
    let c = &ctx.config.train;
    let d = Hyperparams::default();
    let hp = Hyperparams {
        vector_size: a.vector_size.or(c.vector_size).unwrap_or(d.vector_size),
        window: a.window.or(c.window).unwrap_or(d.window),
        negative: a.negative.or(c.negative).unwrap_or(d.negative),
        sample: a.sample.or(c.sample).unwrap_or(d.sample),
        alpha: a.alpha.or(c.alpha).unwrap_or(d.alpha),
        epochs: a.epochs.or(c.epochs).unwrap_or(d.epochs),
        seed: a.seed.or(c.seed).unwrap_or(d.seed),
        workers: a.workers.or(c.workers).unwrap_or(d.workers),
    };
    hp.validate()?;
    Ok(hp)
}

fn cmd_train(ctx: &mut Context, a: &TrainArgs) -> CliResult<()> {
    let hp = hyperparams(ctx, a)?;
    let count = ctx.period_config()?.count();
    let periods: Vec<usize> = if a.period == "all" {
        (0..count).collect()
    } else {
        let p: usize = a
            .period
            .parse()
            .map_err(|_| CliError::usage(format!("--period must be `all` or an index, got `{}`", a.period)))?;
        if p >= count {
            return Err(CliError::usage(format!("period {p} out of range (0..{count})")));
        }
        vec![p]
    };
    let corpora = periods.iter().map(|&p| ctx.corpus(p)).collect::<CliResult<Vec<_>>>()?;
    let train_one = |c: &PeriodCorpus| sgns::train_with_report(c, &hp);
    // Single-worker runs are independent per period; run them side by side.
    let trained = if hp.workers == 1 {
        corpora.par_iter().map(train_one).collect::<Result<Vec<_>, _>>()?
    } else {
        corpora.iter().map(train_one).collect::<Result<Vec<_>, _>>()?
    };
    let params = serde_json::to_value(&hp)?;
    for (space, report) in trained {
        let p = space.period_index;
        let rel = space_path(p);
        let mut f = create_file(&ctx.ws.path(&rel))?;
        sgns::write_binary(&space, &mut f)?;
        f.flush()?;
        drop(f);
        ctx.record("train", "space", &rel, &params)?;
        if a.text {
            let rel = format!("spaces/period_{p}.txt");
            let mut f = create_file(&ctx.ws.path(&rel))?;
            sgns::write_text(&space, &mut f)?;
            f.flush()?;
            drop(f);
            ctx.record("train", "space_text", &rel, &params)?;
        }
        let rel = format!("reports/train_period_{p}.json");
        write_json(
            &ctx.ws.path(&rel),
            &json!({"schema_version": REPORT_SCHEMA_VERSION, "period": p, "hyperparams": hp, "report": report}),
        )?;
        ctx.record("train", "train_report", &rel, &params)?;
    }
    Ok(())
}

fn cmd_align(ctx: &mut Context, a: &AlignArgs) -> CliResult<()> {
    let count = ctx.period_config()?.count();
    let spaces = (0..count).map(|p| ctx.space(p)).collect::<CliResult<Vec<_>>>()?;
    let min_count = a.min_count.or(ctx.config.align.min_count).unwrap_or(DEFAULT_ALIGN_MIN_COUNT);
    let normalize = if a.no_normalize {
        false
    } else {
        ctx.config.align.normalize.unwrap_or(true)
    };
    let shared = shared_vocab(&spaces, min_count)?;
    let chain = align_chain(&spaces, &shared, normalize)?;
    let dir = ctx.ws.create_dir(CHAIN_DIR)?;
    let files = write_chain(&chain, &dir)?;
    let params = json!({"min_count": min_count, "normalize": normalize, "shared_vocab_size": shared.len()});
    for f in files {
        let kind = if f == CHAIN_MANIFEST { "chain_manifest" } else { "chain" };
        ctx.record("align", kind, &format!("{CHAIN_DIR}/{f}"), &params)?;
    }
    Ok(())
}

fn cmd_shift(ctx: &mut Context, a: &ShiftArgs) -> CliResult<()> {
    let chain = ctx.chain()?;
    let candidates: Vec<String> = match (&a.candidates, a.all) {
        (Some(path), _) => {
            let raw = std::fs::read_to_string(path).map_err(|e| CliError::from(Error::io_at(path, e)))?;
            raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_owned).collect()
        }
        (None, true) => chain.shared.keys().to_vec(),
        (None, false) => return Err(CliError::usage("pass --candidates FILE or --all")),
    };
    let floor = a.freq_floor.or(ctx.config.shift.freq_floor).unwrap_or(DEFAULT_TOTAL_FREQ_FLOOR);
    let top_k = a.top_k.or(ctx.config.shift.top_k).unwrap_or(DEFAULT_TOP_K);
    let scores = shift::rank_candidates(&candidates, &chain, floor, top_k)?;
    let report = shift::ShiftReport::new(scores);
    let params = json!({
        "candidates": a.candidates.as_ref().map(|p| input_provenance(p)).transpose()?,
        "all": a.all,
        "freq_floor": floor,
        "top_k": top_k,
    });
    write_json(&ctx.ws.path("reports/shift.json"), &report)?;
    ctx.record("shift", "shift_report", "reports/shift.json", &params)?;
    let mut f = create_file(&ctx.ws.path("reports/shift.csv"))?;
    report.write_csv(&mut f)?;
    f.flush()?;
    drop(f);
    ctx.record("shift", "shift_csv", "reports/shift.csv", &params)
}

fn parse_pos_filter(s: &str) -> CliResult<Option<Pos>> {
    if s.eq_ignore_ascii_case("any") {
        return Ok(None);
    }
    match Pos::from_tag(s) {
        Pos::Other => Err(CliError::usage(format!("unknown POS tag `{s}`"))),
        p => Ok(Some(p)),
    }
}

fn file_safe(word: &str) -> String {
    word.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn cmd_neighbors(ctx: &mut Context, a: &NeighborsArgs) -> CliResult<()> {
    let chain = ctx.chain()?;
    let c = &ctx.config.neighbors;
    let d = NeighborQuery::default();
    let pos = match a.pos.as_deref().or(c.pos.as_deref()) {
        Some(s) => parse_pos_filter(s)?,
        None => d.pos_filter,
    };
    let query = NeighborQuery {
        pool_size: a.pool.or(c.pool).unwrap_or(d.pool_size),
        keep: a.keep.or(c.keep).unwrap_or(d.keep),
        pos_filter: pos,
        per_period_freq_floor: a.freq_floor.or(c.freq_floor).unwrap_or(d.per_period_freq_floor),
    };
    let score = shift::cumulative_shift(&a.word, &chain)?;
    let trace = shift::neighbor_trace(&a.word, &chain, &query)?;
    let report = shift::NeighborReport::new(trace, &score);
    let rel = format!("reports/neighbors_{}.json", file_safe(&a.word));
    let params = json!({
        "word": a.word,
        "pool": query.pool_size,
        "keep": query.keep,
        "freq_floor": query.per_period_freq_floor,
        "pos": query.pos_filter.map(Pos::as_str),
    });
    write_json(&ctx.ws.path(&rel), &report)?;
    ctx.record("neighbors", "neighbor_report", &rel, &params)
}

fn eval_period(ctx: &Context, period: Option<usize>) -> CliResult<usize> {
    let count = ctx.period_config()?.count();
    let p = period.unwrap_or(count - 1);
    if p >= count {
        return Err(CliError::usage(format!("period {p} out of range (0..{count})")));
    }
    Ok(p)
}

fn cmd_eval_sim(ctx: &mut Context, a: &EvalSimArgs) -> CliResult<()> {
    let p = eval_period(ctx, a.period)?;
    let pairs = eval::read_similarity_path(&a.data)?;
    let method = match a.p_method {
        PMethodArg::T => PValueMethod::T,
        PMethodArg::Permutation => PValueMethod::Permutation,
    };
    let seed = a.seed.unwrap_or(1);
    let result = if a.aligned {
        let chain = ctx.chain()?;
        eval::spearman_with(&pairs, chain.period(p), method, seed)?
    } else {
        eval::spearman_with(&pairs, &ctx.space(p)?, method, seed)?
    };
    let suffix = if a.aligned { "_aligned" } else { "" };
    let rel = format!("reports/eval_sim_period_{p}{suffix}.json");
    let report = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "period": p,
        "aligned": a.aligned,
        "p_method": method,
        "rho": result.rho,
        "p": result.p,
        "n_used": result.n_used,
        "n_skipped": result.n_skipped,
    });
    let params = json!({"data": input_provenance(&a.data)?, "period": p, "aligned": a.aligned, "p_method": method, "seed": seed});
    write_json(&ctx.ws.path(&rel), &report)?;
    ctx.record("eval-sim", "eval_sim", &rel, &params)
}

fn cmd_eval_syn(ctx: &mut Context, a: &EvalSynArgs) -> CliResult<()> {
    let p = eval_period(ctx, a.period)?;
    let pos = parse_pos_filter(&a.pos)?.ok_or_else(|| CliError::usage("eval-syn needs a concrete POS"))?;
    let items = eval::read_synonym_path(&a.data)?;
    let result = if a.aligned {
        let chain = ctx.chain()?;
        eval::contrastive_spread(&items, chain.period(p), pos)?
    } else {
        eval::contrastive_spread(&items, &ctx.space(p)?, pos)?
    };
    let suffix = if a.aligned { "_aligned" } else { "" };
    let rel = format!("reports/eval_syn_{}_period_{p}{suffix}.json", pos.as_str());
    let report = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "period": p,
        "aligned": a.aligned,
        "pos": result.pos,
        "mean_spread": result.mean_spread,
        "n_used": result.n_used,
        "n_skipped": result.n_skipped,
    });
    let params = json!({"data": input_provenance(&a.data)?, "period": p, "aligned": a.aligned, "pos": pos.as_str()});
    write_json(&ctx.ws.path(&rel), &report)?;
    ctx.record("eval-syn", "eval_syn", &rel, &params)
}

fn cmd_senti_train(ctx: &mut Context, a: &SentiTrainArgs) -> CliResult<()> {
    let chain = ctx.chain()?;
    let data = senti::read_sentiment_path(&a.data)?;
    let c = a.c.or(ctx.config.senti.c).unwrap_or(senti::DEFAULT_INVERSE_STRENGTH);
    let classifiers = (0..chain.len())
        .into_par_iter()
        .map(|i| senti::train_with_inverse_strength(&data, chain.period(i), c, i))
        .collect::<Result<Vec<_>, _>>()?;
    let params = json!({"data": input_provenance(&a.data)?, "c": c});
    for (i, clf) in classifiers.iter().enumerate() {
        let rel = classifier_path(i);
        write_json(&ctx.ws.path(&rel), clf)?;
        ctx.record("senti-train", "classifier", &rel, &params)?;
    }
    Ok(())
}

fn cmd_senti_matrix(ctx: &mut Context, a: &SentiMatrixArgs) -> CliResult<()> {
    let chain = ctx.chain()?;
    let classifiers: Vec<SentimentClassifier> = (0..chain.len())
        .map(|i| read_json(&ctx.ws.require(&classifier_path(i))?))
        .collect::<CliResult<_>>()?;
    let test = senti::read_sentiment_path(&a.test)?;
    let cfg = &ctx.config.senti;
    let mode = match a.mode {
        Some(ModeArg::Hard) => SentimentMode::Hard,
        Some(ModeArg::Expected) => SentimentMode::Expected,
        None => cfg.mode.unwrap_or_default(),
    };
    let mut matrix = senti::transfer_matrix(&classifiers, &chain, &test, mode)?;
    let mut params = json!({"test": input_provenance(&a.test)?, "mode": mode, "significance": a.significance});
    if a.significance {
        let cv_path = a.cv_data.as_ref().unwrap_or(&a.test);
        let data = senti::read_sentiment_path(cv_path)?;
        let opts = senti::SignificanceOptions {
            folds: a.folds.or(cfg.folds).unwrap_or(10),
            inverse_strength: a.c.or(cfg.c).unwrap_or(senti::DEFAULT_INVERSE_STRENGTH),
            seed: a.seed.or(cfg.seed).unwrap_or(1),
            mode,
        };
        senti::attach_significance(&mut matrix, &chain, &data, &opts)?;
        params["cv_data"] = input_provenance(cv_path)?;
        params["folds"] = json!(opts.folds);
        params["c"] = json!(opts.inverse_strength);
        params["seed"] = json!(opts.seed);
    }
    let report = senti::MatrixReport::new(matrix);
    write_json(&ctx.ws.path("reports/senti_matrix.json"), &report)?;
    ctx.record("senti-matrix", "senti_matrix", "reports/senti_matrix.json", &params)?;
    let mut f = create_file(&ctx.ws.path("reports/senti_matrix.csv"))?;
    report.write_csv(&mut f)?;
    f.flush()?;
    drop(f);
    ctx.record("senti-matrix", "senti_matrix_csv", "reports/senti_matrix.csv", &params)
}

fn cmd_senti_share(ctx: &mut Context, a: &SentiShareArgs) -> CliResult<()> {
    let lexicon = senti::SentimentLexicon::from_path(&a.lexicon)?;
    let count = ctx.period_config()?.count();
    let shares = (0..count)
        .map(|p| Ok(senti::lexicon_positive_share(&ctx.corpus(p)?, &lexicon)?))
        .collect::<CliResult<Vec<_>>>()?;
    let rel = "reports/senti_share.json";
    write_json(
        &ctx.ws.path(rel),
        &json!({"schema_version": REPORT_SCHEMA_VERSION, "periods": shares}),
    )?;
    let params = json!({"lexicon": input_provenance(&a.lexicon)?});
    ctx.record("senti-share", "senti_share", rel, &params)
}

fn cmd_synth(ctx: &mut Context, a: &SynthArgs) -> CliResult<()> {
    let mut spec = match (&a.spec, a.preset) {
        (Some(path), _) => {
            let raw = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            DriftSpec::from_toml_str(&raw)?
        }
        (None, Some(PresetArg::Full)) => DriftSpec::full(1),
        (None, Some(PresetArg::Mini) | None) => DriftSpec::mini(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let out = Path::new(&a.out);
    if out.is_absolute() || out.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(CliError::usage("--out must be a relative path inside the workspace"));
    }
    let dir = ctx.ws.create_dir(&a.out)?;
    let files = synth::write_all(&spec, &dir, a.sentiment_examples)?;
    let params = json!({"spec": spec, "sentiment_examples": a.sentiment_examples});
    let out = a.out.trim_end_matches('/').to_owned();
    for f in files {
        ctx.record("synth", "synth", &format!("{out}/{f}"), &params)?;
    }
    Ok(())
}

fn cmd_report(ctx: &mut Context) -> CliResult<()> {
    const SUMMARY: &str = "reports/summary.json";
    let latest = ctx.ws.latest();
    let mut entries: Vec<_> = latest.into_values().filter(|e| e.path != SUMMARY).collect();
    if entries.is_empty() {
        return Err(CliError::missing(format!(
            "no artifacts recorded in {}",
            ctx.ws.root().join(workspace::MANIFEST_FILE).display()
        )));
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    for e in &entries {
        ctx.ws.verify(e)?;
    }
    let artifacts: Vec<serde_json::Value> = entries
        .iter()
        .map(|e| json!({"path": e.path, "kind": e.kind, "command": e.command, "sha256": e.sha256}))
        .collect();
    let top_shift = match entries.iter().find(|e| e.path == "reports/shift.json") {
        Some(e) => {
            let r: shift::ShiftReport = read_json(&ctx.ws.path(&e.path))?;
            r.scores.into_iter().take(10).map(|s| json!({"word": s.word, "D_c": s.cumulative})).collect()
        }
        None => Vec::new(),
    };
    let summary = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": ctx.ws.manifest().tool_version,
        "artifacts": artifacts,
        "top_shift": top_shift,
    });
    write_json(&ctx.ws.path(SUMMARY), &summary)?;
    ctx.record("report", "summary", SUMMARY, &json!({}))
}
