//! Command-line driver for evqa.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error or missing
//! input, 3 internal error. A run that completes with low scores exits 0.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use evqa::ingest::{self, FileKind};
use evqa::oracles::{self, OracleResult, VocabularyKind};
use evqa::{
    render_report, render_sweep, render_table, Dataset, Error, Format, NormalizationPolicy, OcrIndex,
    ScoringParams, Slice, SubmissionBundle, SweepParameter, Task, Tokenizer, ValidationMode,
    ValidationReport,
};
use serde_json::json;

pub const CONFIG_ENV: &str = "EVQA_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "evqa", version, about = "Evidence-based scene-text VQA evaluation")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Suppress warnings and progress output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Worker threads for scoring and oracle searches.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a ground-truth, submission or OCR file.
    Validate(ValidateArgs),
    /// Score a submission against the ground truth.
    Score(ScoreArgs),
    /// Run an oracle or baseline and write its submission file.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Score a submission over a grid of tau or theta values.
    Sweep(SweepArgs),
    /// Corpus statistics of a ground-truth file.
    Stats(StatsArgs),
    /// Run the submission server.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Answer similarity cut-off.
    #[arg(long, default_value_t = evqa::DEFAULT_TAU)]
    pub tau: f64,
    /// Evidence IoU threshold.
    #[arg(long, default_value_t = evqa::DEFAULT_THETA)]
    pub theta: f64,
    /// Compare answers case-sensitively.
    #[arg(long)]
    pub no_casefold: bool,
    /// Keep inner whitespace runs and edge whitespace as they are.
    #[arg(long)]
    pub keep_whitespace: bool,
}

impl ParamArgs {
    fn params(&self) -> Result<ScoringParams> {
        let mut p = ScoringParams::new(self.tau, self.theta)?;
        p.policy = NormalizationPolicy {
            casefold: !self.no_casefold,
            collapse_whitespace: !self.keep_whitespace,
            strip_edges: !self.keep_whitespace,
        };
        Ok(p)
    }
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub path: PathBuf,
    /// File kind; guessed from the top-level keys when omitted.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<Kind>,
    /// Ground truth, for checking a submission against the questions.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Task a submission is checked for; defaults to the file's own.
    #[arg(long)]
    pub task: Option<Task>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Gt,
    Submission,
    Ocr,
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    match s {
        "gt" | "dataset" => Ok(Kind::Gt),
        "submission" | "pred" => Ok(Kind::Submission),
        "ocr" => Ok(Kind::Ocr),
        other => Err(format!("unknown kind {other:?} (expected gt, submission or ocr)")),
    }
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Defaults to the task declared in the submission file.
    #[arg(long)]
    pub task: Option<Task>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// table, json or csv. `--json` implies json.
    #[arg(long, default_value = "table")]
    pub format: Format,
    /// Skip invalid predictions instead of rejecting the file.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Upper bound of a fixed answer vocabulary built from training answers.
    VocabUb {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "sv")]
        vocab: VocabularyKind,
        #[command(flatten)]
        common: OracleArgs,
    },
    /// Upper bound of answering from OCR tokens.
    OcrUb {
        #[arg(long)]
        ocr: PathBuf,
        /// Longest token sequence tried as an answer.
        #[arg(long, default_value_t = 4)]
        max_tokens: usize,
        #[command(flatten)]
        common: OracleArgs,
    },
    /// One random OCR token per question.
    Random {
        #[arg(long)]
        ocr: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: OracleArgs,
    },
    /// Add OCR-derived evidence to an answer-only submission.
    AttachEvidence {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        ocr: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: OracleArgs,
    },
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Where the generated submission file is written.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "clc")]
    pub task: Task,
    #[arg(long, default_value = "tau")]
    pub param: SweepParameter,
    /// Comma-separated, strictly increasing values in [0, 1].
    #[arg(long, value_delimiter = ',', conflicts_with = "steps")]
    pub grid: Option<Vec<f64>>,
    /// Evenly spaced grid 1/N, 2/N, ..., 1.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Slices written per grid value.
    #[arg(long, value_delimiter = ',', default_value = "bi_acc", value_parser = parse_slice)]
    pub slices: Vec<Slice>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub lenient: bool,
}

fn parse_slice(s: &str) -> Result<Slice, String> {
    Slice::parse(s).ok_or_else(|| format!("unknown slice {s:?}"))
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Word list (one per line) for Chinese segmentation.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = CONFIG_ENV)]
    pub config: PathBuf,
    /// Overrides the configured port.
    #[arg(long)]
    pub port: Option<u16>,
}

/// Failure category, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Usage(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Usage(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

/// Explicit usage problem raised by a command.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn classify_core(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::InvalidParameter(_) => 2,
        _ => 1,
    }
}

fn classify(err: &anyhow::Error) -> Failure {
    let msg = format!("{err:#}");
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return Failure::Usage(msg);
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if classify_core(e) == 2 { Failure::Usage(msg) } else { Failure::Validation(msg) };
        }
        if let Some(e) = cause.downcast_ref::<evqa_server::ServerError>() {
            return match e {
                evqa_server::ServerError::Config(_) => Failure::Usage(msg),
                evqa_server::ServerError::GroundTruth(inner) if classify_core(inner) == 1 => Failure::Validation(msg),
                _ => Failure::Usage(msg),
            };
        }
    }
    Failure::Internal(msg)
}

struct Ctx {
    json: bool,
    quiet: bool,
}

impl Ctx {
    fn warn(&self, report: &ValidationReport) {
        if self.quiet {
            return;
        }
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let ctx = Ctx {
        json: cli.json,
        quiet: cli.quiet,
    };
    match run(cli.command, &ctx) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let f = classify(&e);
            if ctx.json {
                let kind = match f {
                    Failure::Validation(_) => "validation",
                    Failure::Usage(_) => "usage",
                    Failure::Internal(_) => "internal",
                };
                let report = e.chain().find_map(|c| match c.downcast_ref::<Error>() {
                    Some(Error::Invalid(r)) => Some(r.as_ref().clone()),
                    _ => None,
                });
                println!("{}", json!({"error": kind, "message": f.to_string(), "report": report}));
            } else {
                eprintln!("error: {f}");
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command, ctx: &Ctx) -> Result<u8> {
    match command {
        Command::Validate(a) => validate(a, ctx),
        Command::Score(a) => score(a, ctx),
        Command::Oracle(c) => oracle(c, ctx),
        Command::Sweep(a) => sweep(a, ctx),
        Command::Stats(a) => stats(a, ctx),
        Command::Serve(a) => serve(a, ctx),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn load_gt(path: &Path, ctx: &Ctx) -> Result<Dataset> {
    let (dataset, report) = evqa::load_dataset(path, ValidationMode::Strict)
        .with_context(|| format!("ground truth {}", path.display()))?;
    ctx.warn(&report);
    Ok(dataset)
}

fn load_ocr(path: &Path, ctx: &Ctx) -> Result<OcrIndex> {
    let (ocr, report) = evqa::load_ocr(path).with_context(|| format!("OCR file {}", path.display()))?;
    ctx.warn(&report);
    Ok(ocr)
}

fn declared_task(text: &str) -> Result<Task> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    v.get("task")
        .and_then(|t| t.as_str())
        .ok_or_else(|| anyhow::Error::new(Usage("submission has no task field; pass --task".into())))?
        .parse::<Task>()
        .map_err(Into::into)
}

fn load_pred(
    path: &Path,
    dataset: &Dataset,
    task: Option<Task>,
    mode: ValidationMode,
    ctx: &Ctx,
) -> Result<(SubmissionBundle, Task)> {
    let text = read(path)?;
    let task = match task {
        Some(t) => t,
        None => declared_task(&text)?,
    };
    let (bundle, report) = ingest::parse_submission(&text, Some(dataset), task, mode)
        .with_context(|| format!("submission {}", path.display()))?;
    ctx.warn(&report);
    Ok((bundle, task))
}

fn print_validation(report: &ValidationReport, kind: &str, ctx: &Ctx) {
    if ctx.json {
        println!("{}", json!({"kind": kind, "valid": report.is_clean(), "report": report}));
    } else if !ctx.quiet || !report.is_clean() {
        println!("{kind}\n{report}");
    }
}

fn validate(a: ValidateArgs, ctx: &Ctx) -> Result<u8> {
    let text = read(&a.path)?;
    let kind = match a.kind {
        Some(k) => k,
        None => match ingest::sniff_kind(&text)? {
            FileKind::Dataset => Kind::Gt,
            FileKind::Submission => Kind::Submission,
            FileKind::Ocr => Kind::Ocr,
        },
    };
    let (label, result) = match kind {
        Kind::Gt => ("ground truth", ingest::parse_dataset(&text, ValidationMode::Strict).map(|(_, r)| r)),
        Kind::Ocr => ("ocr", ingest::parse_ocr(&text).map(|(_, r)| r)),
        Kind::Submission => {
            let dataset = a.gt.as_deref().map(|p| load_gt(p, ctx)).transpose()?;
            let task = match a.task {
                Some(t) => t,
                None => declared_task(&text)?,
            };
            (
                "submission",
                ingest::parse_submission(&text, dataset.as_ref(), task, ValidationMode::Strict).map(|(_, r)| r),
            )
        }
    };
    match result {
        Ok(report) => {
            print_validation(&report, label, ctx);
            Ok(0)
        }
        Err(Error::Invalid(report)) => {
            print_validation(&report, label, ctx);
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn mode(lenient: bool) -> ValidationMode {
    if lenient {
        ValidationMode::Lenient
    } else {
        ValidationMode::Strict
    }
}

fn score(a: ScoreArgs, ctx: &Ctx) -> Result<u8> {
    let params = a.params.params()?;
    let dataset = load_gt(&a.gt, ctx)?;
    let (bundle, task) = load_pred(&a.pred, &dataset, a.task, mode(a.lenient), ctx)?;
    let report = evqa::score(task, &dataset, &bundle, &params)?;
    let format = if ctx.json { Format::Json } else { a.format };
    print!("{}", with_newline(render_report(&report, format)));
    Ok(0)
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn print_oracle(result: &OracleResult, out: &Path, ctx: &Ctx) {
    if ctx.json {
        let v = json!({
            "name": result.name,
            "header": result.header,
            "submission": out,
            "tc": result.tc,
            "lc": result.lc,
            "clc": result.clc,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        return;
    }
    let rows = [result.tc.clone(), result.lc.clone(), result.clc.clone()];
    print!("{}", with_newline(render_table(&rows)));
    if !ctx.quiet {
        for (k, v) in &result.header {
            println!("{k}: {v}");
        }
        println!("submission written to {}", out.display());
    }
}

fn write_bundle(bundle: &SubmissionBundle, out: &Path) -> Result<()> {
    std::fs::write(out, bundle.to_json()).with_context(|| format!("cannot write {}", out.display()))
}

fn oracle(c: OracleCommand, ctx: &Ctx) -> Result<u8> {
    let (common, result) = match c {
        OracleCommand::VocabUb { train, vocab, common } => {
            let params = common.params.params()?;
            let dataset = load_gt(&common.gt, ctx)?;
            let train = load_gt(&train, ctx)?;
            let v = oracles::build_vocabulary(&oracles::training_answers(&train), vocab, &params.policy);
            let r = oracles::vocab_upper_bound(&v, &dataset, &params)?;
            (common, r)
        }
        OracleCommand::OcrUb { ocr, max_tokens, common } => {
            let params = common.params.params()?;
            let dataset = load_gt(&common.gt, ctx)?;
            let ocr = load_ocr(&ocr, ctx)?;
            let r = oracles::ocr_upper_bound(&ocr, &dataset, &params, max_tokens)?;
            (common, r)
        }
        OracleCommand::Random { ocr, seed, common } => {
            let params = common.params.params()?;
            let dataset = load_gt(&common.gt, ctx)?;
            let ocr = load_ocr(&ocr, ctx)?;
            let r = oracles::random_baseline(&ocr, &dataset, seed, &params)?;
            (common, r)
        }
        OracleCommand::AttachEvidence { pred, ocr, seed, common } => {
            let params = common.params.params()?;
            let dataset = load_gt(&common.gt, ctx)?;
            let ocr = load_ocr(&ocr, ctx)?;
            let (bundle, task) = load_pred(&pred, &dataset, None, ValidationMode::Lenient, ctx)?;
            let out = oracles::attach_evidence_bundle(&bundle, &dataset, &ocr, seed, &params.policy);
            write_bundle(&out, &common.out)?;
            let report = evqa::score(Task::Clc, &dataset, &out, &params)
                .or_else(|_| evqa::score(task, &dataset, &out, &params))?;
            let format = if ctx.json { Format::Json } else { Format::Table };
            print!("{}", with_newline(render_report(&report, format)));
            return Ok(0);
        }
    };
    write_bundle(&result.bundle, &common.out)?;
    print_oracle(&result, &common.out, ctx);
    Ok(0)
}

fn sweep(a: SweepArgs, ctx: &Ctx) -> Result<u8> {
    let params = a.params.params()?;
    let grid = match a.grid {
        Some(g) => g,
        None => {
            if a.steps == 0 {
                return Err(Usage("--steps must be at least 1".into()).into());
            }
            (1..=a.steps).map(|i| i as f64 / a.steps as f64).collect()
        }
    };
    evqa::scoring::validate_grid(&grid)?;
    let dataset = load_gt(&a.gt, ctx)?;
    let (bundle, _) = load_pred(&a.pred, &dataset, Some(a.task), mode(a.lenient), ctx)?;
    let points = evqa::sweep(&dataset, &bundle, a.task, a.param, &grid, &params)?;
    let format = if ctx.json { Format::Json } else { Format::Csv };
    print!("{}", with_newline(render_sweep(&points, a.param, &a.slices, format)));
    Ok(0)
}

fn histogram(title: &str, h: &std::collections::BTreeMap<usize, usize>) {
    let max = h.values().copied().max().unwrap_or(0).max(1);
    println!("  {title}");
    for (len, n) in h {
        let bar = "#".repeat((n * 40).div_ceil(max));
        println!("    {len:>3} {n:>6} {bar}");
    }
}

fn stats(a: StatsArgs, ctx: &Ctx) -> Result<u8> {
    let dataset = load_gt(&a.gt, ctx)?;
    let tokenizer = match &a.lexicon {
        Some(p) => Tokenizer::with_lexicon(read(p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from)),
        None => Tokenizer::default(),
    };
    let stats = evqa::corpus_stats(&dataset, &tokenizer);
    if ctx.json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("json"));
        return Ok(0);
    }
    println!("{:<8} {:>8} {:>10}", "language", "images", "questions");
    for (lang, s) in &stats.languages {
        println!("{:<8} {:>8} {:>10}", lang.to_string(), s.images, s.questions);
    }
    println!("{:<8} {:>8} {:>10}", "total", stats.total_images(), stats.total_questions());
    if ctx.quiet {
        return Ok(0);
    }
    for (lang, s) in &stats.languages {
        println!();
        println!("[{lang}]");
        histogram("question length (words)", &s.question_length);
        histogram("answer length (tokens)", &s.answer_length);
        let mut firsts: Vec<(&String, usize)> = s.prefixes.children.iter().map(|(w, t)| (w, t.count)).collect();
        firsts.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
        println!("  first words");
        for (w, n) in firsts.into_iter().take(10) {
            println!("    {w:<16} {n}");
        }
    }
    Ok(0)
}

fn serve(a: ServeArgs, ctx: &Ctx) -> Result<u8> {
    let mut config = evqa_server::ServerConfig::load(&a.config)?;
    if let Some(port) = a.port {
        config.port = port;
    }
    let level = if ctx.quiet {
        tracing_subscriber::filter::LevelFilter::WARN
    } else {
        tracing_subscriber::filter::LevelFilter::INFO
    };
    let _ = tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).try_init();
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let server = evqa_server::Server::bind(config).await?;
        let addr = server.local_addr()?;
        if ctx.json {
            println!("{}", json!({"listening": addr.to_string()}));
        } else {
            println!("listening on {addr}");
        }
        server.run().await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(0)
}
