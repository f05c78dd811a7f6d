mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epipulse_core::detect::DetectError;
use epipulse_core::embed::{EmbedError, ProviderKind};
use epipulse_core::jsonl::JsonlError;
use epipulse_core::ontology::Tier;
use epipulse_core::sample::SamplingMode;

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "epipulse", version, about = "Epidemic event extraction and early warning over social-media posts")]
struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: number of cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize raw posts (JSONL) into clean posts (JSONL).
    Preprocess(PreprocessArgs),
    /// Keep posts similar to an event seed; tags each with its best event.
    Filter(FilterArgs),
    /// Draw an event-balanced or plain random sample of filtered posts.
    Sample(SampleArgs),
    /// Run the keyword detector, or an external detector, over clean posts.
    Detect(DetectArgs),
    /// Score predictions against gold annotations (Tri-I / Tri-C).
    Score(ScoreArgs),
    /// Fleiss' kappa from a rating table or from per-annotator gold files.
    Kappa(KappaArgs),
    /// Share of posts carrying at least one gold mention, plus a corpus summary.
    Coverage(CoverageArgs),
    /// Bucket predictions into a daily per-event count series (CSV).
    Aggregate(AggregateArgs),
    /// Raise early warnings from a daily series.
    Warn(WarnArgs),
    /// Percentage of mentions per event type.
    Profile(ProfileArgs),
    /// Run the bundled worked examples.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args, Debug)]
struct InOut {
    /// Input file ("-" or absent: stdin).
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output file ("-" or absent: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long)]
    keep_non_english: bool,
    #[arg(long)]
    keep_emoji: bool,
    #[arg(long)]
    keep_retweets: bool,
    #[arg(long)]
    no_anonymize: bool,
    #[arg(long)]
    no_hashtag_split: bool,
    /// Posts held in memory at a time.
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    chunk: u64,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, value_name = "FILE")]
    ontology: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Embedding service URL (falls back to the config, then EPIPULSE_EMBED_ENDPOINT).
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    #[arg(long)]
    dimension: Option<usize>,
    /// Similarity cut; defaults to 0.35 for builtin-hash and 0.9 for remote.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Keyword frequency report as JSON.
    #[arg(long, value_name = "FILE")]
    freq_json: Option<PathBuf>,
    /// Keyword frequency report as CSV (event,count).
    #[arg(long, value_name = "FILE")]
    freq_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    chunk: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProviderArg {
    BuiltinHash,
    Remote,
}

impl From<ProviderArg> for ProviderKind {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::BuiltinHash => ProviderKind::BuiltinHash,
            ProviderArg::Remote => ProviderKind::Remote,
        }
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Uniform,
    Random,
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => SamplingMode::Uniform,
            ModeArg::Random => SamplingMode::Random,
        }
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, value_name = "FILE")]
    ontology: Option<PathBuf>,
    /// Lowest keyword tier used (default low).
    #[arg(long, value_enum)]
    min_tier: Option<TierArg>,
    /// External detector URL; when set the keyword detector is not used.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Detector name recorded for external predictions.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    chunk: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TierArg {
    Low,
    Medium,
    High,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Self {
        match t {
            TierArg::Low => Tier::Low,
            TierArg::Medium => Tier::Medium,
            TierArg::High => Tier::High,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OffsetBase {
    /// Offsets index the text as posted.
    Raw,
    /// Offsets index the text after preprocessing.
    Normalized,
}

#[derive(Args, Debug)]
struct SpanCheck {
    /// Raw posts (JSONL) to validate gold spans against.
    #[arg(long, value_name = "FILE")]
    texts: Option<PathBuf>,
    /// Which text the gold offsets index.
    #[arg(long, value_enum, default_value = "normalized", requires = "texts")]
    offset_base: OffsetBase,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[arg(long = "match", value_enum, default_value = "span")]
    match_mode: MatchArg,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
    #[command(flatten)]
    spans: SpanCheck,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MatchArg {
    Span,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["table", "annotations"])))]
struct KappaArgs {
    /// CSV rating table: one row per item, one column per category, cells
    /// are rater counts. A non-numeric first row is taken as a header.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Raters per item; inferred from the first row when absent.
    #[arg(long, requires = "table")]
    raters: Option<usize>,
    /// Gold-format annotation files, one per annotator, over the same posts.
    #[arg(long, value_name = "FILE", num_args = 2..)]
    annotations: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[arg(long, value_name = "FILE")]
    gold: Option<PathBuf>,
    /// Posts (JSONL with an "id" field) making up the universe; defaults to
    /// the gold posts themselves.
    #[arg(long, value_name = "FILE")]
    universe: Option<PathBuf>,
    #[command(flatten)]
    spans: SpanCheck,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AggregateArgs {
    /// Predictions (JSONL).
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Posts (JSONL) supplying each prediction's timestamp.
    #[arg(long, value_name = "FILE")]
    posts: PathBuf,
    /// Series CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Officially reported cases (CSV date,cases) joined as an extra column.
    #[arg(long, value_name = "FILE")]
    reported: Option<PathBuf>,
    /// Rolling-mean CSV.
    #[arg(long, value_name = "FILE")]
    rolling_out: Option<PathBuf>,
    /// Rolling window; defaults to the warning window.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug)]
struct WarnArgs {
    /// Series CSV as written by `aggregate`.
    #[arg(long, value_name = "FILE")]
    series: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Run the rule on each event's series instead of the overall count.
    #[arg(long)]
    event_wise: bool,
    /// Rolling window w.
    #[arg(long)]
    window: Option<usize>,
    /// Baseline length b.
    #[arg(long)]
    baseline: Option<usize>,
    /// Threshold in baseline standard deviations.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long)]
    min_events: Option<u64>,
    #[arg(long)]
    cooldown: Option<usize>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long, value_name = "FILE")]
    pred: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ProfileFormat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[arg(long)]
    json: bool,
}

/// Exit status for an error: 2 when the cause is I/O or a remote endpoint,
/// 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<std::io::Error>() || cause.is::<DetectError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<EmbedError>() {
            if matches!(
                e,
                EmbedError::Unreachable { .. } | EmbedError::Protocol { .. } | EmbedError::RemoteDimension { .. }
            ) {
                return 2;
            }
        }
        if let Some(JsonlError::Io(_)) = cause.downcast_ref::<JsonlError>() {
            return 2;
        }
    }
    1
}

// a downstream reader such as `head` closing early is not a failure
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "info" }))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    match run(cli) {
        Ok(code) => code,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n > 0, "--workers must be positive");
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| commands::dispatch(cli.command, &config))
}
