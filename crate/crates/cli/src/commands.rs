use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use epipulse_core::detect::{ExternalDetector, KeywordMatcher, PredictionSet};
use epipulse_core::embed::{
    EmbeddingProvider, ProviderConfig, ProviderKind, DEFAULT_MAX_IN_FLIGHT, DEFAULT_REMOTE_BATCH,
};
use epipulse_core::evaluate::{
    annotation_agreement, event_coverage, fleiss_kappa, score_with, GoldCorpus, GoldRecord, MatchMode,
};
use epipulse_core::filter::{keyword_frequency, CorpusFilter, FrequencyReport, TaggedPost};
use epipulse_core::monitor::{
    aggregate_daily, detect_event_warnings, detect_warnings, disease_profile, read_reported_cases,
    read_series_csv, write_rolling_csv, write_series_csv,
};
use epipulse_core::ontology::Tier;
use epipulse_core::preprocess::{normalize_post, timestamp, CleanPost, NormalizationPolicy, RawPost};
use epipulse_core::sample::{draw_sample, SamplingMode, SamplingPlan};
use epipulse_core::selfcheck;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{default_threshold, PipelineConfig, WarningSection};
use crate::io::{self, for_chunks, open_input, read_jsonl, write_json, write_text, Output};
use crate::{
    AggregateArgs, Command, CoverageArgs, DetectArgs, FilterArgs, KappaArgs, MatchArg, OffsetBase, PreprocessArgs,
    ProfileArgs, ProfileFormat, ReportFormat, SampleArgs, ScoreArgs, SelfcheckArgs, SpanCheck, WarnArgs,
};

pub fn dispatch(command: Command, config: &PipelineConfig) -> Result<ExitCode> {
    match command {
        Command::Preprocess(a) => preprocess(a, config),
        Command::Filter(a) => filter(a, config),
        Command::Sample(a) => sample(a, config),
        Command::Detect(a) => detect(a, config),
        Command::Score(a) => score(a, config),
        Command::Kappa(a) => kappa(a),
        Command::Coverage(a) => coverage(a, config),
        Command::Aggregate(a) => aggregate(a, config),
        Command::Warn(a) => warn_cmd(a, config),
        Command::Profile(a) => profile(a),
        Command::Selfcheck(a) => return selfcheck_cmd(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn preprocess(a: PreprocessArgs, config: &PipelineConfig) -> Result<()> {
    let mut policy = config.normalization;
    policy.english_only &= !a.keep_non_english;
    policy.remove_emoji &= !a.keep_emoji;
    policy.strip_retweets &= !a.keep_retweets;
    policy.anonymize &= !a.no_anonymize;
    policy.split_hashtags &= !a.no_hashtag_split;

    let mut out = Output::create(a.io.out.as_deref())?;
    let (mut total, mut dropped) = (0usize, 0usize);
    for_chunks(a.io.input.as_deref(), a.chunk as usize, |posts: Vec<RawPost>| {
        let clean: Vec<CleanPost> = posts.par_iter().map(|p| normalize_post(p, &policy)).collect();
        for post in &clean {
            dropped += post.is_dropped() as usize;
            out.jsonl(post)?;
        }
        total += clean.len();
        Ok(())
    })?;
    out.finish()?;
    info!("preprocess: {total} posts, {dropped} marked dropped");
    Ok(())
}

fn filter(a: FilterArgs, config: &PipelineConfig) -> Result<()> {
    let spec = config.ontology(a.ontology.as_deref())?;
    let e = &config.embedding;
    let kind = a.provider.map(ProviderKind::from).or(e.kind).unwrap_or(ProviderKind::BuiltinHash);
    let threshold = a.threshold.or(e.threshold).unwrap_or(default_threshold(kind));
    let provider_config = ProviderConfig {
        kind,
        dimension: a.dimension.or(e.dimension),
        endpoint: match kind {
            ProviderKind::Remote => config.embed_endpoint(a.endpoint.as_deref()),
            ProviderKind::BuiltinHash => None,
        },
    };
    let provider = match EmbeddingProvider::from_config(&provider_config)? {
        EmbeddingProvider::Remote(r) => EmbeddingProvider::Remote(
            r.with_max_in_flight(e.max_in_flight.unwrap_or(DEFAULT_MAX_IN_FLIGHT))
                .with_batch_size(e.batch_size.unwrap_or(DEFAULT_REMOTE_BATCH)),
        ),
        builtin => builtin,
    };
    let corpus_filter = CorpusFilter::new(&spec, &provider, threshold)?;
    info!("filter: provider {kind:?}, threshold {threshold}");

    let mut out = Output::create(a.io.out.as_deref())?;
    let mut freq = FrequencyReport::empty();
    let (mut kept, mut rejected, mut dropped) = (0usize, 0usize, 0usize);
    for_chunks(a.io.input.as_deref(), a.chunk as usize, |posts: Vec<CleanPost>| {
        freq = std::mem::replace(&mut freq, FrequencyReport::empty()).merge(keyword_frequency(&posts, &spec));
        let outcome = corpus_filter.filter(posts)?;
        for t in &outcome.retained {
            out.jsonl(t)?;
        }
        kept += outcome.retained.len();
        rejected += outcome.rejected_count;
        dropped += outcome.dropped_count;
        Ok(())
    })?;
    out.finish()?;
    info!("filter: {kept} retained, {rejected} rejected, {dropped} dropped upstream");

    if let Some(path) = &a.freq_json {
        write_json(Some(path), &freq)?;
    }
    if let Some(path) = &a.freq_csv {
        write_text(Some(path), &freq.to_csv())?;
    }
    Ok(())
}

fn sample(a: SampleArgs, config: &PipelineConfig) -> Result<()> {
    let s = &config.sampling;
    let Some(target_total) = a.n.or(s.target_total) else {
        bail!("sample size missing: pass --n or set sampling.target_total");
    };
    let plan = SamplingPlan {
        target_total,
        mode: a.mode.map(SamplingMode::from).or(s.mode).unwrap_or(SamplingMode::Uniform),
        rng_seed: a.seed.or(s.rng_seed).unwrap_or(0),
    };
    let pool: Vec<TaggedPost> = read_jsonl(a.io.input.as_deref())?;
    let drawn = draw_sample(&pool, &plan)?;
    let mut out = Output::create(a.io.out.as_deref())?;
    for t in &drawn {
        out.jsonl(t)?;
    }
    out.finish()?;
    info!("sample: {} of {} posts ({:?}, seed {})", drawn.len(), pool.len(), plan.mode, plan.rng_seed);
    Ok(())
}

fn detect(a: DetectArgs, config: &PipelineConfig) -> Result<()> {
    let d = &config.detection;
    let min_tier = a.min_tier.map(Tier::from).or(d.min_tier).unwrap_or(Tier::Low);
    let external = match a.endpoint.as_deref().or(d.endpoint.as_deref()) {
        Some(url) => {
            let name = a.name.as_deref().or(d.name.as_deref()).unwrap_or("external");
            Some(ExternalDetector::connect(url, name)?)
        }
        None => None,
    };
    let matcher = match external {
        Some(_) => None,
        None => Some(KeywordMatcher::new(&config.ontology(a.ontology.as_deref())?, min_tier)),
    };

    let mut out = Output::create(a.io.out.as_deref())?;
    let (mut posts_seen, mut skipped, mut mentions) = (0usize, 0usize, 0usize);
    for_chunks(a.io.input.as_deref(), a.chunk as usize, |posts: Vec<CleanPost>| {
        let n = posts.len();
        let live: Vec<CleanPost> = posts.into_iter().filter(|p| !p.is_dropped()).collect();
        posts_seen += n;
        skipped += n - live.len();
        let preds = match (&external, &matcher) {
            (Some(ext), _) => ext.detect(&live)?,
            (None, Some(m)) => live.par_iter().map(|p| m.detect(p)).collect(),
            (None, None) => unreachable!(),
        };
        for p in &preds {
            mentions += p.mentions.len();
            out.jsonl(p)?;
        }
        Ok(())
    })?;
    out.finish()?;
    info!("detect: {posts_seen} posts ({skipped} dropped upstream, skipped), {mentions} mentions");
    Ok(())
}

#[derive(Deserialize)]
struct TextRecord {
    id: String,
    text: String,
    #[serde(default)]
    lang: Option<String>,
}

/// Post texts keyed by id, in the form the gold offsets are said to index.
fn span_texts(check: &SpanCheck, policy: NormalizationPolicy) -> Result<Option<HashMap<String, String>>> {
    let Some(path) = &check.texts else {
        return Ok(None);
    };
    let records: Vec<TextRecord> = read_jsonl(Some(path))?;
    let policy = NormalizationPolicy {
        english_only: false,
        ..policy
    };
    let epoch = DateTime::<Utc>::UNIX_EPOCH;
    let texts = records
        .into_par_iter()
        .map(|r| {
            let text = match check.offset_base {
                OffsetBase::Raw => r.text,
                OffsetBase::Normalized => {
                    let raw = RawPost {
                        id: r.id.clone(),
                        created_at: epoch,
                        text: r.text,
                        lang: r.lang,
                    };
                    normalize_post(&raw, &policy).text
                }
            };
            (r.id, text)
        })
        .collect();
    Ok(Some(texts))
}

fn load_gold(flag: Option<&Path>, config: &PipelineConfig) -> Result<GoldCorpus> {
    let Some(path) = flag.or(config.io.gold.as_deref()) else {
        bail!("gold file missing: pass --gold or set io.gold");
    };
    load_gold_file(path)
}

fn load_gold_file(path: &Path) -> Result<GoldCorpus> {
    let records: Vec<GoldRecord> = read_jsonl(Some(path))?;
    GoldCorpus::from_records(records).with_context(|| format!("loading gold {}", path.display()))
}

fn check_spans(gold: &GoldCorpus, check: &SpanCheck, config: &PipelineConfig) -> Result<()> {
    if let Some(texts) = span_texts(check, config.normalization)? {
        gold.validate_spans(&texts)?;
        info!("all gold spans match their {:?} texts", check.offset_base);
    }
    Ok(())
}

fn score(a: ScoreArgs, config: &PipelineConfig) -> Result<()> {
    let gold = load_gold(a.gold.as_deref(), config)?;
    check_spans(&gold, &a.spans, config)?;
    let preds: Vec<PredictionSet> = read_jsonl(Some(&a.pred))?;
    let mode = match a.match_mode {
        MatchArg::Span => MatchMode::Span,
        MatchArg::Text => MatchMode::Text,
    };
    let report = score_with(&gold, &preds, mode)?;
    if report.tri_i.precision_undefined {
        warn!("no predicted mentions; precision reported as 0");
    }
    match a.format {
        ReportFormat::Json => write_json(a.out.as_deref(), &report),
        ReportFormat::Table => write_text(a.out.as_deref(), &report.to_table()),
    }
}

fn read_rating_table(path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open_input(Some(path))?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let parsed: Result<Vec<usize>, _> = rec.iter().map(str::parse::<usize>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{} line {}: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

fn kappa(a: KappaArgs) -> Result<()> {
    if let Some(path) = &a.table {
        let table = read_rating_table(path)?;
        let raters = match a.raters {
            Some(n) => n,
            None => table.first().map(|r| r.iter().sum()).unwrap_or(0),
        };
        let report = fleiss_kappa(&table, raters)?;
        return write_json(a.out.as_deref(), &report);
    }
    let corpora = a.annotations.iter().map(|p| load_gold_file(p)).collect::<Result<Vec<_>>>()?;
    let report = annotation_agreement(&corpora)?;
    write_json(a.out.as_deref(), &report)
}

#[derive(Deserialize)]
struct IdRecord {
    id: String,
}

#[derive(Serialize)]
struct CoverageReport {
    coverage: f64,
    universe_posts: usize,
    summary: epipulse_core::evaluate::CorpusSummary,
}

fn coverage(a: CoverageArgs, config: &PipelineConfig) -> Result<()> {
    let gold = load_gold(a.gold.as_deref(), config)?;
    check_spans(&gold, &a.spans, config)?;
    let universe: Vec<String> = match &a.universe {
        Some(path) => read_jsonl::<IdRecord>(Some(path))?.into_iter().map(|r| r.id).collect(),
        None => gold.iter().map(|(id, _)| id.to_string()).collect(),
    };
    let report = CoverageReport {
        coverage: event_coverage(&gold, &universe)?,
        universe_posts: universe.len(),
        summary: gold.summary(),
    };
    write_json(a.out.as_deref(), &report)
}

#[derive(Deserialize)]
struct TimeRecord {
    id: String,
    #[serde(with = "timestamp")]
    created_at: DateTime<Utc>,
}

fn aggregate(a: AggregateArgs, config: &PipelineConfig) -> Result<()> {
    let preds: Vec<PredictionSet> = read_jsonl(Some(&a.pred))?;
    let mut stamps = HashMap::new();
    for_chunks(Some(&a.posts), 4096, |records: Vec<TimeRecord>| {
        stamps.extend(records.into_iter().map(|r| (r.id, r.created_at)));
        Ok(())
    })?;
    let series = aggregate_daily(&preds, &stamps)?;

    let reported_path: Option<PathBuf> = a.reported.clone().or_else(|| config.io.reported_cases.clone());
    let reported = match &reported_path {
        Some(path) => Some(read_reported_cases(open_input(Some(path))?).with_context(|| format!("reading {}", path.display()))?),
        None => None,
    };
    let mut out = Output::create(a.out.as_deref())?;
    write_series_csv(&series, reported.as_ref(), &mut out)?;
    out.finish()?;

    if let Some(path) = &a.rolling_out {
        let w = a.window.unwrap_or_else(|| config.warning(&WarningSection::default()).w);
        let mut out = Output::create(Some(path))?;
        write_rolling_csv(&series, w, &mut out)?;
        out.finish()?;
    }
    info!(
        "aggregate: {} days from {}, {} mentions",
        series.len(),
        series.start_date.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
        series.total()
    );
    Ok(())
}

fn warn_cmd(a: WarnArgs, config: &PipelineConfig) -> Result<()> {
    let params = config.warning(&WarningSection {
        w: a.window,
        b: a.baseline,
        k: a.k,
        min_events: a.min_events,
        cooldown: a.cooldown,
    });
    params.validate()?;
    let series = read_series_csv(open_input(a.series.as_deref())?)
        .with_context(|| format!("reading {}", io::display(a.series.as_deref())))?;
    let signals = if a.event_wise {
        detect_event_warnings(&series, &params)?
    } else {
        detect_warnings(&series, &params)?
    };
    for s in &signals {
        let scope = s.event.map(|e| e.to_string()).unwrap_or_else(|| "overall".into());
        info!("warning: {scope} from {} to {} ({} days)", s.fired_on, s.last_fired_on, s.days_fired);
    }
    if signals.is_empty() {
        info!("no warnings");
    }
    write_json(a.out.as_deref(), &signals)
}

fn profile(a: ProfileArgs) -> Result<()> {
    let preds: Vec<PredictionSet> = read_jsonl(a.pred.as_deref())?;
    let profile = disease_profile(&preds);
    match a.format {
        ProfileFormat::Json => write_json(a.out.as_deref(), &profile),
        ProfileFormat::Csv => write_text(a.out.as_deref(), &profile.to_csv()),
    }
}

fn selfcheck_cmd(a: SelfcheckArgs) -> Result<ExitCode> {
    let results = selfcheck::run_all();
    if a.json {
        write_json(None, &results)?;
    } else {
        let mut text = String::new();
        for r in &results {
            let status = if r.passed { "PASS" } else { "FAIL" };
            text.push_str(&format!("{status} {}: {}\n", r.name, r.detail));
        }
        write_text(None, &text)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        log::error!("{failed} of {} checks failed", results.len());
        return Ok(ExitCode::from(1));
    }
    info!("all {} checks passed", results.len());
    Ok(ExitCode::SUCCESS)
}
