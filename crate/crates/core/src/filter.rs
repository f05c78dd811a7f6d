//! Seed-similarity corpus filtering and keyword frequency analysis.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::KeywordMatcher;
use crate::embed::{cosine, EmbedError, Embedder, EmbeddingVector};
use crate::ontology::{EventType, OntologySpec, Tier};
use crate::preprocess::CleanPost;

/// Default threshold for the built-in hashing embedder. Its similarities sit
/// far lower than a sentence-transformer's, so the two need different cuts.
pub const BUILTIN_DEFAULT_THRESHOLD: f64 = 0.35;
/// Default threshold for remote sentence-transformer providers.
pub const REMOTE_DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("no seed texts for event {0}")]
    MissingSeeds(EventType),
    #[error("threshold {0} outside [-1, 1]")]
    BadThreshold(f64),
}

/// Best-matching seed for one post.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterTag {
    #[serde(rename = "event")]
    pub best_event: EventType,
    pub score: f64,
}

/// A post together with its filter tag; serializes as the post's JSON object
/// plus a `"filter"` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedPost {
    #[serde(flatten)]
    pub post: CleanPost,
    #[serde(rename = "filter")]
    pub tag: FilterTag,
}

/// Embedded seed repository, one non-empty vector list per event.
#[derive(Debug, Clone)]
pub struct SeedVectors {
    by_event: BTreeMap<EventType, Vec<EmbeddingVector>>,
}

impl SeedVectors {
    pub fn new(by_event: BTreeMap<EventType, Vec<EmbeddingVector>>) -> Result<Self, FilterError> {
        for event in EventType::ALL {
            if by_event.get(&event).is_none_or(|v| v.is_empty()) {
                return Err(FilterError::MissingSeeds(event));
            }
        }
        Ok(SeedVectors { by_event })
    }

    /// Embeds every seed text of `spec` with `provider`.
    pub fn embed(spec: &OntologySpec, provider: &dyn Embedder) -> Result<Self, FilterError> {
        let mut by_event = BTreeMap::new();
        for event in EventType::ALL {
            let set = spec.seed_set(event).ok_or(FilterError::MissingSeeds(event))?;
            let texts: Vec<&str> = set.seeds.iter().map(String::as_str).collect();
            by_event.insert(event, provider.embed_texts(&texts)?);
        }
        Self::new(by_event)
    }

    pub fn get(&self, event: EventType) -> &[EmbeddingVector] {
        &self.by_event[&event]
    }
}

/// Maximum similarity over every seed of every event.
///
/// Ties keep the earliest (event, seed) pair in canonical event order, so a
/// post orthogonal to everything is tagged `infect` with score 0.
pub fn tag_post(seeds: &SeedVectors, post_vector: &EmbeddingVector) -> Result<FilterTag, FilterError> {
    let mut best: Option<FilterTag> = None;
    for event in EventType::ALL {
        for seed in seeds.get(event) {
            let score = cosine(seed, post_vector)?;
            if best.is_none_or(|b| score > b.score) {
                best = Some(FilterTag {
                    best_event: event,
                    score,
                });
            }
        }
    }
    Ok(best.expect("seed vectors are non-empty"))
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub retained: Vec<TaggedPost>,
    /// Tagged posts scoring below the threshold.
    pub rejected_count: usize,
    /// Posts skipped because preprocessing dropped them.
    pub dropped_count: usize,
}

/// Embedding-similarity filter bound to one provider and seed repository.
pub struct CorpusFilter<'a> {
    provider: &'a dyn Embedder,
    seeds: SeedVectors,
    threshold: f64,
}

impl<'a> CorpusFilter<'a> {
    pub fn new(spec: &OntologySpec, provider: &'a dyn Embedder, threshold: f64) -> Result<Self, FilterError> {
        if !(-1.0..=1.0).contains(&threshold) {
            return Err(FilterError::BadThreshold(threshold));
        }
        Ok(CorpusFilter {
            provider,
            seeds: SeedVectors::embed(spec, provider)?,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Tags every non-dropped post. Output order follows input order.
    pub fn tag_all(&self, posts: &[CleanPost]) -> Result<Vec<Option<FilterTag>>, FilterError> {
        let live: Vec<&str> = posts
            .iter()
            .filter(|p| !p.is_dropped())
            .map(|p| p.text.as_str())
            .collect();
        let vectors = self.provider.embed_texts(&live)?;
        let tags: Vec<FilterTag> = vectors
            .par_iter()
            .map(|v| tag_post(&self.seeds, v))
            .collect::<Result<_, _>>()?;
        let mut tags = tags.into_iter();
        Ok(posts
            .iter()
            .map(|p| if p.is_dropped() { None } else { tags.next() })
            .collect())
    }

    pub fn filter(&self, posts: Vec<CleanPost>) -> Result<FilterOutcome, FilterError> {
        let tags = self.tag_all(&posts)?;
        let mut outcome = FilterOutcome::default();
        for (post, tag) in posts.into_iter().zip(tags) {
            match tag {
                None => outcome.dropped_count += 1,
                Some(tag) if tag.score >= self.threshold => outcome.retained.push(TaggedPost { post, tag }),
                Some(_) => outcome.rejected_count += 1,
            }
        }
        Ok(outcome)
    }
}

/// Keeps posts whose best seed similarity reaches `threshold`.
pub fn filter_corpus(
    posts: Vec<CleanPost>,
    spec: &OntologySpec,
    provider: &dyn Embedder,
    threshold: f64,
) -> Result<FilterOutcome, FilterError> {
    CorpusFilter::new(spec, provider, threshold)?.filter(posts)
}

/// Per-event counts of posts containing at least one keyword of that event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub counts: BTreeMap<EventType, usize>,
    pub total_posts: usize,
}

impl FrequencyReport {
    pub fn empty() -> Self {
        FrequencyReport {
            counts: EventType::ALL.into_iter().map(|e| (e, 0)).collect(),
            total_posts: 0,
        }
    }

    pub fn merge(mut self, other: FrequencyReport) -> Self {
        for (event, n) in other.counts {
            *self.counts.entry(event).or_default() += n;
        }
        self.total_posts += other.total_posts;
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("event,count\n");
        for (event, n) in &self.counts {
            out.push_str(&format!("{event},{n}\n"));
        }
        out
    }
}

/// Counts, per event, the posts with at least one keyword hit (any tier).
/// Dropped posts are not counted and do not add to the total.
pub fn keyword_frequency(posts: &[CleanPost], spec: &OntologySpec) -> FrequencyReport {
    let matcher = KeywordMatcher::new(spec, Tier::Low);
    posts
        .par_iter()
        .filter(|p| !p.is_dropped())
        .map(|p| {
            let mut report = FrequencyReport::empty();
            report.total_posts = 1;
            for event in matcher.events_in(p) {
                *report.counts.get_mut(&event).unwrap() += 1;
            }
            report
        })
        .reduce(FrequencyReport::empty, FrequencyReport::merge)
}
