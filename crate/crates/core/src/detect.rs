//! Trigger-level event detection: the curated-keyword baseline and a client
//! for external detectors that speak the JSON detector protocol.
//!
//! Detector protocol:
//!
//! * `GET {endpoint}/health` → any 2xx response
//! * `POST {endpoint}/detect` with `{"posts": [{"id", "text"}]}` →
//!   `{"predictions": [{"id", "mentions": [{"type", "start", "end", "text"}]}]}`

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounded::run_in_order;
use crate::ontology::{EventType, OntologySpec, Tier};
use crate::preprocess::CleanPost;
use crate::text::{char_len, char_slice};

pub const KEYWORD_DETECTOR: &str = "keyword";
pub const DEFAULT_DETECT_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("span ({start},{end}) is empty or reversed")]
    Empty { start: usize, end: usize },
    #[error("span ({start},{end}) exceeds text length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("span ({start},{end}) covers {actual:?}, not {surface:?}")]
    Mismatch {
        start: usize,
        end: usize,
        surface: String,
        actual: String,
    },
}

/// A trigger location: 0-based half-open character offsets plus the text
/// they cover.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriggerSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl TriggerSpan {
    /// Builds a span by slicing `text`.
    pub fn from_text(text: &str, start: usize, end: usize) -> Result<Self, SpanError> {
        if start >= end {
            return Err(SpanError::Empty { start, end });
        }
        let surface = char_slice(text, start, end).ok_or(SpanError::OutOfBounds {
            start,
            end,
            len: char_len(text),
        })?;
        Ok(TriggerSpan {
            start,
            end,
            surface: surface.to_string(),
        })
    }

    /// Checks that this span really covers `surface` in `text`.
    pub fn validate(&self, text: &str) -> Result<(), SpanError> {
        let actual = Self::from_text(text, self.start, self.end)?;
        if actual.surface != self.surface {
            return Err(SpanError::Mismatch {
                start: self.start,
                end: self.end,
                surface: self.surface.clone(),
                actual: actual.surface,
            });
        }
        Ok(())
    }
}

/// One typed trigger. On the wire: `{"type", "start", "end", "text"}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "MentionWire", into = "MentionWire")]
pub struct EventMention {
    pub event: EventType,
    pub trigger: TriggerSpan,
}

impl EventMention {
    pub fn new(event: EventType, start: usize, end: usize, surface: impl Into<String>) -> Self {
        EventMention {
            event,
            trigger: TriggerSpan {
                start,
                end,
                surface: surface.into(),
            },
        }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.trigger.start, self.trigger.end)
    }
}

#[derive(Serialize, Deserialize)]
struct MentionWire {
    #[serde(rename = "type")]
    event: EventType,
    start: usize,
    end: usize,
    text: String,
}

impl From<MentionWire> for EventMention {
    fn from(w: MentionWire) -> Self {
        EventMention::new(w.event, w.start, w.end, w.text)
    }
}

impl From<EventMention> for MentionWire {
    fn from(m: EventMention) -> Self {
        MentionWire {
            event: m.event,
            start: m.trigger.start,
            end: m.trigger.end,
            text: m.trigger.surface,
        }
    }
}

/// Sorts by (start, event, end) and drops repeated (event, start, end) triples.
pub fn canonicalize_mentions(mentions: &mut Vec<EventMention>) {
    mentions.sort_by(|a, b| {
        (a.trigger.start, a.event, a.trigger.end).cmp(&(b.trigger.start, b.event, b.trigger.end))
    });
    mentions.dedup_by(|a, b| a.event == b.event && a.span() == b.span());
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    #[serde(rename = "id")]
    pub post_id: String,
    pub mentions: Vec<EventMention>,
    #[serde(default)]
    pub detector: String,
}

impl PredictionSet {
    pub fn new(post_id: impl Into<String>, mut mentions: Vec<EventMention>, detector: impl Into<String>) -> Self {
        canonicalize_mentions(&mut mentions);
        PredictionSet {
            post_id: post_id.into(),
            mentions,
            detector: detector.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct TokenCore {
    lower: String,
    start: usize,
    end: usize,
    /// Core reaches the token's first / last character.
    open_left: bool,
    open_right: bool,
}

fn token_cores(post: &CleanPost) -> Vec<(Option<TokenCore>, TokenCore)> {
    post.tokens
        .iter()
        .filter_map(|tok| {
            let chars: Vec<char> = tok.surface.chars().collect();
            let lead = chars.iter().take_while(|c| !c.is_alphanumeric()).count();
            if lead == chars.len() {
                return None;
            }
            let trail = chars.iter().rev().take_while(|c| !c.is_alphanumeric()).count();
            let core: String = chars[lead..chars.len() - trail].iter().collect();
            let trimmed = TokenCore {
                lower: core.to_lowercase(),
                start: tok.start + lead,
                end: tok.end - trail,
                open_left: lead == 0,
                open_right: trail == 0,
            };
            let whole = (lead > 0 || trail > 0).then(|| TokenCore {
                lower: tok.surface.to_lowercase(),
                start: tok.start,
                end: tok.end,
                open_left: true,
                open_right: true,
            });
            Some((whole, trimmed))
        })
        .collect()
}

/// Case-insensitive, word-boundary keyword matching over a post's tokens.
///
/// A token matches when its lowercase form equals a keyword, either whole or
/// with leading/trailing punctuation trimmed (`fever,` matches `fever` and
/// the span covers only `fever`). Two-word keywords match adjacent tokens
/// with no punctuation between them. A token matching keywords of several
/// events yields one mention per event.
#[derive(Debug, Clone)]
pub struct KeywordMatcher {
    min_tier: Tier,
    single: HashMap<String, Vec<EventType>>,
    pairs: HashMap<String, Vec<EventType>>,
}

impl KeywordMatcher {
    pub fn new(spec: &OntologySpec, min_tier: Tier) -> Self {
        let mut single: HashMap<String, Vec<EventType>> = HashMap::new();
        let mut pairs: HashMap<String, Vec<EventType>> = HashMap::new();
        for kw in spec.keywords().iter().filter(|k| k.tier >= min_tier) {
            let table = if kw.word_count() == 1 { &mut single } else { &mut pairs };
            table.entry(kw.surface.clone()).or_default().push(kw.event);
        }
        KeywordMatcher {
            min_tier,
            single,
            pairs,
        }
    }

    pub fn min_tier(&self) -> Tier {
        self.min_tier
    }

    pub fn find(&self, post: &CleanPost) -> Vec<EventMention> {
        let cores = token_cores(post);
        let mut mentions = Vec::new();
        let mut push = |events: &[EventType], start: usize, end: usize| {
            let span = TriggerSpan::from_text(&post.text, start, end)
                .expect("token offsets lie inside the post text");
            for &event in events {
                mentions.push(EventMention {
                    event,
                    trigger: span.clone(),
                });
            }
        };

        for (whole, core) in &cores {
            for cand in whole.iter().chain(std::iter::once(core)) {
                if let Some(events) = self.single.get(&cand.lower) {
                    push(events, cand.start, cand.end);
                }
            }
        }
        if !self.pairs.is_empty() {
            for pair in cores.windows(2) {
                let (left, right) = (&pair[0].1, &pair[1].1);
                if left.open_right && right.open_left {
                    let key = format!("{} {}", left.lower, right.lower);
                    if let Some(events) = self.pairs.get(&key) {
                        push(events, left.start, right.end);
                    }
                }
            }
        }
        canonicalize_mentions(&mut mentions);
        mentions
    }

    /// Events with at least one keyword hit in `post`.
    pub fn events_in(&self, post: &CleanPost) -> BTreeSet<EventType> {
        self.find(post).into_iter().map(|m| m.event).collect()
    }

    /// Keyword predictions for one post. Dropped posts get an empty set.
    pub fn detect(&self, post: &CleanPost) -> PredictionSet {
        let mentions = if post.is_dropped() { Vec::new() } else { self.find(post) };
        PredictionSet {
            post_id: post.id.clone(),
            mentions,
            detector: KEYWORD_DETECTOR.to_string(),
        }
    }
}

/// Keyword baseline for a single post.
pub fn detect_keyword(post: &CleanPost, spec: &OntologySpec, min_tier: Tier) -> PredictionSet {
    KeywordMatcher::new(spec, min_tier).detect(post)
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("detector unreachable at {endpoint}: {message}")]
    Unreachable { endpoint: String, message: String },
    #[error("detector protocol violation: {0}")]
    Protocol(String),
    #[error("detector returned a bad span for post {post_id}")]
    BadSpan {
        post_id: String,
        #[source]
        source: SpanError,
    },
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    posts: Vec<DetectPost<'a>>,
}

#[derive(Serialize)]
struct DetectPost<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct DetectResponse {
    predictions: Vec<RemotePrediction>,
}

#[derive(Deserialize)]
struct RemotePrediction {
    id: String,
    mentions: Vec<RemoteMention>,
}

// Event type stays a string so an unknown label becomes a protocol error
// rather than an opaque decode failure.
#[derive(Deserialize)]
struct RemoteMention {
    #[serde(rename = "type")]
    event: String,
    start: usize,
    end: usize,
    text: String,
}

/// Client for an external trigger detector.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    endpoint: String,
    name: String,
    max_in_flight: usize,
    batch_size: usize,
}

impl ExternalDetector {
    pub fn connect(endpoint: &str, name: &str) -> Result<Self, DetectError> {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        ureq::get(&format!("{endpoint}/health"))
            .call()
            .map_err(|e| DetectError::Unreachable {
                endpoint: endpoint.clone(),
                message: e.to_string(),
            })?;
        Ok(ExternalDetector {
            endpoint,
            name: name.to_string(),
            max_in_flight: crate::embed::DEFAULT_MAX_IN_FLIGHT,
            batch_size: DEFAULT_DETECT_BATCH,
        })
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    /// One prediction set per input post, in input order. Dropped posts are
    /// not sent and get an empty set.
    pub fn detect(&self, posts: &[CleanPost]) -> Result<Vec<PredictionSet>, DetectError> {
        let live: Vec<&CleanPost> = posts.iter().filter(|p| !p.is_dropped()).collect();
        let batches: Vec<&[&CleanPost]> = live.chunks(self.batch_size).collect();
        let outcomes = run_in_order(batches.len(), self.max_in_flight, |i| self.detect_batch(batches[i]));

        let mut by_id: HashMap<String, PredictionSet> = HashMap::new();
        for outcome in outcomes {
            for set in outcome? {
                by_id.insert(set.post_id.clone(), set);
            }
        }
        Ok(posts
            .iter()
            .map(|p| {
                by_id
                    .remove(&p.id)
                    .unwrap_or_else(|| PredictionSet::new(p.id.clone(), Vec::new(), self.name.clone()))
            })
            .collect())
    }

    fn detect_batch(&self, batch: &[&CleanPost]) -> Result<Vec<PredictionSet>, DetectError> {
        let request = DetectRequest {
            posts: batch
                .iter()
                .map(|p| DetectPost {
                    id: &p.id,
                    text: &p.text,
                })
                .collect(),
        };
        let response: DetectResponse = ureq::post(&format!("{}/detect", self.endpoint))
            .send_json(&request)
            .map_err(|e| DetectError::Unreachable {
                endpoint: self.endpoint.clone(),
                message: e.to_string(),
            })?
            .body_mut()
            .read_json()
            .map_err(|e| DetectError::Protocol(format!("bad /detect body: {e}")))?;

        let mut returned: HashMap<String, Vec<RemoteMention>> = HashMap::new();
        for pred in response.predictions {
            if returned.insert(pred.id.clone(), pred.mentions).is_some() {
                return Err(DetectError::Protocol(format!("post {} predicted twice", pred.id)));
            }
        }
        if returned.len() != batch.len() {
            return Err(DetectError::Protocol(format!(
                "sent {} posts, got predictions for {}",
                batch.len(),
                returned.len()
            )));
        }

        batch
            .iter()
            .map(|post| {
                let raw = returned.remove(&post.id).ok_or_else(|| {
                    DetectError::Protocol(format!("no prediction for post {}", post.id))
                })?;
                let mut mentions = Vec::with_capacity(raw.len());
                for m in raw {
                    let event = m.event.parse::<EventType>().map_err(|e| {
                        DetectError::Protocol(format!("post {}: {e}", post.id))
                    })?;
                    let trigger = TriggerSpan {
                        start: m.start,
                        end: m.end,
                        surface: m.text,
                    };
                    trigger.validate(&post.text).map_err(|source| DetectError::BadSpan {
                        post_id: post.id.clone(),
                        source,
                    })?;
                    mentions.push(EventMention { event, trigger });
                }
                Ok(PredictionSet::new(post.id.clone(), mentions, self.name.clone()))
            })
            .collect()
    }
}

/// Runs an external detector over `posts`.
pub fn detect_external(
    posts: &[CleanPost],
    endpoint: &str,
    detector_name: &str,
) -> Result<Vec<PredictionSet>, DetectError> {
    ExternalDetector::connect(endpoint, detector_name)?.detect(posts)
}
