//! Trigger identification / classification scoring, Fleiss' kappa and
//! ontology coverage.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{canonicalize_mentions, EventMention, PredictionSet, SpanError};
use crate::ontology::EventType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for unknown post {0:?}")]
    UnknownPost(String),
    #[error("post {0:?} has more than one prediction set")]
    DuplicatePrediction(String),
    #[error("gold post {0:?} listed twice")]
    DuplicateGold(String),
    #[error("gold post {0:?} repeats the mention {1:?}")]
    DuplicateMention(String, (EventType, usize, usize)),
    #[error("gold span mismatch for post {post_id}")]
    Span {
        post_id: String,
        #[source]
        source: SpanError,
    },
    #[error("gold post {0:?} has no text to validate against")]
    MissingText(String),
    #[error("gold post {0:?} is not in the universe")]
    OutsideUniverse(String),
    #[error("universe is empty")]
    EmptyUniverse,
    #[error("rating table has no items")]
    NoItems,
    #[error("rating table needs at least two categories, got {0}")]
    TooFewCategories(usize),
    #[error("need at least two raters per item, got {0}")]
    TooFewRaters(usize),
    #[error("item {item} has {got} ratings, expected {expected}")]
    RowSum { item: usize, got: usize, expected: usize },
    #[error("item {item} has {got} categories, expected {expected}")]
    RaggedRow { item: usize, got: usize, expected: usize },
    #[error("rater {0} does not annotate the same posts as rater 0")]
    RaterMismatch(usize),
}

/// One gold record on disk: `{"id", "mentions": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub mentions: Vec<EventMention>,
}

/// Gold annotations keyed by post id. Posts without events are present with
/// an empty list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldCorpus {
    annotations: BTreeMap<String, Vec<EventMention>>,
}

impl GoldCorpus {
    pub fn from_records(records: impl IntoIterator<Item = GoldRecord>) -> Result<Self, EvalError> {
        let mut annotations = BTreeMap::new();
        for rec in records {
            let mut seen = HashSet::new();
            for m in &rec.mentions {
                if m.trigger.start >= m.trigger.end {
                    return Err(EvalError::Span {
                        post_id: rec.id.clone(),
                        source: SpanError::Empty {
                            start: m.trigger.start,
                            end: m.trigger.end,
                        },
                    });
                }
                if !seen.insert((m.event, m.trigger.start, m.trigger.end)) {
                    return Err(EvalError::DuplicateMention(
                        rec.id.clone(),
                        (m.event, m.trigger.start, m.trigger.end),
                    ));
                }
            }
            let mut mentions = rec.mentions;
            canonicalize_mentions(&mut mentions);
            if annotations.insert(rec.id.clone(), mentions).is_some() {
                return Err(EvalError::DuplicateGold(rec.id));
            }
        }
        Ok(GoldCorpus { annotations })
    }

    pub fn get(&self, post_id: &str) -> Option<&[EventMention]> {
        self.annotations.get(post_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[EventMention])> {
        self.annotations.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn records(&self) -> Vec<GoldRecord> {
        self.iter()
            .map(|(id, m)| GoldRecord {
                id: id.to_string(),
                mentions: m.to_vec(),
            })
            .collect()
    }

    /// Checks every span against the post text it indexes.
    pub fn validate_spans(&self, texts: &HashMap<String, String>) -> Result<(), EvalError> {
        for (id, mentions) in self.iter() {
            if mentions.is_empty() {
                continue;
            }
            let text = texts.get(id).ok_or_else(|| EvalError::MissingText(id.to_string()))?;
            for m in mentions {
                m.trigger.validate(text).map_err(|source| EvalError::Span {
                    post_id: id.to_string(),
                    source,
                })?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> CorpusSummary {
        let mut per_event: BTreeMap<EventType, usize> = BTreeMap::new();
        let mut mentions = 0;
        for (_, ms) in self.iter() {
            mentions += ms.len();
            for m in ms {
                *per_event.entry(m.event).or_default() += 1;
            }
        }
        CorpusSummary {
            posts: self.len(),
            mentions,
            event_types: per_event.len(),
            per_event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub posts: usize,
    pub mentions: usize,
    pub event_types: usize,
    pub per_event: BTreeMap<EventType, usize>,
}

/// Precision / recall / F1. A 0/0 ratio is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            precision_undefined: predicted == 0,
            recall_undefined: gold == 0,
        }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub gold: usize,
    pub predicted: usize,
    pub matched_i: usize,
    pub matched_c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tri_i: Prf,
    pub tri_c: Prf,
    pub per_event_recall: BTreeMap<EventType, f64>,
    pub per_event_gold: BTreeMap<EventType, usize>,
    pub counts: MatchCounts,
}

impl EvalReport {
    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<8} {:>9} {:>9} {:>9}\n", "", "P", "R", "F1"));
        for (name, prf) in [("Tri-I", &self.tri_i), ("Tri-C", &self.tri_c)] {
            out.push_str(&format!(
                "{:<8} {:>9.2} {:>9.2} {:>9.2}\n",
                name,
                prf.precision * 100.0,
                prf.recall * 100.0,
                prf.f1 * 100.0
            ));
        }
        out.push_str(&format!("\n{:<8} {:>9} {:>9}\n", "event", "gold", "recall"));
        for event in EventType::ALL {
            out.push_str(&format!(
                "{:<8} {:>9} {:>9.2}\n",
                event.as_str(),
                self.per_event_gold.get(&event).copied().unwrap_or(0),
                self.per_event_recall.get(&event).copied().unwrap_or(0.0) * 100.0
            ));
        }
        let c = &self.counts;
        out.push_str(&format!(
            "\ngold {}  predicted {}  matched(I) {}  matched(C) {}\n",
            c.gold, c.predicted, c.matched_i, c.matched_c
        ));
        out
    }
}

/// How a predicted trigger is compared to a gold trigger.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Exact (start, end) offsets.
    #[default]
    Span,
    /// Case-insensitive trigger text, ignoring offsets.
    Text,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum TriggerKey {
    Span(usize, usize),
    Text(String),
}

fn trigger_key(m: &EventMention, mode: MatchMode) -> TriggerKey {
    match mode {
        MatchMode::Span => TriggerKey::Span(m.trigger.start, m.trigger.end),
        MatchMode::Text => TriggerKey::Text(m.trigger.surface.to_lowercase()),
    }
}

/// Size of a maximum one-to-one matching under an equality relation:
/// for each key, min(gold count, predicted count).
fn matched_by_key<K: Eq + Hash>(gold: impl Iterator<Item = K>, pred: impl Iterator<Item = K>) -> usize {
    let mut counts: HashMap<K, (usize, usize)> = HashMap::new();
    for k in gold {
        counts.entry(k).or_default().0 += 1;
    }
    for k in pred {
        counts.entry(k).or_default().1 += 1;
    }
    counts.values().map(|&(g, p)| g.min(p)).sum()
}

/// Micro-averaged Tri-I / Tri-C scores with exact span matching.
pub fn score(gold: &GoldCorpus, preds: &[PredictionSet]) -> Result<EvalReport, EvalError> {
    score_with(gold, preds, MatchMode::Span)
}

pub fn score_with(gold: &GoldCorpus, preds: &[PredictionSet], mode: MatchMode) -> Result<EvalReport, EvalError> {
    let mut by_post: HashMap<&str, &[EventMention]> = HashMap::with_capacity(preds.len());
    for set in preds {
        if gold.get(&set.post_id).is_none() {
            return Err(EvalError::UnknownPost(set.post_id.clone()));
        }
        if by_post.insert(set.post_id.as_str(), &set.mentions).is_some() {
            return Err(EvalError::DuplicatePrediction(set.post_id.clone()));
        }
    }

    let mut counts = MatchCounts {
        gold: 0,
        predicted: 0,
        matched_i: 0,
        matched_c: 0,
    };
    let mut gold_by_event = [0usize; EventType::COUNT];
    let mut matched_by_event = [0usize; EventType::COUNT];

    for (id, gold_mentions) in gold.iter() {
        let pred_mentions = by_post.get(id).copied().unwrap_or(&[]);
        counts.gold += gold_mentions.len();
        counts.predicted += pred_mentions.len();
        counts.matched_i += matched_by_key(
            gold_mentions.iter().map(|m| trigger_key(m, mode)),
            pred_mentions.iter().map(|m| trigger_key(m, mode)),
        );
        for event in EventType::ALL {
            let g = gold_mentions.iter().filter(|m| m.event == event);
            let p = pred_mentions.iter().filter(|m| m.event == event);
            let matched = matched_by_key(g.clone().map(|m| trigger_key(m, mode)), p.map(|m| trigger_key(m, mode)));
            gold_by_event[event.index()] += g.count();
            matched_by_event[event.index()] += matched;
            counts.matched_c += matched;
        }
    }

    let per_event_recall = EventType::ALL
        .into_iter()
        .map(|e| {
            let g = gold_by_event[e.index()];
            let r = if g == 0 { 0.0 } else { matched_by_event[e.index()] as f64 / g as f64 };
            (e, r)
        })
        .collect();
    let per_event_gold = EventType::ALL
        .into_iter()
        .map(|e| (e, gold_by_event[e.index()]))
        .collect();

    Ok(EvalReport {
        tri_i: Prf::from_counts(counts.matched_i, counts.predicted, counts.gold),
        tri_c: Prf::from_counts(counts.matched_c, counts.predicted, counts.gold),
        per_event_recall,
        per_event_gold,
        counts,
    })
}

/// Fleiss' kappa for one rating table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters: usize,
    /// Mean per-item observed agreement.
    pub observed: f64,
    /// Chance agreement from the pooled category proportions.
    pub expected: f64,
    /// Per-column kappa; `None` when the column is never or always used.
    pub per_category: Vec<Option<f64>>,
    /// Chance agreement is 1 (a single category takes every rating); kappa
    /// is then defined as 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_chance: bool,
}

/// Fleiss' kappa over an item × category table of rating counts.
///
/// With `n` raters and `N` items: `P_i = (Σ_j n_ij² − n) / (n(n−1))`,
/// `P̄ = mean P_i`, `p_j = Σ_i n_ij / (N n)`, `P̄_e = Σ_j p_j²` and
/// `κ = (P̄ − P̄_e) / (1 − P̄_e)`.
pub fn fleiss_kappa(table: &[Vec<usize>], n_raters: usize) -> Result<KappaReport, EvalError> {
    let n_items = table.len();
    if n_items == 0 {
        return Err(EvalError::NoItems);
    }
    let n_cat = table[0].len();
    if n_cat < 2 {
        return Err(EvalError::TooFewCategories(n_cat));
    }
    if n_raters < 2 {
        return Err(EvalError::TooFewRaters(n_raters));
    }
    for (item, row) in table.iter().enumerate() {
        if row.len() != n_cat {
            return Err(EvalError::RaggedRow {
                item,
                got: row.len(),
                expected: n_cat,
            });
        }
        let sum: usize = row.iter().sum();
        if sum != n_raters {
            return Err(EvalError::RowSum {
                item,
                got: sum,
                expected: n_raters,
            });
        }
    }

    let n = n_raters as f64;
    let total = (n_items * n_raters) as f64;
    let observed = table
        .iter()
        .map(|row| {
            let sq: usize = row.iter().map(|&c| c * c).sum();
            (sq - n_raters) as f64 / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_items as f64;

    let column_sums: Vec<usize> = (0..n_cat).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let proportions: Vec<f64> = column_sums.iter().map(|&c| c as f64 / total).collect();
    let expected: f64 = proportions.iter().map(|p| p * p).sum();
    let degenerate_chance = column_sums.iter().any(|&c| c == n_items * n_raters);

    let kappa = if degenerate_chance {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };

    let per_category = (0..n_cat)
        .map(|j| {
            let p = proportions[j];
            if column_sums[j] == 0 || column_sums[j] == n_items * n_raters {
                return None;
            }
            let disagreement: usize = table.iter().map(|r| r[j] * (n_raters - r[j])).sum();
            Some(1.0 - disagreement as f64 / (total * (n - 1.0) * p * (1.0 - p)))
        })
        .collect();

    Ok(KappaReport {
        kappa,
        n_items,
        n_raters,
        observed,
        expected,
        per_category,
        degenerate_chance,
    })
}

/// Agreement between annotators who labelled the same posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Kappa over all (post, event) items pooled.
    pub pooled: KappaReport,
    /// Kappa over the items of each event alone.
    pub per_category: BTreeMap<EventType, KappaReport>,
    /// Unweighted mean of the per-event kappas.
    pub macro_kappa: f64,
}

/// Fleiss' kappa where each item is a (post, event type) pair and each rater
/// marks it present (the rater annotated at least one mention of that event
/// in the post) or absent.
pub fn annotation_agreement(raters: &[GoldCorpus]) -> Result<AgreementReport, EvalError> {
    if raters.len() < 2 {
        return Err(EvalError::TooFewRaters(raters.len()));
    }
    let ids: BTreeSet<&str> = raters[0].iter().map(|(id, _)| id).collect();
    for (r, corpus) in raters.iter().enumerate().skip(1) {
        let other: BTreeSet<&str> = corpus.iter().map(|(id, _)| id).collect();
        if other != ids {
            return Err(EvalError::RaterMismatch(r));
        }
    }
    if ids.is_empty() {
        return Err(EvalError::NoItems);
    }

    let present = |corpus: &GoldCorpus, id: &str, event: EventType| {
        corpus
            .get(id)
            .is_some_and(|ms| ms.iter().any(|m| m.event == event))
    };
    let mut per_event_rows: BTreeMap<EventType, Vec<Vec<usize>>> = BTreeMap::new();
    for event in EventType::ALL {
        let rows = ids
            .iter()
            .map(|id| {
                let yes = raters.iter().filter(|c| present(c, id, event)).count();
                vec![yes, raters.len() - yes]
            })
            .collect();
        per_event_rows.insert(event, rows);
    }

    let pooled_rows: Vec<Vec<usize>> = per_event_rows.values().flatten().cloned().collect();
    let pooled = fleiss_kappa(&pooled_rows, raters.len())?;
    let per_category: BTreeMap<EventType, KappaReport> = per_event_rows
        .iter()
        .map(|(e, rows)| fleiss_kappa(rows, raters.len()).map(|k| (*e, k)))
        .collect::<Result<_, _>>()?;
    let macro_kappa = per_category.values().map(|k| k.kappa).sum::<f64>() / per_category.len() as f64;

    Ok(AgreementReport {
        pooled,
        per_category,
        macro_kappa,
    })
}

/// Share of posts in `universe` carrying at least one gold mention.
pub fn event_coverage(gold: &GoldCorpus, universe: &[String]) -> Result<f64, EvalError> {
    let universe: HashSet<&str> = universe.iter().map(String::as_str).collect();
    if universe.is_empty() {
        return Err(EvalError::EmptyUniverse);
    }
    let mut covered = 0;
    for (id, mentions) in gold.iter() {
        if !universe.contains(id) {
            return Err(EvalError::OutsideUniverse(id.to_string()));
        }
        if !mentions.is_empty() {
            covered += 1;
        }
    }
    Ok(covered as f64 / universe.len() as f64)
}
