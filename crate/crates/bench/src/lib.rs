//! Deterministic inputs shared by the benchmarks.

use chrono::{TimeZone, Utc};
use epipulse_core::detect::{EventMention, PredictionSet};
use epipulse_core::evaluate::{GoldCorpus, GoldRecord};
use epipulse_core::ontology::{default_ontology, EventType};
use epipulse_core::preprocess::{normalize_post, CleanPost, NormalizationPolicy, RawPost};
use epipulse_core::rng::SeededRng;
use epipulse_core::synth::{demo_corpus, messy_text, DemoShape};

pub fn messy_posts(n: usize, seed: u64) -> Vec<RawPost> {
    let mut rng = SeededRng::new(seed);
    let at = Utc.with_ymd_and_hms(2022, 5, 23, 12, 0, 0).unwrap();
    (0..n)
        .map(|i| RawPost {
            id: format!("m{i}"),
            created_at: at,
            text: messy_text(&mut rng).0,
            lang: Some("en".into()),
        })
        .collect()
}

/// The demo corpus, preprocessed. `days` scales it linearly.
pub fn clean_corpus(days: usize, seed: u64) -> Vec<CleanPost> {
    let shape = DemoShape {
        days,
        outbreak_day: days * 2 / 3,
        ..DemoShape::default()
    };
    let start = Utc.with_ymd_and_hms(2022, 5, 1, 0, 0, 0).unwrap();
    demo_corpus(&default_ontology(), shape, start, seed)
        .iter()
        .map(|p| normalize_post(p, &NormalizationPolicy::default()))
        .collect()
}

/// Gold and predictions over `posts` posts with up to six mentions each,
/// predictions overlapping gold about half the time.
pub fn scoring_instance(posts: usize, seed: u64) -> (GoldCorpus, Vec<PredictionSet>) {
    let mut rng = SeededRng::new(seed);
    let mut gold = Vec::with_capacity(posts);
    let mut preds = Vec::with_capacity(posts);
    for i in 0..posts {
        let mut g: Vec<EventMention> = Vec::new();
        for _ in 0..rng.below(7) {
            let start = rng.below(60);
            let m = EventMention::new(*rng.pick(&EventType::ALL), start, start + 1 + rng.below(8), "t");
            if !g.contains(&m) {
                g.push(m);
            }
        }
        let mut p: Vec<EventMention> = g.iter().filter(|_| rng.below(2) == 0).cloned().collect();
        for _ in 0..rng.below(3) {
            p.push(EventMention::new(*rng.pick(&EventType::ALL), 70, 75, "t"));
        }
        gold.push(GoldRecord {
            id: format!("g{i}"),
            mentions: g,
        });
        preds.push(PredictionSet::new(format!("g{i}"), p, "bench"));
    }
    (GoldCorpus::from_records(gold).expect("distinct ids and mentions"), preds)
}

/// A noisy daily series of `days` days with a few level shifts.
pub fn count_series(days: usize, seed: u64) -> Vec<u64> {
    let mut rng = SeededRng::new(seed);
    (0..days)
        .map(|t| {
            let level = if (t / 90) % 3 == 2 { 30 } else { 5 };
            (level + rng.below(level)) as u64
        })
        .collect()
}
