use std::collections::{BTreeMap, HashSet};

use epipulse_core::detect::{detect_keyword, EventMention};
use epipulse_core::ontology::{default_ontology, EventType, KeywordEntry, OntologySpec, Tier};
use epipulse_core::preprocess::{normalize_post, timestamp, CleanPost, NormalizationPolicy, RawPost};
use epipulse_core::text::char_slice;
use proptest::prelude::*;

const VOCAB: &[&str] = &["fever", "cure", "died", "spread", "mask", "virus", "cases", "lockdown", "rash", "vaccine"];
const FILLER: &[&str] = &["the", "a", "new", "today", "in", "city", "and", "Covid-19", "#MonkeyPox", "😷"];
const PUNCT: &[&str] = &["", "", "", ",", ".", "!", "?", "\"", "(", ")", "...", "'s"];

fn post(text: &str) -> CleanPost {
    normalize_post(
        &RawPost {
            id: "p".into(),
            created_at: timestamp::parse("2022-05-23T00:00:00Z").unwrap(),
            text: text.into(),
            lang: None,
        },
        &NormalizationPolicy::default(),
    )
}

fn tier(i: usize) -> Tier {
    [Tier::Low, Tier::Medium, Tier::High][i % 3]
}

fn lexicon() -> impl Strategy<Value = OntologySpec> {
    prop::collection::vec((0..VOCAB.len(), 0..VOCAB.len(), any::<bool>(), 0usize..7, 0usize..3), 1..12).prop_map(
        |entries| {
            let mut seen = HashSet::new();
            let mut keywords = Vec::new();
            for (a, b, pair, e, t) in entries {
                let surface = if pair { format!("{} {}", VOCAB[a], VOCAB[b]) } else { VOCAB[a].to_string() };
                let event = EventType::ALL[e];
                if seen.insert((surface.clone(), event)) {
                    keywords.push(KeywordEntry::new(&surface, event, tier(t)));
                }
            }
            let events = default_ontology().events().clone();
            OntologySpec::new(events, keywords, Vec::new()).unwrap()
        },
    )
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec((0..VOCAB.len() + FILLER.len(), 0..PUNCT.len(), 0..PUNCT.len(), 0u8..4), 0..15).prop_map(
        |words| {
            words
                .into_iter()
                .map(|(w, pre, post, case)| {
                    let word = if w < VOCAB.len() { VOCAB[w] } else { FILLER[w - VOCAB.len()] };
                    let word = match case {
                        0 => word.to_uppercase(),
                        1 => {
                            let mut c = word.chars();
                            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
                        }
                        _ => word.to_string(),
                    };
                    let pre = if PUNCT[pre] == "'s" { "" } else { PUNCT[pre] };
                    format!("{pre}{word}{}", PUNCT[post])
                })
                .collect::<Vec<_>>()
                .join(" ")
        },
    )
}

fn keys(ms: &[EventMention]) -> HashSet<(EventType, usize, usize)> {
    ms.iter().map(|m| (m.event, m.trigger.start, m.trigger.end)).collect()
}

proptest! {
    #[test]
    fn sound_spans(spec in lexicon(), text in text(), t in 0usize..3) {
        let p = post(&text);
        let min_tier = tier(t);
        let lexicon: BTreeMap<(String, EventType), Tier> =
            spec.keywords().iter().map(|k| ((k.surface.clone(), k.event), k.tier)).collect();
        for m in detect_keyword(&p, &spec, min_tier).mentions {
            prop_assert_eq!(char_slice(&p.text, m.trigger.start, m.trigger.end), Some(m.trigger.surface.as_str()));
            let key = (m.trigger.surface.to_lowercase(), m.event);
            let found = lexicon.get(&key);
            prop_assert!(found.is_some_and(|t| *t >= min_tier), "{:?} not in lexicon", key);
        }
    }

    #[test]
    fn tier_monotone(spec in lexicon(), text in text()) {
        let p = post(&text);
        let high = keys(&detect_keyword(&p, &spec, Tier::High).mentions);
        let medium = keys(&detect_keyword(&p, &spec, Tier::Medium).mentions);
        let low = keys(&detect_keyword(&p, &spec, Tier::Low).mentions);
        prop_assert!(high.is_subset(&medium));
        prop_assert!(medium.is_subset(&low));
    }

    #[test]
    fn case_insensitive(spec in lexicon(), text in text()) {
        // lowercase after normalization; lowercasing first changes hashtag splits
        let normalized = post(&text);
        let upper = detect_keyword(&normalized, &spec, Tier::Low);
        let lower = detect_keyword(&post(&normalized.text.to_lowercase()), &spec, Tier::Low);
        prop_assert_eq!(keys(&upper.mentions), keys(&lower.mentions));
        prop_assert_eq!(upper.clone(), detect_keyword(&post(&text), &spec, Tier::Low));
    }

    #[test]
    fn no_match_inside_words(prefix in "[a-z0-9]{0,3}", suffix in "[a-z0-9]{0,3}", filler in text()) {
        prop_assume!(!(prefix.is_empty() && suffix.is_empty()));
        let spec = OntologySpec::new(
            default_ontology().events().clone(),
            vec![KeywordEntry::new("cure", EventType::Cure, Tier::High)],
            Vec::new(),
        ).unwrap();
        let filler = filler.to_lowercase().replace("cure", "x");
        let text = format!("{filler} {prefix}cure{suffix} se{prefix}cure{suffix}ity");
        prop_assert!(detect_keyword(&post(&text), &spec, Tier::Low).mentions.is_empty(), "{}", text);
    }
}

#[test]
fn unanchored_rows_follow_the_lexicon() {
    let spec = default_ontology();
    let at = |text: &str, t: Tier| -> Vec<(EventType, String)> {
        detect_keyword(&post(text), &spec, t)
            .mentions
            .into_iter()
            .map(|m| (m.event, m.trigger.surface))
            .collect()
    };
    let catch = at("You can catch monkeypox from close contact", Tier::Low);
    assert!(catch.contains(&(EventType::Infect, "catch".into())), "{catch:?}");
    let cause = at("The virus can cause a painful rash", Tier::Low);
    assert!(cause.contains(&(EventType::Symptom, "cause".into())), "{cause:?}");
    assert!(at("You can catch monkeypox from close contact", Tier::High).is_empty());
}
