use std::collections::BTreeMap;

use epipulse_core::embed::{cosine, Embedder, EmbeddingProvider, EmbeddingVector};
use epipulse_core::filter::{
    filter_corpus, keyword_frequency, tag_post, FilterError, SeedVectors, BUILTIN_DEFAULT_THRESHOLD,
};
use epipulse_core::ontology::{default_ontology, EventType, KeywordEntry, OntologySpec, Tier};
use epipulse_core::preprocess::{normalize_post, timestamp, CleanPost, DropReason, NormalizationPolicy, RawPost};
use epipulse_core::rng::SeededRng;
use epipulse_core::synth::seed_noise_mixture;
use proptest::prelude::*;

fn post(id: usize, text: &str) -> CleanPost {
    normalize_post(
        &RawPost {
            id: format!("p{id}"),
            created_at: timestamp::parse("2022-05-23T00:00:00Z").unwrap(),
            text: text.into(),
            lang: Some("en".into()),
        },
        &NormalizationPolicy::default(),
    )
}

fn posts(texts: &[String]) -> Vec<CleanPost> {
    texts.iter().enumerate().map(|(i, t)| post(i, t)).collect()
}

fn soup(rng: &mut SeededRng) -> String {
    (0..3 + rng.below(12))
        .map(|_| (0..2 + rng.below(8)).map(|_| (b'a' + rng.below(26) as u8) as char).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

// Brute force over the flattened (event, seed) matrix; first strict maximum wins.
fn oracle_tag(seeds: &BTreeMap<EventType, Vec<EmbeddingVector>>, v: &EmbeddingVector) -> (EventType, f64) {
    let mut best = (EventType::Infect, f64::NEG_INFINITY);
    for event in EventType::ALL {
        for s in &seeds[&event] {
            let c = cosine(s, v).unwrap();
            if c > best.1 {
                best = (event, c);
            }
        }
    }
    best
}

#[test]
fn seven_seeds_in_ninety_three_soups() {
    let spec = default_ontology();
    let provider = EmbeddingProvider::builtin();
    let mut rng = SeededRng::new(11);
    let mut texts: Vec<String> = spec.seed_sets().iter().map(|s| s.seeds[0].clone()).collect();
    texts.extend((0..93).map(|_| soup(&mut rng)));

    let out = filter_corpus(posts(&texts), &spec, &provider, BUILTIN_DEFAULT_THRESHOLD).unwrap();
    let kept: Vec<&str> = out.retained.iter().map(|t| t.post.id.as_str()).collect();
    assert_eq!(kept, ["p0", "p1", "p2", "p3", "p4", "p5", "p6"]);
    assert_eq!(out.rejected_count, 93);

    // exhaustive pairwise check against every seed vector
    let seed_texts: Vec<&str> = spec.seed_sets().iter().flat_map(|s| s.seeds.iter().map(String::as_str)).collect();
    let seed_vecs = provider.embed_texts(&seed_texts).unwrap();
    for (i, t) in texts.iter().enumerate() {
        let v = &provider.embed_texts(&[posts(&texts)[i].text.as_str()]).unwrap()[0];
        let best = seed_vecs.iter().map(|s| cosine(s, v).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best >= BUILTIN_DEFAULT_THRESHOLD, i < 7, "{t:?} scored {best}");
    }
}

#[test]
fn noise_rejection_and_seed_retention() {
    let spec = default_ontology();
    let provider = EmbeddingProvider::builtin();
    let (signal, noise) = seed_noise_mixture(&spec, 19, 5);
    let n_signal = signal.len();
    let all: Vec<String> = signal.into_iter().chain(noise).collect();
    let out = filter_corpus(posts(&all), &spec, &provider, BUILTIN_DEFAULT_THRESHOLD).unwrap();
    let kept_signal = out.retained.iter().filter(|t| t.post.id[1..].parse::<usize>().unwrap() < n_signal).count();
    let kept_noise = out.retained.len() - kept_signal;
    let noise_total = all.len() - n_signal;
    assert_eq!(kept_signal, n_signal);
    assert!((noise_total - kept_noise) as f64 / noise_total as f64 >= 0.9);
}

#[test]
fn vacuous_and_self_thresholds() {
    let spec = default_ontology();
    let provider = EmbeddingProvider::builtin();
    let mut rng = SeededRng::new(3);
    let texts: Vec<String> = (0..20).map(|_| soup(&mut rng)).chain([String::new()]).collect();
    let out = filter_corpus(posts(&texts), &spec, &provider, -1.0).unwrap();
    assert_eq!((out.retained.len(), out.rejected_count), (texts.len(), 0));

    let seeds: Vec<String> = spec.seed_sets().iter().flat_map(|s| s.seeds.clone()).collect();
    let out = filter_corpus(posts(&seeds), &spec, &provider, 0.999).unwrap();
    assert_eq!(out.retained.len(), seeds.len());

    assert!(matches!(
        filter_corpus(posts(&seeds), &spec, &provider, 1.5),
        Err(FilterError::BadThreshold(_))
    ));
}

#[test]
fn dropped_posts_are_skipped() {
    let spec = default_ontology();
    let mut p = posts(&[spec.seed_sets()[0].seeds[0].clone(), "hola".into()]);
    p[1].dropped = Some(DropReason::NonEnglish);
    let out = filter_corpus(p, &spec, &EmbeddingProvider::builtin(), -1.0).unwrap();
    assert_eq!((out.retained.len(), out.rejected_count, out.dropped_count), (1, 0, 1));
}

#[test]
fn monotone_in_threshold() {
    let spec = default_ontology();
    let provider = EmbeddingProvider::builtin();
    let (signal, noise) = seed_noise_mixture(&spec, 3, 8);
    let all: Vec<String> = signal.into_iter().chain(noise).collect();
    let mut previous: Option<Vec<String>> = None;
    for t in [-0.5, 0.0, 0.2, 0.35, 0.9] {
        let kept: Vec<String> = filter_corpus(posts(&all), &spec, &provider, t)
            .unwrap()
            .retained
            .into_iter()
            .map(|x| x.post.id)
            .collect();
        if let Some(prev) = &previous {
            assert!(kept.iter().all(|id| prev.contains(id)), "threshold {t}");
        }
        previous = Some(kept);
    }
}

#[test]
fn frequency_examples() {
    let spec = OntologySpec::new(
        default_ontology().events().clone(),
        vec![
            KeywordEntry::new("cure", EventType::Cure, Tier::High),
            KeywordEntry::new("recovery", EventType::Cure, Tier::High),
        ],
        Vec::new(),
    )
    .unwrap();
    let p = posts(&["a cure at last".into(), "nothing here".into(), "security first".into()]);
    let r = keyword_frequency(&p, &spec);
    assert_eq!(r.total_posts, 3);
    assert_eq!(r.counts[&EventType::Cure], 1);
    assert!(EventType::ALL.iter().filter(|e| **e != EventType::Cure).all(|e| r.counts[e] == 0));

    let r = keyword_frequency(&posts(&["cure recovery cure".into()]), &spec);
    assert_eq!(r.counts[&EventType::Cure], 1);
    let r = keyword_frequency(&[], &spec);
    assert_eq!(r.total_posts, 0);
    assert!(r.counts.values().all(|c| *c == 0));
}

fn small_vec() -> impl Strategy<Value = EmbeddingVector> {
    prop::collection::vec(-2i8..=2, 4).prop_map(|v| EmbeddingVector::new(v.into_iter().map(f64::from).collect()))
}

proptest! {
    #[test]
    fn tag_post_matches_brute_force(
        seeds in prop::collection::vec(prop::collection::vec(small_vec(), 1..=3), 7),
        v in small_vec(),
    ) {
        let map: BTreeMap<EventType, Vec<EmbeddingVector>> = EventType::ALL.into_iter().zip(seeds).collect();
        let tag = tag_post(&SeedVectors::new(map.clone()).unwrap(), &v).unwrap();
        let (event, score) = oracle_tag(&map, &v);
        prop_assert_eq!(tag.best_event, event);
        prop_assert_eq!(tag.score, score);
    }
}

#[test]
fn orthogonal_post_ties_to_infect() {
    let e = |x: Vec<f64>| EmbeddingVector::new(x);
    let map: BTreeMap<_, _> = EventType::ALL.into_iter().map(|ev| (ev, vec![e(vec![1.0, 0.0])])).collect();
    let tag = tag_post(&SeedVectors::new(map).unwrap(), &e(vec![0.0, 1.0])).unwrap();
    assert_eq!((tag.best_event, tag.score), (EventType::Infect, 0.0));
}
