//! Bundled worked examples, runnable from the command line as a smoke test
//! of an installed build.

use std::collections::{BTreeMap, HashMap};

use chrono::{Days, NaiveDate};
use serde::Serialize;

use crate::detect::{detect_keyword, EventMention, PredictionSet};
use crate::evaluate::{event_coverage, fleiss_kappa, score, GoldCorpus, GoldRecord};
use crate::monitor::{aggregate_daily, detect_warnings, disease_profile, rolling_mean, EventTimeSeries, WarningParams};
use crate::ontology::{default_ontology, EventType, Tier};
use crate::preprocess::{normalize_post, split_hashtag, timestamp, NormalizationPolicy, RawPost};
use crate::sample::uniform_quotas;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail: detail.into(),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn gold(records: Vec<(&str, Vec<EventMention>)>) -> GoldCorpus {
    GoldCorpus::from_records(records.into_iter().map(|(id, mentions)| GoldRecord {
        id: id.to_string(),
        mentions,
    }))
    .expect("fixture gold is valid")
}

fn post(text: &str) -> crate::preprocess::CleanPost {
    let raw = RawPost {
        id: "s".into(),
        created_at: timestamp::parse("2022-05-23T00:00:00Z").expect("fixture timestamp"),
        text: text.into(),
        lang: Some("en".into()),
    };
    normalize_post(&raw, &NormalizationPolicy::default())
}

pub fn run_all() -> Vec<CheckResult> {
    use EventType::*;
    let mut out = Vec::new();

    let split = split_hashtag("#MonkeyPox").unwrap_or_default();
    out.push(check("hashtag split", split == ["monkey", "pox"], format!("{split:?}")));

    let spec = default_ontology();
    for (text, event, surface) in [
        ("Three students infected with COVID-19", Infect, "infected"),
        ("COVID-19 symptoms include fever, cough, ...", Symptom, "symptoms"),
    ] {
        let found: Vec<(EventType, String)> = detect_keyword(&post(text), &spec, Tier::High)
            .mentions
            .into_iter()
            .map(|m| (m.event, m.trigger.surface))
            .collect();
        out.push(check(
            "keyword anchor",
            found == [(event, surface.to_string())],
            format!("{text:?} -> {found:?}"),
        ));
    }

    let g = gold(vec![("p1", vec![EventMention::new(Infect, 5, 13, "infected")])]);
    let p = [PredictionSet::new("p1", vec![EventMention::new(Spread, 5, 13, "infected")], "fixture")];
    match score(&g, &p) {
        Ok(r) => out.push(check(
            "tri-i vs tri-c",
            r.tri_i.f1 == 1.0 && r.tri_c.f1 == 0.0,
            format!("tri_i f1 {} tri_c f1 {}", r.tri_i.f1, r.tri_c.f1),
        )),
        Err(e) => out.push(check("tri-i vs tri-c", false, e.to_string())),
    }

    match fleiss_kappa(&[vec![2, 0], vec![1, 1]], 2) {
        Ok(k) => out.push(check(
            "fleiss kappa 2x2",
            close(k.kappa, -1.0 / 3.0, 1e-4) && close(k.observed, 0.5, 1e-12) && close(k.expected, 0.625, 1e-12),
            format!("kappa {:.4}", k.kappa),
        )),
        Err(e) => out.push(check("fleiss kappa 2x2", false, e.to_string())),
    }

    let g = gold(vec![
        ("a", vec![EventMention::new(Cure, 0, 1, "x")]),
        ("b", vec![EventMention::new(Cure, 0, 1, "x")]),
        ("c", vec![]),
    ]);
    let universe = ["a", "b", "c"].map(String::from);
    let cov = event_coverage(&g, &universe).unwrap_or(f64::NAN);
    out.push(check("coverage", close(cov, 2.0 / 3.0, 1e-4), format!("{cov:.4}")));

    let q = uniform_quotas(16, &[10, 10, 10, 10, 10, 2, 10]);
    out.push(check("uniform quotas", q == [3, 3, 2, 2, 2, 2, 2], format!("{q:?}")));

    let preds = vec![
        PredictionSet::new(
            "d0",
            (0..3).map(|i| EventMention::new(Infect, 2 * i, 2 * i + 1, "x")).collect(),
            "fixture",
        ),
        PredictionSet::new("d2", vec![EventMention::new(Death, 0, 1, "x"), EventMention::new(Death, 2, 3, "y")], "fixture"),
    ];
    let ts: HashMap<String, _> = [("d0", "2022-05-01T08:00:00Z"), ("d2", "2022-05-03T20:00:00Z")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), timestamp::parse(v).expect("fixture timestamp")))
        .collect();
    match aggregate_daily(&preds, &ts) {
        Ok(s) => out.push(check("daily buckets", s.overall == [3, 0, 2], format!("{:?}", s.overall))),
        Err(e) => out.push(check("daily buckets", false, e.to_string())),
    }

    let r = rolling_mean(&[1, 2, 3, 4, 5], 3).unwrap_or_default();
    out.push(check(
        "rolling mean",
        r == [None, None, Some(2.0), Some(3.0), Some(4.0)],
        format!("{r:?}"),
    ));

    let start = NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date");
    let params = WarningParams::default();
    let flat = EventTimeSeries::from_overall(start, vec![2; 70]);
    let quiet = detect_warnings(&flat, &params).map(|w| w.len());
    out.push(check("flat series quiet", matches!(quiet, Ok(0)), format!("{quiet:?}")));

    let mut step = vec![2u64; 40];
    step.extend(std::iter::repeat_n(20, 30));
    let fired = detect_warnings(&EventTimeSeries::from_overall(start, step), &params);
    let expected_day = start + Days::new(41);
    let ok = matches!(&fired, Ok(w) if w.len() == 1 && w[0].fired_on == expected_day);
    out.push(check(
        "step series one episode",
        ok,
        match &fired {
            Ok(w) => format!("{} episode(s), first {:?}", w.len(), w.first().map(|s| s.fired_on)),
            Err(e) => e.to_string(),
        },
    ));

    let prof = disease_profile(&[PredictionSet::new(
        "x",
        vec![
            EventMention::new(Infect, 0, 1, "a"),
            EventMention::new(Spread, 2, 3, "b"),
            EventMention::new(Spread, 4, 5, "c"),
            EventMention::new(Death, 6, 7, "d"),
        ],
        "fixture",
    )]);
    let shares: BTreeMap<_, _> = prof.shares.iter().filter(|(_, v)| **v > 0.0).collect();
    out.push(check(
        "disease profile",
        prof.shares[&Infect] == 25.0 && prof.shares[&Spread] == 50.0 && prof.shares[&Death] == 25.0,
        format!("{shares:?}"),
    ));

    out
}
