//! The seven-event epidemic ontology, its tiered keyword lexicon and the
//! per-event seed repositories used for corpus filtering.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_ONTOLOGY_JSON: &str = include_str!("../data/default_ontology.json");

/// One of the seven disease-agnostic epidemic event types.
///
/// The derived ordering is the canonical list order and is used for every
/// deterministic tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Infect,
    Spread,
    Symptom,
    Prevent,
    Control,
    Cure,
    Death,
}

impl EventType {
    pub const ALL: [EventType; 7] = [
        EventType::Infect,
        EventType::Spread,
        EventType::Symptom,
        EventType::Prevent,
        EventType::Control,
        EventType::Cure,
        EventType::Death,
    ];

    pub const COUNT: usize = 7;

    /// Position in [`EventType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Infect => "infect",
            EventType::Spread => "spread",
            EventType::Symptom => "symptom",
            EventType::Prevent => "prevent",
            EventType::Control => "control",
            EventType::Cure => "cure",
            EventType::Death => "death",
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown event type {0:?}")]
pub struct UnknownEventType(pub String);

impl FromStr for EventType {
    type Err = UnknownEventType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventType::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| UnknownEventType(s.to_string()))
    }
}

/// Keyword specificity tier. Ordered `Low < Medium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Low,
    Medium,
    High,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Low => "low",
            Tier::Medium => "medium",
            Tier::High => "high",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Tier::Low),
            "medium" => Ok(Tier::Medium),
            "high" => Ok(Tier::High),
            other => Err(format!("unknown tier {other:?} (expected high, medium or low)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeywordEntry {
    /// Lowercase canonical form; one word or two words joined by a single space.
    pub surface: String,
    pub event: EventType,
    pub tier: Tier,
}

impl KeywordEntry {
    pub fn new(surface: impl Into<String>, event: EventType, tier: Tier) -> Self {
        KeywordEntry {
            surface: surface.into(),
            event,
            tier,
        }
    }

    /// Number of whitespace-separated words in the surface form.
    pub fn word_count(&self) -> usize {
        self.surface.split(' ').count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub event: EventType,
    pub seeds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDefinition {
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot read ontology file {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed ontology JSON{}", display_path(.path))]
    Json {
        path: Option<PathBuf>,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid ontology at `{field}`: {message}")]
    Schema { field: String, message: String },
}

fn display_path(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| format!(" in {}", p.display()))
        .unwrap_or_default()
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> OntologyError {
    OntologyError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// A validated ontology. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologySpec {
    description: Option<String>,
    events: BTreeMap<EventType, EventDefinition>,
    keywords: Vec<KeywordEntry>,
    seed_sets: Vec<SeedSet>,
}

// On-disk shape. Event ids and tiers stay strings here so validation can name
// the offending field.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    events: BTreeMap<String, EventDefinition>,
    #[serde(default)]
    keywords: Vec<KeywordFileEntry>,
    #[serde(default)]
    seeds: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordFileEntry {
    surface: String,
    event: String,
    tier: String,
}

impl OntologySpec {
    /// Builds a spec from already-typed parts, enforcing every invariant.
    pub fn new(
        events: BTreeMap<EventType, EventDefinition>,
        keywords: Vec<KeywordEntry>,
        seed_sets: Vec<SeedSet>,
    ) -> Result<Self, OntologyError> {
        for event in EventType::ALL {
            match events.get(&event) {
                None => return Err(schema(format!("events.{event}"), "missing event definition")),
                Some(def) if def.definition.trim().is_empty() => {
                    return Err(schema(
                        format!("events.{event}.definition"),
                        "definition must be non-empty",
                    ))
                }
                Some(_) => {}
            }
        }

        let mut seen = HashSet::new();
        for (i, kw) in keywords.iter().enumerate() {
            validate_surface(&kw.surface).map_err(|m| schema(format!("keywords[{i}].surface"), m))?;
            if !seen.insert((kw.surface.as_str(), kw.event)) {
                return Err(schema(
                    format!("keywords[{i}]"),
                    format!("duplicate keyword {:?} for event {}", kw.surface, kw.event),
                ));
            }
        }

        let mut seed_sets = seed_sets;
        seed_sets.sort_by_key(|s| s.event);
        for pair in seed_sets.windows(2) {
            if pair[0].event == pair[1].event {
                return Err(schema(
                    format!("seeds.{}", pair[0].event),
                    "seed set listed twice",
                ));
            }
        }
        for set in &seed_sets {
            if set.seeds.is_empty() {
                return Err(schema(format!("seeds.{}", set.event), "seed list is empty"));
            }
            let mut texts = HashSet::new();
            for (i, seed) in set.seeds.iter().enumerate() {
                if seed.trim().is_empty() {
                    return Err(schema(format!("seeds.{}[{i}]", set.event), "seed text is empty"));
                }
                if !texts.insert(seed.as_str()) {
                    return Err(schema(
                        format!("seeds.{}[{i}]", set.event),
                        format!("duplicate seed text {seed:?}"),
                    ));
                }
            }
        }

        Ok(OntologySpec {
            description: None,
            events,
            keywords,
            seed_sets,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self, OntologyError> {
        Self::parse(json, None)
    }

    fn parse(json: &str, path: Option<&Path>) -> Result<Self, OntologyError> {
        let file: OntologyFile = serde_json::from_str(json).map_err(|source| OntologyError::Json {
            path: path.map(Path::to_path_buf),
            source,
        })?;

        let mut events = BTreeMap::new();
        for (id, def) in file.events {
            let event = id
                .parse::<EventType>()
                .map_err(|e| schema(format!("events.{id}"), e.to_string()))?;
            events.insert(event, def);
        }

        let mut keywords = Vec::with_capacity(file.keywords.len());
        for (i, kw) in file.keywords.into_iter().enumerate() {
            let event = kw
                .event
                .parse::<EventType>()
                .map_err(|e| schema(format!("keywords[{i}].event"), e.to_string()))?;
            let tier = kw
                .tier
                .parse::<Tier>()
                .map_err(|m| schema(format!("keywords[{i}].tier"), m))?;
            keywords.push(KeywordEntry {
                surface: kw.surface,
                event,
                tier,
            });
        }

        let mut seed_sets = Vec::with_capacity(file.seeds.len());
        for (id, seeds) in file.seeds {
            let event = id
                .parse::<EventType>()
                .map_err(|e| schema(format!("seeds.{id}"), e.to_string()))?;
            seed_sets.push(SeedSet { event, seeds });
        }

        let mut spec = Self::new(events, keywords, seed_sets)?;
        spec.description = file.description;
        Ok(spec)
    }

    /// Serializes back to the on-disk JSON schema.
    pub fn to_json_string(&self) -> String {
        let file = OntologyFile {
            description: self.description.clone(),
            events: self
                .events
                .iter()
                .map(|(e, d)| (e.to_string(), d.clone()))
                .collect(),
            keywords: self
                .keywords
                .iter()
                .map(|k| KeywordFileEntry {
                    surface: k.surface.clone(),
                    event: k.event.to_string(),
                    tier: k.tier.to_string(),
                })
                .collect(),
            seeds: self
                .seed_sets
                .iter()
                .map(|s| (s.event.to_string(), s.seeds.clone()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("ontology serialization cannot fail")
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn definition(&self, event: EventType) -> &EventDefinition {
        &self.events[&event]
    }

    pub fn events(&self) -> &BTreeMap<EventType, EventDefinition> {
        &self.events
    }

    pub fn keywords(&self) -> &[KeywordEntry] {
        &self.keywords
    }

    /// Seed sets in canonical event order. Events without seeds are absent.
    pub fn seed_sets(&self) -> &[SeedSet] {
        &self.seed_sets
    }

    pub fn seed_set(&self, event: EventType) -> Option<&SeedSet> {
        self.seed_sets.iter().find(|s| s.event == event)
    }

    /// All entries for `event` whose tier is at least `min_tier`, in file order.
    pub fn keywords_for(&self, event: EventType, min_tier: Tier) -> Vec<&KeywordEntry> {
        self.keywords
            .iter()
            .filter(|k| k.event == event && k.tier >= min_tier)
            .collect()
    }
}

fn validate_surface(surface: &str) -> Result<(), String> {
    if surface.is_empty() {
        return Err("keyword surface is empty".into());
    }
    if surface.trim() != surface {
        return Err(format!("keyword {surface:?} has leading or trailing whitespace"));
    }
    if surface.to_lowercase() != surface {
        return Err(format!("keyword {surface:?} is not lowercase"));
    }
    let words: Vec<&str> = surface.split(' ').collect();
    if words.iter().any(|w| w.is_empty() || w.chars().any(char::is_whitespace)) {
        return Err(format!(
            "keyword {surface:?} must separate words with single spaces"
        ));
    }
    if words.len() > 2 {
        return Err(format!(
            "keyword {surface:?} has {} words; phrases are limited to two",
            words.len()
        ));
    }
    Ok(())
}

/// Reads and validates an ontology file.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<OntologySpec, OntologyError> {
    let path = path.as_ref();
    let json = fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    OntologySpec::parse(&json, Some(path))
}

pub fn write_ontology(spec: &OntologySpec, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, spec.to_json_string())
}

/// The bundled default ontology.
pub fn default_ontology() -> OntologySpec {
    OntologySpec::from_json_str(DEFAULT_ONTOLOGY_JSON).expect("bundled ontology is valid")
}

pub fn default_ontology_json() -> &'static str {
    DEFAULT_ONTOLOGY_JSON
}
