//! Epidemic event extraction from social-media posts: normalization,
//! similarity filtering, balanced sampling, keyword detection, scoring and
//! early-warning time series.

mod bounded;

pub mod detect;
pub mod embed;
pub mod evaluate;
pub mod filter;
pub mod jsonl;
pub mod monitor;
pub mod ontology;
pub mod preprocess;
pub mod rng;
pub mod sample;
pub mod selfcheck;
pub mod synth;
pub mod text;

pub use detect::{EventMention, KeywordMatcher, PredictionSet, TriggerSpan};
pub use embed::{cosine, Embedder, EmbeddingProvider, EmbeddingVector, HashEmbedder, RemoteEmbedder};
pub use evaluate::{EvalReport, GoldCorpus, KappaReport};
pub use filter::{FilterTag, TaggedPost};
pub use monitor::{DiseaseProfile, EventTimeSeries, WarningParams, WarningSignal};
pub use ontology::{EventType, OntologySpec, Tier};
pub use preprocess::{CleanPost, NormalizationPolicy, RawPost};
pub use sample::{SamplingMode, SamplingPlan};
