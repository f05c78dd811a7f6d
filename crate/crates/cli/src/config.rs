//! Pipeline configuration file. Every field is optional; command-line flags
//! override whatever the file sets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use epipulse_core::embed::ProviderKind;
use epipulse_core::filter::{BUILTIN_DEFAULT_THRESHOLD, REMOTE_DEFAULT_THRESHOLD};
use epipulse_core::monitor::WarningParams;
use epipulse_core::ontology::{default_ontology, load_ontology, OntologySpec, Tier};
use epipulse_core::preprocess::NormalizationPolicy;
use epipulse_core::sample::SamplingMode;
use serde::Deserialize;

pub const ENDPOINT_ENV: &str = "EPIPULSE_EMBED_ENDPOINT";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ontology_path: Option<PathBuf>,
    pub normalization: NormalizationPolicy,
    pub embedding: EmbeddingSection,
    pub sampling: SamplingSection,
    pub detection: DetectionSection,
    pub warning: WarningSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub kind: Option<ProviderKind>,
    pub dimension: Option<usize>,
    pub endpoint: Option<String>,
    pub threshold: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub target_total: Option<usize>,
    pub mode: Option<SamplingMode>,
    pub rng_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub min_tier: Option<Tier>,
    pub endpoint: Option<String>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarningSection {
    pub w: Option<usize>,
    pub b: Option<usize>,
    pub k: Option<f64>,
    pub min_events: Option<u64>,
    pub cooldown: Option<usize>,
}

/// Default locations used when a subcommand's own flag is absent.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub gold: Option<PathBuf>,
    pub reported_cases: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that can be checked without touching inputs.
    pub fn validate(&self) -> Result<()> {
        let e = &self.embedding;
        if let Some(t) = e.threshold {
            if !(-1.0..=1.0).contains(&t) {
                bail!("embedding.threshold {t} outside [-1, 1]");
            }
        }
        if e.dimension == Some(0) {
            bail!("embedding.dimension must be positive");
        }
        if e.max_in_flight == Some(0) || e.batch_size == Some(0) {
            bail!("embedding.max_in_flight and embedding.batch_size must be positive");
        }
        self.warning(&WarningSection::default()).validate()?;
        if let Some(path) = &self.ontology_path {
            load_ontology(path).with_context(|| format!("loading ontology {}", path.display()))?;
        }
        Ok(())
    }

    /// Ontology from the flag, else the config, else the built-in default.
    pub fn ontology(&self, flag: Option<&Path>) -> Result<OntologySpec> {
        match flag.or(self.ontology_path.as_deref()) {
            Some(path) => load_ontology(path).with_context(|| format!("loading ontology {}", path.display())),
            None => Ok(default_ontology()),
        }
    }

    /// Warning parameters with flag overrides applied, then validated.
    pub fn warning(&self, flags: &WarningSection) -> WarningParams {
        let d = WarningParams::default();
        let c = &self.warning;
        WarningParams {
            w: flags.w.or(c.w).unwrap_or(d.w),
            b: flags.b.or(c.b).unwrap_or(d.b),
            k: flags.k.or(c.k).unwrap_or(d.k),
            min_events: flags.min_events.or(c.min_events).unwrap_or(d.min_events),
            cooldown: flags.cooldown.or(c.cooldown).unwrap_or(d.cooldown),
        }
    }

    /// Flag, then config, then the environment.
    pub fn embed_endpoint(&self, flag: Option<&str>) -> Option<String> {
        flag.map(str::to_string)
            .or_else(|| self.embedding.endpoint.clone())
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
    }
}

pub fn default_threshold(kind: ProviderKind) -> f64 {
    match kind {
        ProviderKind::BuiltinHash => BUILTIN_DEFAULT_THRESHOLD,
        ProviderKind::Remote => REMOTE_DEFAULT_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"embedding": {"kind": "remote", "model": "x"}}"#);
        assert!(err.is_err());
        let err = serde_json::from_str::<PipelineConfig>(r#"{"sampl": {}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn flags_win() {
        let c: PipelineConfig = serde_json::from_str(r#"{"warning": {"w": 3, "k": 1.5}}"#).unwrap();
        let p = c.warning(&WarningSection {
            k: Some(2.5),
            ..Default::default()
        });
        assert_eq!((p.w, p.b, p.k), (3, 28, 2.5));
    }

    #[test]
    fn bad_values_fail_validation() {
        for json in [
            r#"{"embedding": {"threshold": 1.2}}"#,
            r#"{"embedding": {"dimension": 0}}"#,
            r#"{"warning": {"w": 0}}"#,
            r#"{"warning": {"k": -1}}"#,
        ] {
            let c: PipelineConfig = serde_json::from_str(json).unwrap();
            assert!(c.validate().is_err(), "{json}");
        }
    }
}
