//! Sentence embeddings behind a provider abstraction.
//!
//! Two providers share one contract: the built-in signed feature-hashing
//! embedder (deterministic, model-free) and a blocking HTTP client for a
//! remote embedding service.
//!
//! Remote protocol:
//!
//! * `GET {endpoint}/health` → `{"status": "ok", "dim": D}`
//! * `POST {endpoint}/embed` with `{"texts": [...]}` → `{"vectors": [[...], ...], "dim": D}`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounded::run_in_order;

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_REMOTE_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding service unreachable at {endpoint} (batch starting at text {index}): {message}")]
    Unreachable {
        endpoint: String,
        index: usize,
        message: String,
    },
    #[error("embedding service returned dimension {got} for text {index}, expected {expected}")]
    RemoteDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("embedding service protocol violation (batch starting at text {index}): {message}")]
    Protocol { index: usize, message: String },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("remote provider needs an endpoint")]
    MissingEndpoint,
}

/// A dense embedding. Unit L2 norm, or all zeros for text without features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Scale to unit length; the zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= norm);
        }
        self
    }
}

/// Cosine similarity in `[-1, 1]`; 0 when either side is the zero vector.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dimension() != v.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: u.dimension(),
            right: v.dimension(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Anything that turns texts into fixed-dimension vectors, one per input,
/// in input order.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Signed feature hashing of whole words and character 3–5-grams.
///
/// Text is lowercased and split into maximal alphanumeric runs. Each word `w`
/// contributes the feature `w:<w>` and every character n-gram (n = 3..=5) of
/// `<w>` padded with angle brackets as `c:<gram>`. A feature hashes with
/// 64-bit FNV-1a followed by the SplitMix64 finalizer; the bucket is
/// `h mod D` and the sign is `+1` when bit 63 is clear, `-1` otherwise.
/// Occurrences accumulate (term frequency) and the result is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(HashEmbedder { dimension })
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dimension];
        for_each_feature(text, |feature| {
            let h = feature_hash(feature.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            values[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        });
        EmbeddingVector(values).normalized()
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dimension: DEFAULT_DIMENSION,
        }
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}

fn for_each_feature(text: &str, mut emit: impl FnMut(&str)) {
    let lower = text.to_lowercase();
    let mut feature = String::new();
    for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        feature.clear();
        feature.push_str("w:");
        feature.push_str(word);
        emit(&feature);

        let padded: Vec<char> = std::iter::once('<')
            .chain(word.chars())
            .chain(std::iter::once('>'))
            .collect();
        for n in 3..=5 {
            for gram in padded.windows(n) {
                feature.clear();
                feature.push_str("c:");
                feature.extend(gram);
                emit(&feature);
            }
        }
    }
}

fn feature_hash(bytes: &[u8]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // SplitMix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Deserialize)]
struct HealthResponse {
    status: String,
    dim: usize,
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Blocking client for a remote embedding service.
///
/// Texts go out in batches of `batch_size`; at most `max_in_flight` batches
/// are outstanding at once. Vectors come back in input order. The service is
/// responsible for normalization.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    dimension: usize,
    max_in_flight: usize,
    batch_size: usize,
}

impl RemoteEmbedder {
    /// Probes `/health` and records the dimension the service reports.
    pub fn connect(endpoint: &str) -> Result<Self, EmbedError> {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let url = format!("{endpoint}/health");
        let unreachable = |message: String| EmbedError::Unreachable {
            endpoint: endpoint.clone(),
            index: 0,
            message,
        };
        let health: HealthResponse = ureq::get(&url)
            .call()
            .map_err(|e| unreachable(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Protocol {
                index: 0,
                message: format!("bad /health body: {e}"),
            })?;
        if health.status != "ok" {
            return Err(unreachable(format!("service status is {:?}", health.status)));
        }
        if health.dim == 0 {
            return Err(EmbedError::Protocol {
                index: 0,
                message: "service reports dimension 0".into(),
            });
        }
        Ok(RemoteEmbedder {
            endpoint,
            dimension: health.dim,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            batch_size: DEFAULT_REMOTE_BATCH,
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

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn embed_batch(&self, offset: usize, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let url = format!("{}/embed", self.endpoint);
        let response: EmbedResponse = ureq::post(&url)
            .send_json(EmbedRequest { texts })
            .map_err(|e| EmbedError::Unreachable {
                endpoint: self.endpoint.clone(),
                index: offset,
                message: e.to_string(),
            })?
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Protocol {
                index: offset,
                message: format!("bad /embed body: {e}"),
            })?;
        if response.vectors.len() != texts.len() {
            return Err(EmbedError::Protocol {
                index: offset,
                message: format!("sent {} texts, got {} vectors", texts.len(), response.vectors.len()),
            });
        }
        if response.dim != self.dimension {
            return Err(EmbedError::RemoteDimension {
                index: offset,
                expected: self.dimension,
                got: response.dim,
            });
        }
        response
            .vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != self.dimension {
                    Err(EmbedError::RemoteDimension {
                        index: offset + i,
                        expected: self.dimension,
                        got: v.len(),
                    })
                } else {
                    Ok(EmbeddingVector(v))
                }
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let batches: Vec<&[&str]> = texts.chunks(self.batch_size).collect();
        let outcomes = run_in_order(batches.len(), self.max_in_flight, |i| {
            self.embed_batch(i * self.batch_size, batches[i])
        });
        let mut out = Vec::with_capacity(texts.len());
        for outcome in outcomes {
            out.extend(outcome?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    BuiltinHash,
    Remote,
}

/// Provider selection as it appears in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub endpoint: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::BuiltinHash,
            dimension: None,
            endpoint: None,
        }
    }
}

/// A constructed provider. Stateless after construction and shareable
/// across threads.
#[derive(Debug, Clone)]
pub enum EmbeddingProvider {
    Builtin(HashEmbedder),
    Remote(RemoteEmbedder),
}

impl EmbeddingProvider {
    pub fn builtin() -> Self {
        EmbeddingProvider::Builtin(HashEmbedder::default())
    }

    pub fn from_config(config: &ProviderConfig) -> Result<Self, EmbedError> {
        match config.kind {
            ProviderKind::BuiltinHash => Ok(EmbeddingProvider::Builtin(HashEmbedder::new(
                config.dimension.unwrap_or(DEFAULT_DIMENSION),
            )?)),
            ProviderKind::Remote => {
                let endpoint = config.endpoint.as_deref().ok_or(EmbedError::MissingEndpoint)?;
                let remote = RemoteEmbedder::connect(endpoint)?;
                if let Some(expected) = config.dimension {
                    if expected != remote.dimension {
                        return Err(EmbedError::RemoteDimension {
                            index: 0,
                            expected,
                            got: remote.dimension,
                        });
                    }
                }
                Ok(EmbeddingProvider::Remote(remote))
            }
        }
    }

    pub fn kind(&self) -> ProviderKind {
        match self {
            EmbeddingProvider::Builtin(_) => ProviderKind::BuiltinHash,
            EmbeddingProvider::Remote(_) => ProviderKind::Remote,
        }
    }
}

impl Embedder for EmbeddingProvider {
    fn dimension(&self) -> usize {
        match self {
            EmbeddingProvider::Builtin(e) => e.dimension(),
            EmbeddingProvider::Remote(e) => e.dimension(),
        }
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        match self {
            EmbeddingProvider::Builtin(e) => e.embed_texts(texts),
            EmbeddingProvider::Remote(e) => e.embed_texts(texts),
        }
    }
}
