//! Event-balanced sampling of a tagged pool, plus a plain random control.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::TaggedPost;
use crate::ontology::EventType;
use crate::rng::SeededRng as Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub target_total: usize,
    pub mode: SamplingMode,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("asked for {requested} posts but the pool holds {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("post id {0:?} appears twice in the pool")]
    DuplicateId(String),
}

/// Per-event quotas for a uniform draw of `n` posts from buckets of the
/// given sizes.
///
/// Each event starts at `n / 7`, the remainder going one each to events in
/// canonical order. An event whose bucket cannot cover its quota is capped
/// at its bucket size and the shortfall is handed out one post at a time,
/// cycling through events in canonical order and skipping events without
/// spare posts.
pub fn uniform_quotas(n: usize, bucket_sizes: &[usize; EventType::COUNT]) -> [usize; EventType::COUNT] {
    let k = EventType::COUNT;
    let mut quotas = [n / k; EventType::COUNT];
    for q in quotas.iter_mut().take(n % k) {
        *q += 1;
    }
    let mut deficit = 0;
    for (q, &size) in quotas.iter_mut().zip(bucket_sizes) {
        if *q > size {
            deficit += *q - size;
            *q = size;
        }
    }
    while deficit > 0 {
        let mut progressed = false;
        for (q, &size) in quotas.iter_mut().zip(bucket_sizes) {
            if deficit == 0 {
                break;
            }
            if *q < size {
                *q += 1;
                deficit -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    quotas
}

/// Partial Fisher–Yates: `k` distinct picks from `items`.
fn choose(rng: &mut Rng, items: &[usize], k: usize) -> Vec<usize> {
    let mut items = items.to_vec();
    for i in 0..k {
        let j = i + rng.below(items.len() - i);
        items.swap(i, j);
    }
    items.truncate(k);
    items
}

/// Algorithm R reservoir over `0..len`.
fn reservoir(rng: &mut Rng, len: usize, k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = (0..k).collect();
    for i in k..len {
        let j = rng.below(i + 1);
        if j < k {
            chosen[j] = i;
        }
    }
    chosen
}

/// Pool indices of the sample, ascending.
pub fn sample_indices(pool: &[TaggedPost], plan: &SamplingPlan) -> Result<Vec<usize>, SampleError> {
    let mut ids = HashSet::with_capacity(pool.len());
    for item in pool {
        if !ids.insert(item.post.id.as_str()) {
            return Err(SampleError::DuplicateId(item.post.id.clone()));
        }
    }
    let n = plan.target_total;
    if n > pool.len() {
        return Err(SampleError::PoolTooSmall {
            requested: n,
            available: pool.len(),
        });
    }

    let mut rng = Rng::new(plan.rng_seed);
    let mut chosen = match plan.mode {
        SamplingMode::Random => reservoir(&mut rng, pool.len(), n),
        SamplingMode::Uniform => {
            let mut buckets: [Vec<usize>; EventType::COUNT] = Default::default();
            for (i, item) in pool.iter().enumerate() {
                buckets[item.tag.best_event.index()].push(i);
            }
            let sizes = buckets.each_ref().map(Vec::len);
            let quotas = uniform_quotas(n, &sizes);
            buckets
                .iter()
                .zip(quotas)
                .flat_map(|(bucket, q)| choose(&mut rng, bucket, q))
                .collect()
        }
    };
    chosen.sort_unstable();
    Ok(chosen)
}

/// Draws a sample according to `plan`. Output keeps pool order.
pub fn draw_sample(pool: &[TaggedPost], plan: &SamplingPlan) -> Result<Vec<TaggedPost>, SampleError> {
    Ok(sample_indices(pool, plan)?
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}
