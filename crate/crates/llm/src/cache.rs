//! Two-tier response memoization: exact prompt match, then embedding similarity.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::Serialize;

/// Maps text to a vector for the semantic tier.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Lowercase word-frequency vectors over a vocabulary that grows as new words appear.
#[derive(Debug, Default)]
pub struct BagOfWords {
    vocabulary: RwLock<HashMap<String, usize>>,
}

impl BagOfWords {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
    }
}

impl Embedder for BagOfWords {
    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = Vec::new();
        for word in Self::words(text) {
            let known = self.vocabulary.read().unwrap().get(&word).copied();
            let idx = match known {
                Some(i) => i,
                None => {
                    let mut vocab = self.vocabulary.write().unwrap();
                    let next = vocab.len();
                    *vocab.entry(word).or_insert(next)
                }
            };
            if v.len() <= idx {
                v.resize(idx + 1, 0.0);
            }
            v[idx] += 1.0;
        }
        v
    }
}

/// Cosine similarity; missing trailing components count as zero. Zero vectors have
/// similarity 0 with everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheOutcome {
    ExactHit,
    SemanticHit,
    Miss,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub invocations: u64,
    pub exact_hits: u64,
    pub semantic_hits: u64,
    pub misses: u64,
    pub backend_calls: u64,
}

impl CacheStats {
    pub fn hits(&self) -> u64 {
        self.exact_hits + self.semantic_hits
    }
}

struct SemanticEntry {
    function: String,
    embedding: Vec<f64>,
    prompt: String,
    response: String,
}

#[derive(Default)]
struct Counters {
    invocations: AtomicU64,
    exact_hits: AtomicU64,
    semantic_hits: AtomicU64,
    misses: AtomicU64,
    backend_calls: AtomicU64,
}

/// Response cache keyed on (function name, prompt text). Readers run concurrently; inserts
/// take the write lock.
pub struct MemoCache {
    exact: RwLock<HashMap<(String, String), String>>,
    semantic: Option<(f64, Box<dyn Embedder>, RwLock<Vec<SemanticEntry>>)>,
    counters: Counters,
}

impl std::fmt::Debug for MemoCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MemoCache")
            .field("entries", &self.len())
            .field("threshold", &self.threshold())
            .field("stats", &self.stats())
            .finish()
    }
}

impl Default for MemoCache {
    fn default() -> Self {
        Self::exact_only()
    }
}

impl MemoCache {
    pub fn exact_only() -> Self {
        MemoCache {
            exact: RwLock::default(),
            semantic: None,
            counters: Counters::default(),
        }
    }

    /// Adds a semantic tier. `threshold` is clamped to (0, 1]; at 1.0 a semantic hit
    /// requires identical prompt text.
    pub fn with_semantic(threshold: f64, embedder: Box<dyn Embedder>) -> Self {
        MemoCache {
            semantic: Some((
                threshold.clamp(f64::MIN_POSITIVE, 1.0),
                embedder,
                RwLock::default(),
            )),
            ..Self::exact_only()
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        self.semantic.as_ref().map(|s| s.0)
    }

    pub fn len(&self) -> usize {
        self.exact.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exact_lookup(&self, function: &str, prompt: &str) -> Option<String> {
        self.exact
            .read()
            .unwrap()
            .get(&(function.to_string(), prompt.to_string()))
            .cloned()
    }

    /// Best entry of the same function with similarity at or above the threshold.
    pub fn semantic_lookup(&self, function: &str, prompt: &str) -> Option<String> {
        let (theta, embedder, entries) = self.semantic.as_ref()?;
        let entries = entries.read().unwrap();
        if *theta >= 1.0 {
            return entries
                .iter()
                .find(|e| e.function == function && e.prompt == prompt)
                .map(|e| e.response.clone());
        }
        let query = embedder.embed(prompt);
        entries
            .iter()
            .filter(|e| e.function == function)
            .map(|e| (cosine(&query, &e.embedding), e))
            .filter(|(sim, _)| *sim >= *theta)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, e)| e.response.clone())
    }

    /// Exact tier first, then the semantic tier.
    pub fn lookup(&self, function: &str, prompt: &str) -> Option<(CacheOutcome, String)> {
        if let Some(r) = self.exact_lookup(function, prompt) {
            return Some((CacheOutcome::ExactHit, r));
        }
        self.semantic_lookup(function, prompt)
            .map(|r| (CacheOutcome::SemanticHit, r))
    }

    pub fn insert(&self, function: &str, prompt: &str, response: &str) {
        let fresh = self
            .exact
            .write()
            .unwrap()
            .insert(
                (function.to_string(), prompt.to_string()),
                response.to_string(),
            )
            .is_none();
        if let (true, Some((_, embedder, entries))) = (fresh, &self.semantic) {
            let embedding = embedder.embed(prompt);
            entries.write().unwrap().push(SemanticEntry {
                function: function.to_string(),
                embedding,
                prompt: prompt.to_string(),
                response: response.to_string(),
            });
        }
    }

    /// Counts one invocation served from the cache.
    pub fn record_hit(&self, outcome: CacheOutcome) {
        self.counters.invocations.fetch_add(1, Ordering::Relaxed);
        match outcome {
            CacheOutcome::ExactHit => &self.counters.exact_hits,
            CacheOutcome::SemanticHit => &self.counters.semantic_hits,
            CacheOutcome::Miss => unreachable!("a miss is recorded with record_backend_call"),
        }
        .fetch_add(1, Ordering::Relaxed);
    }

    /// Counts one invocation that went to the backend.
    pub fn record_backend_call(&self) {
        self.counters.invocations.fetch_add(1, Ordering::Relaxed);
        self.counters.misses.fetch_add(1, Ordering::Relaxed);
        self.counters.backend_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn stats(&self) -> CacheStats {
        let c = &self.counters;
        CacheStats {
            invocations: c.invocations.load(Ordering::Relaxed),
            exact_hits: c.exact_hits.load(Ordering::Relaxed),
            semantic_hits: c.semantic_hits.load(Ordering::Relaxed),
            misses: c.misses.load(Ordering::Relaxed),
            backend_calls: c.backend_calls.load(Ordering::Relaxed),
        }
    }
}
