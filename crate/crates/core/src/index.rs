//! Chunk embeddings and exact top-k cosine retrieval.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;
use crate::gateway::RemoteConfig;
use crate::text::{stable_hash, tokens};

pub const DEFAULT_MOCK_DIM: usize = 64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("expected {expected} embeddings, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding has non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IndexError {
    #[error("cannot build an index from zero chunks")]
    Empty,
    #[error("vector for `{chunk_id}` has dimension {got}, index expects {expected}")]
    DimensionMismatch {
        chunk_id: String,
        expected: usize,
        got: usize,
    },
    #[error("chunk id `{0}` appears twice")]
    DuplicateChunk(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Turns texts into fixed-length vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError>;

    fn embed_one(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.embed(&[text])?
            .pop()
            .ok_or(EmbeddingError::CountMismatch { expected: 1, got: 0 })
    }
}

/// Hashed bag-of-tokens embedding: every token adds ±1 to a seeded bucket,
/// and the result is scaled to unit length. Equal token multisets give
/// equal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim: dim.max(1) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, text: &str) -> Vec<f64> {
        let seed = self.seed.to_string();
        let mut v = vec![0.0; self.dim];
        let toks = tokens(text);
        if toks.is_empty() {
            let h = stable_hash(&[&seed, "\u{0}empty"]);
            v[(h % self.dim as u64) as usize] = 1.0;
            return v;
        }
        for t in &toks {
            let h = stable_hash(&[&seed, t]);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // Opposite-signed collisions cancelled out entirely.
            let h = stable_hash(&[&seed, "\u{0}cancelled", &toks.join(" ")]);
            v[(h % self.dim as u64) as usize] = 1.0;
            return v;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Embeddings over HTTP: `POST {model, input}` → `{data: [{embedding}]}`.
pub struct RemoteEmbedder {
    config: RemoteConfig,
    agent: ureq::Agent,
    limiter: crate::limit::InFlight,
    batch: usize,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let limiter = crate::limit::InFlight::new(config.max_in_flight);
        Self {
            config,
            agent,
            limiter,
            batch: 64,
        }
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let body = EmbeddingRequest {
            model: &self.config.model,
            input: texts,
        };
        self.limiter.run(|| {
            let mut req = self.agent.post(&self.config.endpoint);
            if let Some(key) = &self.config.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req
                .send_json(&body)
                .map_err(|e| EmbeddingError::Provider(e.to_string()))?;
            let parsed: EmbeddingResponse = resp
                .body_mut()
                .read_json()
                .map_err(|e| EmbeddingError::Provider(format!("unreadable response: {e}")))?;
            Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch) {
            let got = self.request(batch)?;
            if got.len() != batch.len() {
                return Err(EmbeddingError::CountMismatch {
                    expected: batch.len(),
                    got: got.len(),
                });
            }
            out.extend(got);
        }
        if out.iter().flatten().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(out)
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chunk_id: String,
    pub values: Vec<f64>,
}

/// Exact-scan vector store keyed by chunk id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PersistedIndex", into = "PersistedIndex")]
pub struct VectorIndex {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PersistedIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

impl From<VectorIndex> for PersistedIndex {
    fn from(idx: VectorIndex) -> Self {
        PersistedIndex {
            dim: idx.dim,
            entries: idx
                .entries
                .into_iter()
                .map(|(chunk_id, values)| IndexEntry { chunk_id, values })
                .collect(),
        }
    }
}

impl TryFrom<PersistedIndex> for VectorIndex {
    type Error = IndexError;

    fn try_from(p: PersistedIndex) -> Result<Self, Self::Error> {
        let mut idx = VectorIndex {
            dim: p.dim,
            entries: BTreeMap::new(),
        };
        for e in p.entries {
            idx.insert(e.chunk_id, e.values)?;
        }
        Ok(idx)
    }
}

impl VectorIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&[f64]> {
        self.entries.get(chunk_id).map(Vec::as_slice)
    }

    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn insert(&mut self, chunk_id: String, values: Vec<f64>) -> Result<(), IndexError> {
        if values.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                chunk_id,
                expected: self.dim,
                got: values.len(),
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite.into());
        }
        if self.entries.contains_key(&chunk_id) {
            return Err(IndexError::DuplicateChunk(chunk_id));
        }
        self.entries.insert(chunk_id, values);
        Ok(())
    }

    /// Ranks every stored vector against `query`.
    pub fn search_vector(&self, query: &[f64], k: usize) -> Result<RetrievalResult, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                chunk_id: "<query>".into(),
                expected: self.dim,
                got: query.len(),
            });
        }
        let mut hits: Vec<Hit> = self
            .entries
            .iter()
            .map(|(id, v)| Hit {
                chunk_id: id.clone(),
                score: cosine(query, v),
            })
            .collect();
        // BTreeMap iteration is already ascending by id, so a stable sort
        // on score alone keeps the id tie-break.
        hits.sort_by(|a, b| b.score.total_cmp(&a.score));
        hits.truncate(k);
        Ok(RetrievalResult { hits, k })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
    pub k: usize,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

pub fn build_index(
    chunks: &[Chunk],
    embedder: &dyn EmbeddingProvider,
) -> Result<VectorIndex, IndexError> {
    if chunks.is_empty() {
        return Err(IndexError::Empty);
    }
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let vectors = embedder.embed(&texts)?;
    if vectors.len() != chunks.len() {
        return Err(EmbeddingError::CountMismatch {
            expected: chunks.len(),
            got: vectors.len(),
        }
        .into());
    }
    let mut index = VectorIndex {
        dim: vectors[0].len(),
        entries: BTreeMap::new(),
    };
    for (chunk, v) in chunks.iter().zip(vectors) {
        index.insert(chunk.chunk_id.clone(), v)?;
    }
    Ok(index)
}

pub fn top_k(
    index: &VectorIndex,
    query: &str,
    k: usize,
    embedder: &dyn EmbeddingProvider,
) -> Result<RetrievalResult, IndexError> {
    if k == 0 {
        return Err(IndexError::ZeroK);
    }
    let q = embedder.embed_one(query)?;
    index.search_vector(&q, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: "d".into(),
            ordinal: 1,
            hierarchy_path: vec![],
            span: Span::new(0, text.len()),
            text: text.into(),
        }
    }

    /// Returns a fixed vector per exact text.
    struct TableEmbedder(Vec<(&'static str, Vec<f64>)>);

    impl EmbeddingProvider for TableEmbedder {
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
            texts
                .iter()
                .map(|t| {
                    self.0
                        .iter()
                        .find(|(k, _)| k == t)
                        .map(|(_, v)| v.clone())
                        .ok_or_else(|| EmbeddingError::Provider(format!("no vector for {t}")))
                })
                .collect()
        }
    }

    #[test]
    fn one_entry_per_chunk() {
        let e = MockEmbedder::new(1, 16);
        let chunks = [chunk("a", "x y"), chunk("b", "y z"), chunk("c", "z")];
        let idx = build_index(&chunks, &e).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 16);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(build_index(&[], &MockEmbedder::new(1, 8)), Err(IndexError::Empty));
    }

    #[test]
    fn duplicate_text_gives_identical_vectors() {
        let idx = build_index(&[chunk("a", "same text"), chunk("b", "same text")], &MockEmbedder::new(3, 32)).unwrap();
        assert_eq!(idx.get("a"), idx.get("b"));
    }

    #[test]
    fn exhaustive_k_returns_everything_sorted() {
        let e = MockEmbedder::new(2, 32);
        let chunks = [chunk("a", "grid capacity"), chunk("b", "tariff design"), chunk("c", "grid tariff")];
        let idx = build_index(&chunks, &e).unwrap();
        let r = top_k(&idx, "grid", 10, &e).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.hits.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn self_query_ranks_first_with_unit_score() {
        let e = MockEmbedder::new(2, 64);
        let chunks = [chunk("a", "grid capacity limits"), chunk("b", "tariff design for depots")];
        let idx = build_index(&chunks, &e).unwrap();
        let r = top_k(&idx, "tariff design for depots", 1, &e).unwrap();
        assert_eq!(r.hits[0].chunk_id, "b");
        assert!((r.hits[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_query_ties_break_by_id() {
        let e = TableEmbedder(vec![
            ("c2", vec![1.0, 0.0, 0.0]),
            ("c1", vec![0.0, 1.0, 0.0]),
            ("c3", vec![1.0, 1.0, 0.0]),
            ("q", vec![0.0, 0.0, 1.0]),
        ]);
        let chunks = [chunk("c2", "c2"), chunk("c1", "c1"), chunk("c3", "c3")];
        let idx = build_index(&chunks, &e).unwrap();
        let r = top_k(&idx, "q", 3, &e).unwrap();
        let ids: Vec<_> = r.hits.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c2", "c3"]);
        assert!(r.hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let e = TableEmbedder(vec![("a", vec![1.0, 0.0]), ("b", vec![1.0])]);
        let err = build_index(&[chunk("a", "a"), chunk("b", "b")], &e).unwrap_err();
        assert!(matches!(err, IndexError::DimensionMismatch { .. }));
    }

    #[test]
    fn zero_k_is_rejected() {
        let e = MockEmbedder::new(0, 8);
        let idx = build_index(&[chunk("a", "a")], &e).unwrap();
        assert_eq!(top_k(&idx, "a", 0, &e), Err(IndexError::ZeroK));
    }

    #[test]
    fn persisted_form_round_trips() {
        let e = MockEmbedder::new(0, 8);
        let idx = build_index(&[chunk("b", "b"), chunk("a", "a")], &e).unwrap();
        let json = serde_json::to_string(&idx).unwrap();
        assert!(json.starts_with(r#"{"dim":8,"entries":[{"chunk_id":"a""#));
        let back: VectorIndex = serde_json::from_str(&json).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
