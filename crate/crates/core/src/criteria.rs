//! Criteria set F (one criterion per retrieved chunk) and the pairwise
//! direct-influence matrix E.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CriterionBrief, Gateway, GatewayError};
use crate::index::RetrievalResult;
use crate::store::ChunkStore;

/// Token-set overlap at which two criterion names are flagged as likely
/// duplicates.
pub const DUPLICATE_NAME_OVERLAP: f64 = 0.9;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("no retrieved chunks to extract criteria from")]
    NoHits,
    #[error("decision description is empty")]
    EmptyDescription,
    #[error("retrieved chunk `{0}` is not in the chunk store")]
    UnknownChunk(String),
    #[error("criterion extraction failed for chunk `{chunk_id}`: {source}")]
    Extraction {
        chunk_id: String,
        #[source]
        source: GatewayError,
    },
    #[error("relation judgment failed for pair ({from}, {to}): {source}")]
    Relation {
        from: usize,
        to: usize,
        #[source]
        source: GatewayError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub criterion_id: usize,
    pub name: String,
    pub description: String,
    pub source_chunk: String,
    pub relevance: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub structured_facets: BTreeMap<String, String>,
}

impl Criterion {
    pub fn brief(&self) -> CriterionBrief {
        CriterionBrief {
            name: self.name.clone(),
            description: self.description.clone(),
        }
    }
}

/// Hollow binary k×k matrix; `cells[a][b] == 1` means a directly
/// influences b.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMatrix {
    size: usize,
    cells: Vec<Vec<u8>>,
}

impl RelationMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            cells: vec![vec![0; size]; size],
        }
    }

    pub fn from_cells(cells: Vec<Vec<u8>>) -> Result<Self, String> {
        let m = Self {
            size: cells.len(),
            cells,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, a: usize, b: usize) -> u8 {
        self.cells[a][b]
    }

    /// Sets an off-diagonal cell. Diagonal writes are ignored.
    pub fn set(&mut self, a: usize, b: usize, value: u8) {
        if a != b {
            self.cells[a][b] = u8::from(value != 0);
        }
    }

    pub fn cells(&self) -> &[Vec<u8>] {
        &self.cells
    }

    pub fn edge_count(&self) -> usize {
        self.cells.iter().flatten().filter(|&&c| c == 1).count()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cells.len() != self.size || self.cells.iter().any(|r| r.len() != self.size) {
            return Err("relation matrix is not square".into());
        }
        for (a, row) in self.cells.iter().enumerate() {
            if row[a] != 0 {
                return Err(format!("self-relation on criterion {a}"));
            }
            if row.iter().any(|&c| c > 1) {
                return Err(format!("non-binary cell in row {a}"));
            }
        }
        Ok(())
    }
}

/// One criterion per hit, in hit order. Relevance falls back to the
/// retrieval score when the gateway does not report one.
pub fn extract_criteria(
    hits: &RetrievalResult,
    d: &str,
    store: &ChunkStore,
    gateway: &Gateway,
) -> Result<Vec<Criterion>, CriteriaError> {
    if hits.is_empty() {
        return Err(CriteriaError::NoHits);
    }
    if d.trim().is_empty() {
        return Err(CriteriaError::EmptyDescription);
    }
    let chunks = hits
        .hits
        .iter()
        .map(|h| {
            store
                .chunk(&h.chunk_id)
                .ok_or_else(|| CriteriaError::UnknownChunk(h.chunk_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<_> = hits
        .hits
        .par_iter()
        .zip(chunks.par_iter())
        .enumerate()
        .map(|(id, (hit, chunk))| {
            let extracted = gateway
                .extract_criterion(d, &chunk.chunk_id, store.heading_path(chunk), &chunk.text)
                .map_err(|source| CriteriaError::Extraction {
                    chunk_id: chunk.chunk_id.clone(),
                    source,
                })?;
            Ok(Criterion {
                criterion_id: id,
                name: extracted.name,
                description: extracted.description,
                source_chunk: chunk.chunk_id.clone(),
                relevance: extracted.relevance.unwrap_or(hit.score.clamp(0.0, 1.0)),
                structured_facets: extracted.facets,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Judges every ordered pair `a != b`; k(k-1) gateway calls.
pub fn extract_relations(
    criteria: &[Criterion],
    d: &str,
    gateway: &Gateway,
) -> Result<RelationMatrix, CriteriaError> {
    let k = criteria.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let answers: Vec<_> = pairs
        .par_iter()
        .map(|&(a, b)| {
            gateway
                .judge_relation(d, criteria[a].brief(), criteria[b].brief())
                .map_err(|source| CriteriaError::Relation {
                    from: a,
                    to: b,
                    source,
                })
        })
        .collect();
    let mut e = RelationMatrix::zeros(k);
    for (&(a, b), answer) in pairs.iter().zip(answers) {
        e.set(a, b, u8::from(answer?));
    }
    Ok(e)
}

/// Pairs of criteria whose names overlap by at least
/// [`DUPLICATE_NAME_OVERLAP`]. Flagged only; nothing is merged.
pub fn similar_names(criteria: &[Criterion]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..criteria.len() {
        for b in (a + 1)..criteria.len() {
            if crate::text::jaccard(&criteria[a].name, &criteria[b].name) >= DUPLICATE_NAME_OVERLAP {
                out.push((a, b));
            }
        }
    }
    out
}
