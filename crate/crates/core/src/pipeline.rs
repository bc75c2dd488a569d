//! End-to-end orchestration: ingest a corpus, build the weighted model for
//! a decision description, and score options against it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::corpus::{process_document, CorpusError, Document};
use crate::criteria::{extract_criteria, extract_relations, similar_names, CriteriaError};
use crate::decision::{
    generate_report, score_alternatives, DecisionError, DecisionReport, DecisionRequest,
    HierarchicalModel, Provenance, MODEL_SCHEMA,
};
use crate::gateway::Gateway;
use crate::index::{build_index, top_k, EmbeddingProvider, IndexError, VectorIndex};
use crate::mcdm::{ism_partition, transitive_closure, McdmError};
use crate::panel::{assign_domains, build_weights, PanelError};
use crate::store::{ChunkStore, CorpusManifest, ManifestDocument, StoreError, STORE_SCHEMA};

pub const INGEST_EXTENSIONS: [&str; 3] = ["txt", "md", "markdown"];

/// Failures tagged with the pipeline step that produced them.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no ingestible documents in {0}")]
    NoDocuments(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("segmenting `{doc_id}`: {source}")]
    Corpus {
        doc_id: String,
        #[source]
        source: CorpusError,
    },
    #[error("indexing: {0}")]
    Index(#[from] IndexError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("criteria: {0}")]
    Criteria(#[from] CriteriaError),
    #[error("hierarchy: {0}")]
    Hierarchy(#[from] McdmError),
    #[error("weighting: {0}")]
    Panel(#[from] PanelError),
    #[error("decision: {0}")]
    Decision(#[from] DecisionError),
}

#[derive(Debug)]
pub struct Ingested {
    pub store: ChunkStore,
    pub index: VectorIndex,
    pub warnings: Vec<String>,
}

/// `.txt`/`.md` files under `dir`, recursively, sorted by relative path.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
        let io = |source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        };
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| INGEST_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    files.sort();
    Ok(files)
}

fn doc_id_for(dir: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(dir).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// First non-blank line with markdown hashes removed.
pub fn guess_title(body: &str, fallback: &str) -> String {
    body.lines()
        .map(|l| l.trim().trim_start_matches('#').trim())
        .find(|l| !l.is_empty())
        .map(|l| l.chars().take(120).collect())
        .unwrap_or_else(|| fallback.to_string())
}

/// Segments and embeds every readable document. Unreadable or empty files
/// and boundary mismatches become warnings.
pub fn ingest_documents(
    docs: Vec<(Document, String)>,
    config: &Config,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
) -> Result<Ingested, PipelineError> {
    let detector = config.detector()?;
    let cluster = config.corpus.cluster;
    let processed: Vec<_> = docs
        .par_iter()
        .map(|(doc, _)| {
            process_document(doc, &detector, embedder, gateway, &cluster).map_err(|source| {
                PipelineError::Corpus {
                    doc_id: doc.doc_id.clone(),
                    source,
                }
            })
        })
        .collect();

    let mut warnings = Vec::new();
    let mut documents = Vec::new();
    let mut chunks = Vec::new();
    for ((doc, path), result) in docs.iter().zip(processed) {
        let (tree, seg) = result?;
        for m in &seg.mismatches {
            warnings.push(format!(
                "{}: heading {} not found after the previous boundary (`{}`); skipped",
                doc.doc_id, m.entry_id, m.needle
            ));
        }
        documents.push(ManifestDocument {
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            path: path.clone(),
            p_n: seg.chunks.len(),
            tree,
            mismatches: seg.mismatches,
        });
        chunks.extend(seg.chunks);
    }
    let index = build_index(&chunks, embedder)?;
    let manifest = CorpusManifest {
        schema_version: STORE_SCHEMA.into(),
        documents,
        embedding: config.embedding_label(),
        dim: index.dim(),
    };
    Ok(Ingested {
        store: ChunkStore::new(manifest, chunks)?,
        index,
        warnings,
    })
}

pub fn ingest_dir(
    dir: &Path,
    config: &Config,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
) -> Result<Ingested, PipelineError> {
    let mut warnings = Vec::new();
    let mut docs = Vec::new();
    for path in corpus_files(dir)? {
        let doc_id = doc_id_for(dir, &path);
        let body = match std::fs::read(&path).map(String::from_utf8) {
            Ok(Ok(body)) => body,
            Ok(Err(_)) => {
                warnings.push(format!("{doc_id}: not valid UTF-8; skipped"));
                continue;
            }
            Err(e) => {
                warnings.push(format!("{doc_id}: {e}; skipped"));
                continue;
            }
        };
        if body.trim().is_empty() {
            warnings.push(format!("{doc_id}: empty; skipped"));
            continue;
        }
        let title = guess_title(&body, &doc_id);
        let doc = Document::new(doc_id.clone(), title, body).map_err(|source| PipelineError::Corpus {
            doc_id: doc_id.clone(),
            source,
        })?;
        docs.push((doc, doc_id));
    }
    if docs.is_empty() {
        return Err(PipelineError::NoDocuments(dir.to_path_buf()));
    }
    let mut out = ingest_documents(docs, config, embedder, gateway)?;
    warnings.append(&mut out.warnings);
    out.warnings = warnings;
    Ok(out)
}

#[derive(Debug)]
pub struct Built {
    pub model: HierarchicalModel,
    pub warnings: Vec<String>,
}

/// Retrieval, criteria, relations, ISM levels and panel weights.
pub fn build_model(
    store: &ChunkStore,
    index: &VectorIndex,
    d: &str,
    config: &Config,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    generated_at: Option<String>,
) -> Result<Built, PipelineError> {
    if d.trim().is_empty() {
        return Err(DecisionError::EmptyDescription.into());
    }
    let mut warnings = Vec::new();
    let k = config.top_k.min(index.len());
    if k < config.top_k {
        warnings.push(format!(
            "top_k = {} exceeds the {} stored chunks; using k = {k}",
            config.top_k,
            index.len()
        ));
    }
    let hits = top_k(index, d, k, embedder)?;
    let criteria = extract_criteria(&hits, d, store, gateway)?;
    for (a, b) in similar_names(&criteria) {
        warnings.push(format!(
            "criteria {a} and {b} have near-identical names (`{}`, `{}`)",
            criteria[a].name, criteria[b].name
        ));
    }
    let relations = extract_relations(&criteria, d, gateway)?;
    let reachability = transitive_closure(&relations);
    let partition = ism_partition(&reachability)?;
    let roles = assign_domains(d, gateway, config.experts)?;
    let (weights, transcript) = build_weights(&partition, &criteria, &roles, d, gateway)?;
    for level in &transcript.levels {
        if level.fallback_all_accepted {
            warnings.push(format!(
                "level {}: every expert rationale was rejected; all rankings were used",
                level.level_index
            ));
        }
    }
    let model = HierarchicalModel {
        schema_version: MODEL_SCHEMA.into(),
        d: d.to_string(),
        criteria,
        relations,
        reachability,
        partition,
        weights,
        transcript,
        provenance: Provenance {
            manifest_hash: store.manifest_hash(),
            config: config.snapshot(),
            generated_at,
        },
    };
    model.validate()?;
    Ok(Built { model, warnings })
}

/// Scores the request's options and assembles the report. `store` supplies
/// source excerpts for the trace table.
pub fn decide(
    request: &DecisionRequest,
    model: &HierarchicalModel,
    store: Option<&ChunkStore>,
    gateway: &Gateway,
    generated_at: Option<String>,
) -> Result<DecisionReport, PipelineError> {
    request.validate(true)?;
    model.validate()?;
    let scores = score_alternatives(&request.options, &model.criteria, &request.d, gateway)?;
    Ok(generate_report(request, model, store, scores, gateway, generated_at)?)
}
