//! On-disk chunk store: `chunks.jsonl` (one chunk per line), `manifest.json`
//! (per-document title, path, chunk count and directory) and `index.json`
//! (the embedding index).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BoundaryMismatch, Chunk, DirectoryTree};
use crate::index::VectorIndex;
use crate::text::sha256_hex;

pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.json";
pub const STORE_SCHEMA: &str = "rad.store/1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("store is inconsistent: {0}")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDocument {
    pub doc_id: String,
    pub title: String,
    /// Path relative to the ingested corpus directory.
    pub path: String,
    /// Number of chunks.
    pub p_n: usize,
    pub tree: DirectoryTree,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mismatches: Vec<BoundaryMismatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: String,
    pub documents: Vec<ManifestDocument>,
    pub embedding: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStore {
    pub manifest: CorpusManifest,
    chunks: Vec<Chunk>,
    by_id: BTreeMap<String, usize>,
}

impl ChunkStore {
    pub fn new(manifest: CorpusManifest, chunks: Vec<Chunk>) -> Result<Self, StoreError> {
        let mut by_id = BTreeMap::new();
        for (i, c) in chunks.iter().enumerate() {
            if by_id.insert(c.chunk_id.clone(), i).is_some() {
                return Err(StoreError::Inconsistent(format!(
                    "duplicate chunk id `{}`",
                    c.chunk_id
                )));
            }
        }
        for doc in &manifest.documents {
            let n = chunks.iter().filter(|c| c.doc_id == doc.doc_id).count();
            if n != doc.p_n {
                return Err(StoreError::Inconsistent(format!(
                    "manifest lists {} chunks for `{}`, store has {n}",
                    doc.p_n, doc.doc_id
                )));
            }
        }
        Ok(Self {
            manifest,
            chunks,
            by_id,
        })
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn document(&self, doc_id: &str) -> Option<&ManifestDocument> {
        self.manifest.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Heading texts from the root down to the chunk's entry.
    pub fn heading_path(&self, chunk: &Chunk) -> Vec<String> {
        let Some(doc) = self.document(&chunk.doc_id) else {
            return Vec::new();
        };
        chunk
            .hierarchy_path
            .iter()
            .filter_map(|id| doc.tree.find(id).map(|e| e.heading_text.clone()))
            .collect()
    }

    pub fn manifest_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    pub fn manifest_hash(&self) -> String {
        sha256_hex(&self.manifest_bytes())
    }

    pub fn save(&self, dir: &Path, index: &VectorIndex) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let path = dir.join(CHUNKS_FILE);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        for c in &self.chunks {
            serde_json::to_writer(&mut w, c).map_err(|source| StoreError::Json {
                path: path.clone(),
                line: 0,
                source,
            })?;
            w.write_all(b"\n").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;

        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.manifest_bytes()).map_err(io_err(&path))?;

        let path = dir.join(INDEX_FILE);
        let mut bytes = serde_json::to_vec(index).expect("index serializes");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<(Self, VectorIndex), StoreError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let manifest: CorpusManifest =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
                path: path.clone(),
                line: 0,
                source,
            })?;

        let path = dir.join(CHUNKS_FILE);
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let mut chunks = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            chunks.push(serde_json::from_str(&line).map_err(|source| StoreError::Json {
                path: path.clone(),
                line: i + 1,
                source,
            })?);
        }

        let path = dir.join(INDEX_FILE);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let index: VectorIndex =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
                path: path.clone(),
                line: 0,
                source,
            })?;

        let store = ChunkStore::new(manifest, chunks)?;
        if let Some(missing) = index.chunk_ids().find(|id| store.chunk(id).is_none()) {
            return Err(StoreError::Inconsistent(format!(
                "index entry `{missing}` has no chunk"
            )));
        }
        Ok((store, index))
    }
}
