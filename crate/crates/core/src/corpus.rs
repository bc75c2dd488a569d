//! Document ingestion: content hierarchy extraction (or inference for
//! unstructured text) and boundary-aligned, lossless segmentation.
//!
//! All offsets are byte offsets into the UTF-8 body and always fall on
//! character boundaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::index::{cosine, EmbeddingError, EmbeddingProvider};
use crate::text::{excerpt, first_sentence};

/// Maximum directory depth.
pub const MAX_DEPTH: u8 = 3;

/// First sentences shorter than this (in characters) are too ambiguous to
/// anchor on; the heading text is matched instead.
pub const MIN_SENTENCE_MATCH: usize = 10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
    #[error("custom heading pattern `{pattern}` is invalid: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("custom heading level {0} is outside 1..=3")]
    BadLevel(u8),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub offset: usize,
    pub length: usize,
}

impl Span {
    pub fn new(offset: usize, length: usize) -> Self {
        Self { offset, length }
    }

    pub fn end(&self) -> usize {
        self.offset + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub paragraphs: Vec<Span>,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let doc_id = doc_id.into();
        let body = body.into();
        if body.is_empty() {
            return Err(CorpusError::EmptyBody(doc_id));
        }
        let paragraphs = paragraph_spans(&body);
        Ok(Self {
            doc_id,
            title: title.into(),
            body,
            paragraphs,
        })
    }

    pub fn paragraph_text(&self, i: usize) -> &str {
        let s = self.paragraphs[i];
        &self.body[s.offset..s.end()]
    }
}

/// Splits at blank lines. Each paragraph starts at its first non-blank
/// line (the first one starts at 0) and runs to the next paragraph's start,
/// so the spans partition the body.
fn paragraph_spans(body: &str) -> Vec<Span> {
    let mut starts = vec![0usize];
    let mut offset = 0;
    let mut after_blank = false;
    let mut seen_text = false;
    for line in body.split_inclusive('\n') {
        let blank = line.trim().is_empty();
        if !blank {
            if after_blank && seen_text {
                starts.push(offset);
            }
            seen_text = true;
        }
        after_blank = blank;
        offset += line.len();
    }
    starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let e = starts.get(i + 1).copied().unwrap_or(body.len());
            Span::new(s, e - s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub entry_id: String,
    pub heading_text: String,
    pub level: u8,
    /// Byte offset where the entry's section starts in the body.
    pub anchor_offset: usize,
    /// Sentence matched during segmentation to place the chunk boundary.
    pub first_sentence: String,
    /// True when the title was written by the gateway.
    pub generated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryNode {
    pub entry: DirectoryEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DirectoryNode>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryTree {
    pub nodes: Vec<DirectoryNode>,
    pub max_depth: u8,
}

impl DirectoryTree {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Pre-order entries with the entry-id path from the root.
    pub fn entries(&self) -> Vec<(&DirectoryEntry, Vec<String>)> {
        fn walk<'a>(
            nodes: &'a [DirectoryNode],
            path: &mut Vec<String>,
            out: &mut Vec<(&'a DirectoryEntry, Vec<String>)>,
        ) {
            for n in nodes {
                path.push(n.entry.entry_id.clone());
                out.push((&n.entry, path.clone()));
                walk(&n.children, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, &mut Vec::new(), &mut out);
        out
    }

    pub fn find(&self, entry_id: &str) -> Option<&DirectoryEntry> {
        self.entries()
            .into_iter()
            .map(|(e, _)| e)
            .find(|e| e.entry_id == entry_id)
    }

    /// Checks depth, parent/child level, bounds and anchor ordering.
    pub fn is_well_formed(&self, body_len: usize) -> bool {
        fn levels_ok(nodes: &[DirectoryNode], level: u8) -> bool {
            nodes.iter().all(|n| {
                n.entry.level == level && level <= MAX_DEPTH && levels_ok(&n.children, level + 1)
            })
        }
        let entries = self.entries();
        levels_ok(&self.nodes, 1)
            && entries.iter().all(|(e, _)| e.anchor_offset <= body_len)
            && entries
                .windows(2)
                .all(|w| w[0].0.anchor_offset <= w[1].0.anchor_offset)
    }
}

/// A user-supplied heading pattern. The first capture group (or a group
/// named `title`) is the heading text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustomHeading {
    pub pattern: String,
    pub level: u8,
}

#[derive(Debug, Clone)]
pub struct HeadingDetector {
    pub markdown: bool,
    pub numbered: bool,
    custom: Vec<(regex::Regex, u8)>,
    md: regex::Regex,
    num: regex::Regex,
}

impl Default for HeadingDetector {
    fn default() -> Self {
        Self::new(&[]).expect("built-in patterns compile")
    }
}

impl HeadingDetector {
    pub fn new(custom: &[CustomHeading]) -> Result<Self, CorpusError> {
        let custom = custom
            .iter()
            .map(|c| {
                if !(1..=MAX_DEPTH).contains(&c.level) {
                    return Err(CorpusError::BadLevel(c.level));
                }
                regex::Regex::new(&c.pattern)
                    .map(|r| (r, c.level))
                    .map_err(|source| CorpusError::BadPattern {
                        pattern: c.pattern.clone(),
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            markdown: true,
            numbered: true,
            custom,
            md: regex::Regex::new(r"^(#{1,6})[ \t]+(.+?)[ \t]*#*[ \t]*$").unwrap(),
            num: regex::Regex::new(r"^(\d{1,3}(?:\.\d{1,3}){0,5})\.?[ \t]+(\p{Lu}[^\n]{0,118})$")
                .unwrap(),
        })
    }

    /// `(raw level, heading text)` when `line` is a heading.
    pub fn detect(&self, line: &str) -> Option<(usize, String)> {
        let line = line.trim_end_matches(['\n', '\r']);
        for (re, level) in &self.custom {
            if let Some(c) = re.captures(line) {
                let text = c
                    .name("title")
                    .or_else(|| c.get(1))
                    .or_else(|| c.get(0))
                    .map(|m| m.as_str().trim().to_string())
                    .unwrap_or_default();
                if !text.is_empty() {
                    return Some((*level as usize, text));
                }
            }
        }
        if self.markdown {
            if let Some(c) = self.md.captures(line) {
                return Some((c[1].len(), c[2].trim().to_string()));
            }
        }
        if self.numbered {
            if let Some(c) = self.num.captures(line.trim_start()) {
                let title = c[2].trim();
                // Numbered list items read as sentences; headings do not.
                if !title.ends_with(['.', ',', ';', ':', '?', '!']) {
                    let depth = c[1].split('.').count();
                    return Some((depth, line.trim().to_string()));
                }
            }
        }
        None
    }
}

/// Builds the directory from detected headings. Heading levels are
/// normalized so a child is always one level below its parent; headings
/// that would land below level 3 are folded into their level-3 ancestor.
/// Lines inside fenced code blocks are ignored.
pub fn extract_hierarchy(doc: &Document, detector: &HeadingDetector) -> DirectoryTree {
    // Stack of (raw level, path of child indices).
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut tree = DirectoryTree::default();
    let mut offset = 0;
    let mut in_fence = false;
    let mut counter = 0;

    for line in doc.body.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            continue;
        }
        let Some((raw, text)) = detector.detect(line) else {
            continue;
        };
        while stack.last().is_some_and(|(r, _)| *r >= raw) {
            stack.pop();
        }
        let depth = stack.len() + 1;
        if depth > MAX_DEPTH as usize {
            continue;
        }
        counter += 1;
        let lead = line.len() - trimmed.len();
        let entry = DirectoryEntry {
            entry_id: format!("{}/h{counter}", doc.doc_id),
            heading_text: text,
            level: depth as u8,
            anchor_offset: line_start + lead,
            first_sentence: line.trim().to_string(),
            generated: false,
        };
        let node = DirectoryNode {
            entry,
            children: Vec::new(),
        };
        let path = match stack.last() {
            None => {
                tree.nodes.push(node);
                vec![tree.nodes.len() - 1]
            }
            Some((_, parent)) => {
                let siblings = &mut node_at_mut(&mut tree.nodes, parent).children;
                siblings.push(node);
                let mut p = parent.clone();
                p.push(siblings.len() - 1);
                p
            }
        };
        tree.max_depth = tree.max_depth.max(depth as u8);
        stack.push((raw, path));
    }
    tree
}

fn node_at_mut<'a>(nodes: &'a mut [DirectoryNode], path: &[usize]) -> &'a mut DirectoryNode {
    let (first, rest) = path.split_first().expect("non-empty path");
    let node = &mut nodes[*first];
    if rest.is_empty() {
        node
    } else {
        node_at_mut(&mut node.children, rest)
    }
}

/// Cut thresholds (cosine distance) for the two inferred parent levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub level1_cut: f64,
    pub level2_cut: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            level1_cut: 0.6,
            level2_cut: 0.3,
        }
    }
}

/// Average-linkage agglomeration over contiguous groups. Repeatedly merges
/// the adjacent pair with the smallest mean pairwise distance (lower index
/// on ties) while that distance is within `cut`. Returns, for each output
/// group, the half-open range of input groups it spans.
pub fn merge_adjacent(
    groups: &[Vec<usize>],
    dist: &[Vec<f64>],
    cut: f64,
) -> Vec<std::ops::Range<usize>> {
    let mut ranges: Vec<std::ops::Range<usize>> = (0..groups.len()).map(|i| i..i + 1).collect();
    let members = |r: &std::ops::Range<usize>| -> Vec<usize> {
        groups[r.clone()].iter().flatten().copied().collect()
    };
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..ranges.len().saturating_sub(1) {
            let a = members(&ranges[i]);
            let b = members(&ranges[i + 1]);
            let total: f64 = a.iter().flat_map(|&p| b.iter().map(move |&q| dist[p][q])).sum();
            let d = total / (a.len() * b.len()) as f64;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) if d <= cut => {
                let next = ranges.remove(i + 1);
                ranges[i].end = next.end;
            }
            _ => break,
        }
    }
    ranges
}

/// Infers a directory for text without headings: paragraphs are embedded,
/// grouped by contiguous agglomerative clustering into two parent levels,
/// and titled by the gateway. A level is only emitted where it actually
/// subdivides its parent, so homogeneous text yields a single entry.
pub fn infer_hierarchy(
    doc: &Document,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    config: &ClusterConfig,
) -> Result<DirectoryTree, CorpusError> {
    let n = doc.paragraphs.len();
    let texts: Vec<&str> = (0..n).map(|i| doc.paragraph_text(i).trim()).collect();
    let vectors = embedder.embed(&texts)?;
    if vectors.len() != n {
        return Err(EmbeddingError::CountMismatch {
            expected: n,
            got: vectors.len(),
        }
        .into());
    }
    let dist: Vec<Vec<f64>> = vectors
        .iter()
        .map(|a| vectors.iter().map(|b| 1.0 - cosine(a, b)).collect())
        .collect();

    let singletons: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let level2: Vec<Vec<usize>> = merge_adjacent(&singletons, &dist, config.level2_cut)
        .into_iter()
        .map(|r| r.collect())
        .collect();
    let level1 = merge_adjacent(&level2, &dist, config.level1_cut);

    let mut counter = 0;
    let mut make = |paragraphs: &[usize], level: u8| -> Result<DirectoryNode, CorpusError> {
        counter += 1;
        let first = paragraphs[0];
        let span = doc.paragraphs[first];
        let para = &doc.body[span.offset..span.end()];
        let lead = para.len() - para.trim_start().len();
        let section: String = paragraphs
            .iter()
            .map(|&p| doc.paragraph_text(p))
            .collect();
        let title = gateway.generate_title(&excerpt(section.trim(), 2000))?;
        Ok(DirectoryNode {
            entry: DirectoryEntry {
                entry_id: format!("{}/c{counter}", doc.doc_id),
                heading_text: title,
                level,
                anchor_offset: span.offset + lead,
                first_sentence: first_sentence(para).to_string(),
                generated: true,
            },
            children: Vec::new(),
        })
    };

    let mut tree = DirectoryTree::default();
    for top in level1 {
        let paras: Vec<usize> = level2[top.clone()].iter().flatten().copied().collect();
        let mut node = make(&paras, 1)?;
        tree.max_depth = tree.max_depth.max(1);
        if top.len() > 1 {
            for mid in &level2[top] {
                let mut child = make(mid, 2)?;
                tree.max_depth = tree.max_depth.max(2);
                if mid.len() > 1 {
                    for &p in mid {
                        child.children.push(make(&[p], 3)?);
                    }
                    tree.max_depth = 3;
                }
                node.children.push(child);
            }
        }
        tree.nodes.push(node);
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    /// 1-based position within the document.
    pub ordinal: usize,
    pub hierarchy_path: Vec<String>,
    pub span: Span,
    pub text: String,
}

/// An entry whose anchor text was not found after the previous boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMismatch {
    pub entry_id: String,
    pub needle: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub chunks: Vec<Chunk>,
    pub mismatches: Vec<BoundaryMismatch>,
}

fn line_start(body: &str, pos: usize) -> usize {
    body[..pos].rfind('\n').map_or(0, |i| i + 1)
}

/// First occurrence of a heading text at or after `from`, preferring one
/// that ends its line, so short titles do not match inside prose.
fn find_heading(body: &str, from: usize, heading: &str) -> Option<usize> {
    let mut first = None;
    for (i, _) in body[from..].match_indices(heading) {
        let pos = from + i;
        first.get_or_insert(pos);
        let rest = &body[pos + heading.len()..];
        let line_rest = &rest[..rest.find('\n').unwrap_or(rest.len())];
        if line_rest.trim_end_matches(|c: char| c.is_whitespace() || c == '#').is_empty() {
            return Some(pos);
        }
    }
    first
}

/// Cuts the body at each entry's first sentence, located by forward string
/// search from the previous boundary. Entries that cannot be found are
/// skipped and reported. Text before the first boundary becomes a chunk
/// with an empty hierarchy path; where several entries land on the same
/// boundary the deepest one owns the chunk.
pub fn segment(doc: &Document, tree: &DirectoryTree) -> Segmentation {
    let body = doc.body.as_str();
    let mut boundaries: Vec<(usize, Vec<String>)> = Vec::new();
    let mut mismatches = Vec::new();
    // (boundary, end of matched text, path of the anchored entry)
    let mut prev: Option<(usize, usize, Vec<String>)> = None;

    for (entry, path) in tree.entries() {
        let sentence = entry.first_sentence.trim();
        let by_sentence = sentence.chars().count() >= MIN_SENTENCE_MATCH;
        let needle = if by_sentence {
            sentence
        } else {
            entry.heading_text.trim()
        };
        let from = match &prev {
            None => 0,
            // A descendant may open at its ancestor's boundary.
            Some((b, _, p)) if path.starts_with(p) => *b,
            Some((_, end, _)) => *end,
        };
        let found = if needle.is_empty() {
            None
        } else if by_sentence {
            body[from..].find(needle).map(|i| i + from)
        } else {
            find_heading(body, from, needle)
        };
        let Some(pos) = found else {
            mismatches.push(BoundaryMismatch {
                entry_id: entry.entry_id.clone(),
                needle: needle.to_string(),
            });
            continue;
        };
        let mut boundary = pos;
        if !by_sentence {
            let ls = line_start(body, pos);
            if prev.as_ref().is_none_or(|(b, _, _)| ls > *b) {
                boundary = ls;
            }
        }
        match boundaries.last_mut() {
            Some((b, p)) if *b == boundary => *p = path.clone(),
            _ => boundaries.push((boundary, path.clone())),
        }
        prev = Some((boundary, pos + needle.len(), path));
    }

    if boundaries.first().is_none_or(|(b, _)| *b > 0) {
        boundaries.insert(0, (0, Vec::new()));
    }
    let chunks = boundaries
        .iter()
        .enumerate()
        .map(|(i, (start, path))| {
            let end = boundaries.get(i + 1).map_or(body.len(), |(b, _)| *b);
            Chunk {
                chunk_id: format!("{}:{}", doc.doc_id, i + 1),
                doc_id: doc.doc_id.clone(),
                ordinal: i + 1,
                hierarchy_path: path.clone(),
                span: Span::new(*start, end - start),
                text: body[*start..end].to_string(),
            }
        })
        .collect();
    Segmentation { chunks, mismatches }
}

/// Extracts the directory, falling back to inference when no headings are
/// found, then segments.
pub fn process_document(
    doc: &Document,
    detector: &HeadingDetector,
    embedder: &dyn EmbeddingProvider,
    gateway: &Gateway,
    cluster: &ClusterConfig,
) -> Result<(DirectoryTree, Segmentation), CorpusError> {
    let mut tree = extract_hierarchy(doc, detector);
    if tree.is_empty() {
        tree = infer_hierarchy(doc, embedder, gateway, cluster)?;
    }
    let seg = segment(doc, &tree);
    Ok((tree, seg))
}
