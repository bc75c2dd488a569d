//! Command implementations behind the `rad` binary. Each command returns
//! its stdout text plus warnings; the binary prints them and maps errors to
//! exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rad_core::decision::{render_markdown, verify_report};
use rad_core::pipeline::{build_model, decide, ingest_dir};
use rad_core::{
    BackendKind, ChunkStore, Config, DecisionReport, DecisionRequest, HierarchicalModel,
    PipelineError,
};

pub const EXIT_PIPELINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input, unknown ids.
    Usage(anyhow::Error),
    /// A pipeline step failed.
    Pipeline(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Pipeline(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        use rad_core::decision::DecisionError as D;
        let usage = matches!(
            e,
            PipelineError::NoDocuments(_)
                | PipelineError::Io { .. }
                | PipelineError::Config(_)
                | PipelineError::Decision(
                    D::EmptyDescription | D::NoOptions | D::DuplicateOption(_) | D::InvalidModel(_)
                )
        );
        if usage {
            CliError::Usage(e.into())
        } else {
            CliError::Pipeline(e.into())
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
}

/// Flags shared by every command; they override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub top_k: Option<usize>,
    pub backend: Option<BackendKind>,
    pub embedding_backend: Option<BackendKind>,
    pub reproducible: bool,
}

pub fn load_config(o: &Overrides) -> CliResult<Config> {
    let mut c = match &o.config {
        Some(p) => Config::load(p).map_err(usage)?,
        None => Config::default(),
    };
    c.apply_process_env();
    if let Some(s) = o.seed {
        c.seed = Some(s);
    }
    if let Some(k) = o.top_k {
        c.top_k = k;
    }
    if let Some(b) = o.backend {
        c.gateway.backend = b;
    }
    if let Some(b) = o.embedding_backend {
        c.embedding.backend = b;
    }
    c.reproducible_output |= o.reproducible;
    c.validate().map_err(usage)?;
    Ok(c)
}

fn timestamp(c: &Config) -> Option<String> {
    (!c.reproducible_output).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading {what} {}", path.display()))
        .map_err(usage)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing {what} {}", path.display()))
        .map_err(usage)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(CliError::Pipeline)?;
    }
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Pipeline)
}

fn load_store(dir: &Path) -> CliResult<(ChunkStore, rad_core::VectorIndex)> {
    ChunkStore::load(dir)
        .with_context(|| format!("loading store {}", dir.display()))
        .map_err(usage)
}

pub fn cmd_ingest(config: &Config, corpus_dir: &Path, out_store: &Path) -> CliResult<Outcome> {
    if !corpus_dir.is_dir() {
        return Err(usage(anyhow!("{} is not a directory", corpus_dir.display())));
    }
    let embedder = config.embedder().map_err(usage)?;
    let gateway = config.gateway().map_err(usage)?;
    let ing = ingest_dir(corpus_dir, config, embedder.as_ref(), &gateway)?;
    ing.store
        .save(out_store, &ing.index)
        .context("saving store")
        .map_err(CliError::Pipeline)?;

    let mut s = String::new();
    let docs = &ing.store.manifest.documents;
    let _ = writeln!(s, "ingested {} documents, {} chunks into {}", docs.len(), ing.store.len(), out_store.display());
    for d in docs {
        let inferred = d.tree.entries().first().is_some_and(|(e, _)| e.generated);
        let how = if inferred { "inferred" } else { "headings" };
        let _ = writeln!(s, "  {:<40} p_n = {:<4} ({how})", d.doc_id, d.p_n);
    }
    Ok(Outcome {
        stdout: s,
        warnings: ing.warnings,
    })
}

pub fn cmd_build(config: &Config, store_dir: &Path, request_file: &Path, out_model: &Path) -> CliResult<Outcome> {
    let request: DecisionRequest = read_json(request_file, "request")?;
    request.validate(false).map_err(usage)?;
    let (store, index) = load_store(store_dir)?;
    let embedder = config.embedder().map_err(usage)?;
    let gateway = config.gateway().map_err(usage)?;
    let built = build_model(&store, &index, &request.d, config, embedder.as_ref(), &gateway, timestamp(config))?;
    let m = &built.model;
    write_file(out_model, &m.to_bytes())?;

    let mut s = String::new();
    let _ = writeln!(s, "model written to {}", out_model.display());
    let _ = writeln!(s, "k = {}, levels = {}, sum(W) = {:.12}", m.criteria.len(), m.partition.len(), m.weights.sum());
    for lvl in &m.transcript.levels {
        let names: Vec<_> = lvl.criteria.iter().map(|&i| m.criteria[i].name.as_str()).collect();
        let _ = writeln!(
            s,
            "  level {}: CR = {:.4}{}  [{}]",
            lvl.level_index,
            lvl.consistency.cr,
            if lvl.consistency.consistent { "" } else { " (inconsistent)" },
            names.join("; ")
        );
    }
    let mut order: Vec<usize> = (0..m.criteria.len()).collect();
    order.sort_by(|&a, &b| m.weights.0[b].total_cmp(&m.weights.0[a]));
    let _ = writeln!(s, "top weights:");
    for &i in order.iter().take(5) {
        let _ = writeln!(s, "  [{i}] {:<40} {:.4}", m.criteria[i].name, m.weights.0[i]);
    }
    Ok(Outcome {
        stdout: s,
        warnings: built.warnings,
    })
}

/// Markdown view written next to a report file.
pub fn markdown_path(report: &Path) -> PathBuf {
    report.with_extension("md")
}

pub fn cmd_decide(
    config: &Config,
    model_path: &Path,
    options_file: &Path,
    store_dir: Option<&Path>,
    out_report: &Path,
) -> CliResult<Outcome> {
    let model: HierarchicalModel = read_json(model_path, "model")?;
    model.validate().map_err(usage)?;
    let request: DecisionRequest = read_json(options_file, "options file")?;
    request.validate(true).map_err(usage)?;

    let mut warnings = Vec::new();
    let store = match store_dir {
        Some(dir) => Some(load_store(dir)?.0),
        None => None,
    };
    match &store {
        Some(s) if s.manifest_hash() != model.provenance.manifest_hash => {
            warnings.push("store manifest differs from the one the model was built from".into())
        }
        None => warnings.push("no store given; trace rows carry no source excerpts".into()),
        _ => {}
    }
    if request.d.trim() != model.d.trim() {
        warnings.push("options file describes a different decision than the model".into());
    }

    let gateway = config.gateway().map_err(usage)?;
    let report = decide(&request, &model, store.as_ref(), &gateway, timestamp(config))?;
    verify_report(&report)
        .map_err(|e| CliError::Pipeline(anyhow!("report failed verification: {e}")))?;
    if let Some(w) = &report.prose_warning {
        warnings.push(w.clone());
    }
    write_file(out_report, &report.to_bytes())?;
    write_file(&markdown_path(out_report), render_markdown(&report).as_bytes())?;

    let mut s = String::new();
    let _ = writeln!(s, "report written to {}", out_report.display());
    for r in &report.ranking {
        let tie = r.tie_group.map(|g| format!("  (tie group {g})")).unwrap_or_default();
        let _ = writeln!(s, "  {}. {:<24} V = {:.6}{tie}", r.position, r.option_id, r.total);
    }
    if report.consistency_skipped {
        let _ = writeln!(s, "consistency check skipped (single option)");
    } else {
        let flagged: Vec<_> = report.consistency.iter().filter(|c| c.flagged).map(|c| c.criterion_id.to_string()).collect();
        if flagged.is_empty() {
            let _ = writeln!(s, "consistency: all {} criteria pass", report.consistency.len());
        } else {
            let _ = writeln!(s, "consistency: flagged criteria {}", flagged.join(", "));
        }
    }
    Ok(Outcome { stdout: s, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceTarget {
    Criterion(usize),
    Option(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRow {
    pub criterion_id: usize,
    pub name: String,
    pub weight: f64,
    pub score: u8,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionTrace {
    pub option_id: String,
    pub rows: Vec<ContributionRow>,
    pub sum: f64,
    pub stored_total: f64,
}

pub fn trace_option(report: &DecisionReport, option_id: &str) -> CliResult<OptionTrace> {
    let i = report.option_index(option_id).ok_or_else(|| {
        let ids: Vec<_> = report.request.options.iter().map(|o| o.option_id.as_str()).collect();
        usage(anyhow!("unknown option `{option_id}`; valid ids: {}", ids.join(", ")))
    })?;
    let rows: Vec<ContributionRow> = report
        .trace
        .iter()
        .map(|r| ContributionRow {
            criterion_id: r.criterion_id,
            name: r.name.clone(),
            weight: r.weight,
            score: r.scores[i],
            contribution: r.contributions[i],
        })
        .collect();
    Ok(OptionTrace {
        option_id: option_id.to_string(),
        sum: rows.iter().map(|r| r.contribution).sum(),
        rows,
        stored_total: report.totals[i],
    })
}

/// Chain for one criterion. With a store, the source chunk must exist and
/// its full text is returned.
pub fn trace_criterion(
    report: &DecisionReport,
    criterion_id: usize,
    store: Option<&ChunkStore>,
) -> CliResult<(rad_core::TraceRow, Option<String>)> {
    let row = report.criterion_row(criterion_id).ok_or_else(|| {
        let ids: Vec<_> = report.trace.iter().map(|r| r.criterion_id.to_string()).collect();
        usage(anyhow!("unknown criterion {criterion_id}; valid ids: {}", ids.join(", ")))
    })?;
    let text = match store {
        Some(s) => Some(
            s.chunk(&row.source_chunk)
                .map(|c| c.text.clone())
                .ok_or_else(|| CliError::Pipeline(anyhow!("source chunk `{}` is not in the store", row.source_chunk)))?,
        ),
        None => None,
    };
    Ok((row.clone(), text))
}

pub fn cmd_trace(report_path: &Path, target: &TraceTarget, store_dir: Option<&Path>) -> CliResult<Outcome> {
    let report: DecisionReport = read_json(report_path, "report")?;
    let store = match store_dir {
        Some(dir) => Some(load_store(dir)?.0),
        None => None,
    };
    let mut s = String::new();
    match target {
        TraceTarget::Criterion(id) => {
            let (row, text) = trace_criterion(&report, *id, store.as_ref())?;
            let _ = writeln!(s, "chunk      {} ({})", row.source_chunk, row.doc_id);
            if !row.heading_path.is_empty() {
                let _ = writeln!(s, "section    {}", row.heading_path.join(" / "));
            }
            let excerpt = text
                .map(|t| rad_core::text::excerpt(t.trim(), 600))
                .unwrap_or_else(|| row.source_excerpt.clone());
            for line in excerpt.lines() {
                let _ = writeln!(s, "  > {line}");
            }
            let _ = writeln!(s, "criterion  [{}] {}", row.criterion_id, row.name);
            let _ = writeln!(s, "level      {}", row.level);
            let _ = writeln!(s, "weight     {:.6}", row.weight);
            let _ = writeln!(s, "scores and contributions:");
            for (i, o) in report.request.options.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  {:<24} a = {}  w*a = {:.6}",
                    o.option_id, row.scores[i], row.contributions[i]
                );
            }
        }
        TraceTarget::Option(id) => {
            let t = trace_option(&report, id)?;
            let _ = writeln!(s, "{:<4} {:<40} {:>10} {:>3} {:>12}", "id", "criterion", "weight", "a", "w*a");
            for r in &t.rows {
                let _ = writeln!(
                    s,
                    "{:<4} {:<40} {:>10.6} {:>3} {:>12.6}",
                    r.criterion_id, r.name, r.weight, r.score, r.contribution
                );
            }
            let _ = writeln!(s, "sum {:.9}  stored V = {:.9}", t.sum, t.stored_total);
        }
    }
    Ok(Outcome {
        stdout: s,
        warnings: Vec::new(),
    })
}
