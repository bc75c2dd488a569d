//! Scoring, aggregation, ranking and the decision report.
//!
//! All numbers that enter a total are computed here; the gateway only
//! supplies the 1-9 cell scores and prose.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{Criterion, RelationMatrix};
use crate::gateway::{
    CriterionProse, Gateway, GatewayError, OptionProse, ReportCriterion, ReportOption, ReportProse,
};
use crate::mcdm::{
    ahp_weights, consistency, nearest_saaty, ConsistencyReport, LevelPartition, PairwiseMatrix,
    ReachabilityMatrix, WeightVector,
};
use crate::panel::PanelTranscript;
use crate::store::ChunkStore;
use crate::text::{excerpt, sha256_hex};

pub const MODEL_SCHEMA: &str = "rad.model/1";
pub const REPORT_SCHEMA: &str = "rad.report/1";
pub const PROSE_PLACEHOLDER: &str = "(prose unavailable)";
pub const EXCERPT_CHARS: usize = 240;
const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("decision description is empty")]
    EmptyDescription,
    #[error("request has no options")]
    NoOptions,
    #[error("duplicate option id `{0}`")]
    DuplicateOption(String),
    #[error("score matrix is {rows}x{cols} but {expected_rows}x{expected_cols} was expected")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("scoring option `{option_id}` on criterion {criterion_id}: {source}")]
    Score {
        option_id: String,
        criterion_id: usize,
        #[source]
        source: GatewayError,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    #[serde(rename = "id", alias = "option_id")]
    pub option_id: String,
    pub title: String,
    pub text: String,
}

/// Request file: `{d, options: [{id, title, text}]}`. Options may be left
/// out when only building a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_ref: Option<String>,
    pub d: String,
    #[serde(default)]
    pub options: Vec<Alternative>,
}

impl DecisionRequest {
    pub fn validate(&self, need_options: bool) -> Result<(), DecisionError> {
        if self.d.trim().is_empty() {
            return Err(DecisionError::EmptyDescription);
        }
        if need_options && self.options.is_empty() {
            return Err(DecisionError::NoOptions);
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.options {
            if !seen.insert(o.option_id.as_str()) {
                return Err(DecisionError::DuplicateOption(o.option_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_hash: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub schema_version: String,
    pub d: String,
    pub criteria: Vec<Criterion>,
    pub relations: RelationMatrix,
    pub reachability: ReachabilityMatrix,
    pub partition: LevelPartition,
    pub weights: WeightVector,
    pub transcript: PanelTranscript,
    pub provenance: Provenance,
}

impl HierarchicalModel {
    pub fn validate(&self) -> Result<(), DecisionError> {
        let k = self.criteria.len();
        let bad = |m: String| Err(DecisionError::InvalidModel(m));
        if self.schema_version != MODEL_SCHEMA {
            return bad(format!("unsupported schema `{}`", self.schema_version));
        }
        if k == 0 {
            return bad("no criteria".into());
        }
        if self.weights.len() != k || self.relations.size() != k || self.reachability.size() != k {
            return bad(format!(
                "{k} criteria but {} weights and a {}x{0} relation matrix",
                self.weights.len(),
                self.relations.size()
            ));
        }
        if let Err(e) = self.relations.validate() {
            return bad(e);
        }
        if self.criteria.iter().enumerate().any(|(i, c)| c.criterion_id != i) {
            return bad("criterion ids are not 0..k in order".into());
        }
        if !self.partition.covers(k) {
            return bad("partition does not cover the criteria".into());
        }
        if !self.weights.is_normalized(VERIFY_TOL) {
            return bad(format!("weights sum to {}", self.weights.sum()));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }
}

/// `cells[i][j]`: option `i` on criterion `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub cells: Vec<Vec<u8>>,
    pub rationales: Vec<Vec<String>>,
}

impl ScoreMatrix {
    pub fn from_cells(cells: Vec<Vec<u8>>) -> Self {
        let rationales = cells.iter().map(|r| vec![String::new(); r.len()]).collect();
        Self { cells, rationales }
    }

    pub fn options(&self) -> usize {
        self.cells.len()
    }

    pub fn criteria(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn get(&self, option: usize, criterion: usize) -> u8 {
        self.cells[option][criterion]
    }

    pub fn column(&self, criterion: usize) -> Vec<u8> {
        self.cells.iter().map(|r| r[criterion]).collect()
    }
}

pub fn score_alternatives(
    options: &[Alternative],
    criteria: &[Criterion],
    d: &str,
    gateway: &Gateway,
) -> Result<ScoreMatrix, DecisionError> {
    if options.is_empty() {
        return Err(DecisionError::NoOptions);
    }
    let k = criteria.len();
    let cells: Vec<_> = (0..options.len() * k)
        .into_par_iter()
        .map(|n| {
            let (opt, c) = (&options[n / k], &criteria[n % k]);
            gateway
                .score_alternative(d, &opt.title, &opt.text, c.brief())
                .map_err(|source| DecisionError::Score {
                    option_id: opt.option_id.clone(),
                    criterion_id: c.criterion_id,
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let mut scores = ScoreMatrix {
        cells: vec![Vec::with_capacity(k); options.len()],
        rationales: vec![Vec::with_capacity(k); options.len()],
    };
    for (n, cell) in cells.into_iter().enumerate() {
        scores.cells[n / k].push(cell.score);
        scores.rationales[n / k].push(cell.rationale);
    }
    Ok(scores)
}

/// Option-vs-option ratio matrix for one criterion, snapped to the Saaty
/// scale. The lower triangle is the exact reciprocal of the upper.
pub fn criterion_comparison(column: &[u8]) -> PairwiseMatrix {
    let o = column.len();
    let mut cells = vec![vec![1.0; o]; o];
    for a in 0..o {
        for b in a + 1..o {
            let q = nearest_saaty(column[a] as f64 / column[b] as f64);
            cells[a][b] = q;
            cells[b][a] = 1.0 / q;
        }
    }
    PairwiseMatrix::from_cells(cells)
}

/// One report per criterion; empty for a single option.
pub fn check_consistency(scores: &ScoreMatrix) -> Vec<ConsistencyReport> {
    if scores.options() < 2 {
        return Vec::new();
    }
    (0..scores.criteria())
        .map(|j| {
            let p = criterion_comparison(&scores.column(j));
            // snapped ratio matrices are positive, so power iteration converges
            let lambda = ahp_weights(&p).map(|(_, l)| l).unwrap_or(p.size() as f64);
            consistency(&p, lambda)
        })
        .collect()
}

pub fn aggregate(scores: &ScoreMatrix, weights: &WeightVector) -> Result<Vec<f64>, DecisionError> {
    let k = weights.len();
    if scores.cells.iter().any(|r| r.len() != k) {
        return Err(DecisionError::DimensionMismatch {
            rows: scores.options(),
            cols: scores.criteria(),
            expected_rows: scores.options(),
            expected_cols: k,
        });
    }
    Ok(scores
        .cells
        .iter()
        .map(|row| row.iter().zip(&weights.0).map(|(&a, w)| w * a as f64).sum())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedOption {
    /// 1-based place in the ordering.
    pub position: usize,
    /// Index into the request's options.
    pub option_index: usize,
    pub option_id: String,
    pub total: f64,
    /// 1-based tie group shared by options with equal totals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_group: Option<usize>,
}

/// Descending by total; equal totals keep input order and share a tie group.
pub fn rank(totals: &[f64], option_ids: &[String]) -> Vec<RankedOption> {
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));

    let mut ranked: Vec<RankedOption> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| RankedOption {
            position: pos + 1,
            option_index: i,
            option_id: option_ids.get(i).cloned().unwrap_or_else(|| format!("option{}", i + 1)),
            total: totals[i],
            tie_group: None,
        })
        .collect();
    let mut group = 0;
    let mut start = 0;
    while start < ranked.len() {
        let mut end = start + 1;
        while end < ranked.len() && ranked[end].total == ranked[start].total {
            end += 1;
        }
        if end - start > 1 {
            group += 1;
            ranked[start..end].iter_mut().for_each(|r| r.tie_group = Some(group));
        }
        start = end;
    }
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionConsistency {
    pub criterion_id: usize,
    pub report: ConsistencyReport,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub criterion_id: usize,
    pub name: String,
    pub source_chunk: String,
    pub doc_id: String,
    pub heading_path: Vec<String>,
    pub source_excerpt: String,
    pub level: usize,
    pub weight: f64,
    /// Per option, in request order.
    pub scores: Vec<u8>,
    /// `weight * score` per option.
    pub contributions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub model_hash: String,
    pub manifest_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub schema_version: String,
    pub request: DecisionRequest,
    pub model: ModelRef,
    pub scores: ScoreMatrix,
    pub totals: Vec<f64>,
    pub ranking: Vec<RankedOption>,
    pub consistency_skipped: bool,
    pub consistency: Vec<CriterionConsistency>,
    pub prose: ReportProse,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prose_warning: Option<String>,
    pub trace: Vec<TraceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl DecisionReport {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn option_index(&self, option_id: &str) -> Option<usize> {
        self.request.options.iter().position(|o| o.option_id == option_id)
    }

    pub fn criterion_row(&self, criterion_id: usize) -> Option<&TraceRow> {
        self.trace.iter().find(|r| r.criterion_id == criterion_id)
    }

    /// Per-criterion `(row, score, contribution)` for one option.
    pub fn option_contributions(&self, option_id: &str) -> Option<Vec<(&TraceRow, u8, f64)>> {
        let i = self.option_index(option_id)?;
        Some(
            self.trace
                .iter()
                .map(|r| (r, r.scores[i], r.contributions[i]))
                .collect(),
        )
    }
}

fn placeholder_prose(criteria: &[Criterion], options: &[Alternative]) -> ReportProse {
    ReportProse {
        options: options
            .iter()
            .map(|o| OptionProse {
                option_id: o.option_id.clone(),
                criteria: criteria
                    .iter()
                    .map(|c| CriterionProse {
                        criterion_id: c.criterion_id,
                        strength: PROSE_PLACEHOLDER.into(),
                        weakness: PROSE_PLACEHOLDER.into(),
                    })
                    .collect(),
                overall: PROSE_PLACEHOLDER.into(),
            })
            .collect(),
        recommendation: PROSE_PLACEHOLDER.into(),
    }
}

fn trace_rows(model: &HierarchicalModel, store: Option<&ChunkStore>, scores: &ScoreMatrix) -> Vec<TraceRow> {
    model
        .criteria
        .iter()
        .map(|c| {
            let j = c.criterion_id;
            let w = model.weights.0[j];
            let column = scores.column(j);
            let chunk = store.and_then(|s| s.chunk(&c.source_chunk));
            TraceRow {
                criterion_id: j,
                name: c.name.clone(),
                source_chunk: c.source_chunk.clone(),
                doc_id: chunk.map(|ch| ch.doc_id.clone()).unwrap_or_default(),
                heading_path: match (store, chunk) {
                    (Some(s), Some(ch)) => s.heading_path(ch),
                    _ => Vec::new(),
                },
                source_excerpt: chunk.map(|ch| excerpt(ch.text.trim(), EXCERPT_CHARS)).unwrap_or_default(),
                level: model.partition.level_of(j).unwrap_or(0),
                weight: w,
                contributions: column.iter().map(|&a| w * a as f64).collect(),
                scores: column,
            }
        })
        .collect()
}

/// Assembles the report. A prose failure never aborts; the numeric report
/// is still returned with placeholder prose and `prose_warning` set.
pub fn generate_report(
    request: &DecisionRequest,
    model: &HierarchicalModel,
    store: Option<&ChunkStore>,
    scores: ScoreMatrix,
    gateway: &Gateway,
    generated_at: Option<String>,
) -> Result<DecisionReport, DecisionError> {
    request.validate(true)?;
    model.validate()?;
    let totals = aggregate(&scores, &model.weights)?;
    if scores.options() != request.options.len() {
        return Err(DecisionError::DimensionMismatch {
            rows: scores.options(),
            cols: scores.criteria(),
            expected_rows: request.options.len(),
            expected_cols: model.criteria.len(),
        });
    }
    let ids: Vec<String> = request.options.iter().map(|o| o.option_id.clone()).collect();
    let ranking = rank(&totals, &ids);
    let consistency: Vec<_> = check_consistency(&scores)
        .into_iter()
        .enumerate()
        .map(|(j, report)| CriterionConsistency {
            criterion_id: j,
            flagged: !report.consistent,
            report,
        })
        .collect();

    let report_criteria = model
        .criteria
        .iter()
        .map(|c| ReportCriterion {
            criterion_id: c.criterion_id,
            name: c.name.clone(),
            weight: model.weights.0[c.criterion_id],
            level: model.partition.level_of(c.criterion_id).unwrap_or(0),
        })
        .collect();
    let report_options = request
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| ReportOption {
            option_id: o.option_id.clone(),
            title: o.title.clone(),
            text: o.text.clone(),
            total: totals[i],
            position: ranking.iter().find(|r| r.option_index == i).map_or(0, |r| r.position),
            scores: scores.cells[i].clone(),
        })
        .collect();
    let (prose, prose_warning) = match gateway.write_report(&request.d, report_criteria, report_options) {
        Ok(p) => (p, None),
        Err(e) => (
            placeholder_prose(&model.criteria, &request.options),
            Some(format!("report prose unavailable: {e}")),
        ),
    };

    Ok(DecisionReport {
        schema_version: REPORT_SCHEMA.into(),
        request: request.clone(),
        model: ModelRef {
            model_hash: model.hash(),
            manifest_hash: model.provenance.manifest_hash.clone(),
        },
        trace: trace_rows(model, store, &scores),
        consistency_skipped: scores.options() < 2,
        scores,
        totals,
        ranking,
        consistency,
        prose,
        prose_warning,
        generated_at,
    })
}

/// Recomputes totals, ranking, consistency flags and contribution tables
/// from the report's own scores and weights.
pub fn verify_report(report: &DecisionReport) -> Result<(), String> {
    let weights = WeightVector(report.trace.iter().map(|r| r.weight).collect());
    if report.trace.iter().enumerate().any(|(j, r)| r.criterion_id != j) {
        return Err("trace rows are not in criterion order".into());
    }
    let totals = aggregate(&report.scores, &weights).map_err(|e| e.to_string())?;
    if totals.len() != report.totals.len() {
        return Err("totals length differs from the score matrix".into());
    }
    for (i, (a, b)) in totals.iter().zip(&report.totals).enumerate() {
        if (a - b).abs() > VERIFY_TOL {
            return Err(format!("option {i}: stored total {b}, recomputed {a}"));
        }
    }
    for (j, row) in report.trace.iter().enumerate() {
        if row.scores != report.scores.column(j) {
            return Err(format!("criterion {j}: trace scores differ from the matrix"));
        }
        for (i, c) in row.contributions.iter().enumerate() {
            if (c - row.weight * row.scores[i] as f64).abs() > VERIFY_TOL {
                return Err(format!("criterion {j}, option {i}: bad contribution"));
            }
        }
    }
    for (i, v) in report.totals.iter().enumerate() {
        let sum: f64 = report.trace.iter().map(|r| r.contributions[i]).sum();
        if (sum - v).abs() > VERIFY_TOL {
            return Err(format!("option {i}: contributions sum to {sum}, total is {v}"));
        }
    }
    let ids: Vec<String> = report.request.options.iter().map(|o| o.option_id.clone()).collect();
    let order: Vec<_> = rank(&report.totals, &ids).into_iter().map(|r| (r.option_index, r.tie_group)).collect();
    let stored: Vec<_> = report.ranking.iter().map(|r| (r.option_index, r.tie_group)).collect();
    if order != stored {
        return Err("ranking does not follow the totals".into());
    }
    let flags: Vec<bool> = check_consistency(&report.scores).iter().map(|c| !c.consistent).collect();
    let stored: Vec<bool> = report.consistency.iter().map(|c| c.flagged).collect();
    if flags != stored {
        return Err("consistency flags do not match the scores".into());
    }
    Ok(())
}

pub fn render_markdown(report: &DecisionReport) -> String {
    use std::fmt::Write;
    let opts = &report.request.options;
    let mut s = String::new();
    let _ = writeln!(s, "# Decision report\n\n{}\n", report.request.d.trim());
    if let Some(w) = &report.prose_warning {
        let _ = writeln!(s, "> Warning: {w}\n");
    }

    let _ = writeln!(s, "## Ranking\n\n| # | Option | Total | Tie |\n|---|---|---|---|");
    for r in &report.ranking {
        let title = &opts[r.option_index].title;
        let tie = r.tie_group.map(|g| format!("group {g}")).unwrap_or_default();
        let _ = writeln!(s, "| {} | {} ({}) | {:.4} | {tie} |", r.position, title, r.option_id, r.total);
    }
    let _ = writeln!(s, "\n{}\n", report.prose.recommendation);

    let _ = write!(s, "## Scores\n\n| Criterion | Level | Weight |");
    for o in opts {
        let _ = write!(s, " {} |", o.option_id);
    }
    let _ = write!(s, "\n|---|---|---|");
    for _ in opts {
        let _ = write!(s, "---|");
    }
    s.push('\n');
    for row in &report.trace {
        let _ = write!(s, "| {} | {} | {:.4} |", row.name, row.level, row.weight);
        for a in &row.scores {
            let _ = write!(s, " {a} |");
        }
        s.push('\n');
    }

    if report.consistency_skipped {
        let _ = writeln!(s, "\nConsistency check skipped (single option).");
    } else {
        let flagged: Vec<_> = report
            .consistency
            .iter()
            .filter(|c| c.flagged)
            .map(|c| format!("{} (CR {:.3})", report.trace[c.criterion_id].name, c.report.cr))
            .collect();
        if flagged.is_empty() {
            let _ = writeln!(s, "\nAll criteria pass the consistency check.");
        } else {
            let _ = writeln!(s, "\nInconsistent scoring: {}.", flagged.join(", "));
        }
    }

    let _ = writeln!(s, "\n## Options");
    for p in &report.prose.options {
        let title = opts
            .iter()
            .find(|o| o.option_id == p.option_id)
            .map_or(p.option_id.as_str(), |o| o.title.as_str());
        let _ = writeln!(s, "\n### {title}\n\n{}\n", p.overall);
        for c in &p.criteria {
            let name = report.criterion_row(c.criterion_id).map_or("?", |r| r.name.as_str());
            let _ = writeln!(s, "- **{name}**: + {} / - {}", c.strength, c.weakness);
        }
    }

    let _ = writeln!(s, "\n## Sources\n");
    for row in &report.trace {
        let _ = writeln!(
            s,
            "- {} <- `{}` {}",
            row.name,
            row.source_chunk,
            row.heading_path.join(" / ")
        );
    }
    s
}
