//! Language-model gateway.
//!
//! Every model interaction in the pipeline goes through [`Gateway::complete`].
//! The gateway renders a versioned prompt template, hands it to a
//! [`Backend`], and parses the raw reply against the schema of the task's
//! kind. A reply that does not validate is retried exactly once with a
//! corrective instruction appended; callers only ever see validated values.

mod mock;
mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use mock::{MockBackend, DOMAIN_POOL};
pub use remote::{RemoteBackend, RemoteConfig};

pub const TEMPLATE_VERSION: &str = "v1";

const MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    GenerateTitle,
    ExtractCriterion,
    JudgeRelation,
    AssignDomains,
    RankCriteria,
    ValidateRationale,
    ScoreAlternative,
    WriteReport,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::GenerateTitle => "generate_title",
            TaskKind::ExtractCriterion => "extract_criterion",
            TaskKind::JudgeRelation => "judge_relation",
            TaskKind::AssignDomains => "assign_domains",
            TaskKind::RankCriteria => "rank_criteria",
            TaskKind::ValidateRationale => "validate_rationale",
            TaskKind::ScoreAlternative => "score_alternative",
            TaskKind::WriteReport => "write_report",
        }
    }

    fn template(self) -> &'static str {
        match self {
            TaskKind::GenerateTitle => include_str!("../../prompts/generate_title.txt"),
            TaskKind::ExtractCriterion => include_str!("../../prompts/extract_criterion.txt"),
            TaskKind::JudgeRelation => include_str!("../../prompts/judge_relation.txt"),
            TaskKind::AssignDomains => include_str!("../../prompts/assign_domains.txt"),
            TaskKind::RankCriteria => include_str!("../../prompts/rank_criteria.txt"),
            TaskKind::ValidateRationale => include_str!("../../prompts/validate_rationale.txt"),
            TaskKind::ScoreAlternative => include_str!("../../prompts/score_alternative.txt"),
            TaskKind::WriteReport => include_str!("../../prompts/write_report.txt"),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Name and description of a criterion as shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionBrief {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCriterion {
    pub criterion_id: usize,
    pub name: String,
    pub weight: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOption {
    pub option_id: String,
    pub title: String,
    pub text: String,
    pub total: f64,
    pub position: usize,
    pub scores: Vec<u8>,
}

/// Kind-specific task fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskPayload {
    GenerateTitle {
        text: String,
    },
    ExtractCriterion {
        chunk_id: String,
        heading_path: Vec<String>,
        text: String,
    },
    JudgeRelation {
        from: CriterionBrief,
        to: CriterionBrief,
    },
    AssignDomains {
        count: usize,
    },
    RankCriteria {
        role: String,
        charter: String,
        /// Listed to the model as 1..=m.
        criteria: Vec<CriterionBrief>,
    },
    ValidateRationale {
        role: String,
        rationale: String,
        criteria: Vec<String>,
    },
    ScoreAlternative {
        option_title: String,
        option_text: String,
        criterion: CriterionBrief,
    },
    WriteReport {
        criteria: Vec<ReportCriterion>,
        options: Vec<ReportOption>,
    },
}

impl TaskPayload {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskPayload::GenerateTitle { .. } => TaskKind::GenerateTitle,
            TaskPayload::ExtractCriterion { .. } => TaskKind::ExtractCriterion,
            TaskPayload::JudgeRelation { .. } => TaskKind::JudgeRelation,
            TaskPayload::AssignDomains { .. } => TaskKind::AssignDomains,
            TaskPayload::RankCriteria { .. } => TaskKind::RankCriteria,
            TaskPayload::ValidateRationale { .. } => TaskKind::ValidateRationale,
            TaskPayload::ScoreAlternative { .. } => TaskKind::ScoreAlternative,
            TaskPayload::WriteReport { .. } => TaskKind::WriteReport,
        }
    }
}

/// One unit of model work: the payload plus the decision description `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTask {
    pub context: String,
    pub payload: TaskPayload,
}

impl PromptTask {
    pub fn new(context: impl Into<String>, payload: TaskPayload) -> Self {
        Self {
            context: context.into(),
            payload,
        }
    }

    pub fn kind(&self) -> TaskKind {
        self.payload.kind()
    }

    /// Canonical JSON of the payload; the mock hashes this.
    pub fn canonical_payload(&self) -> String {
        serde_json::to_string(&self.payload).expect("payload serializes")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kind() != TaskKind::GenerateTitle && self.context.trim().is_empty() {
            return Err("decision description is empty".into());
        }
        match &self.payload {
            TaskPayload::AssignDomains { count } if *count == 0 => {
                Err("domain count must be positive".into())
            }
            TaskPayload::RankCriteria { criteria, .. } if criteria.is_empty() => {
                Err("nothing to rank".into())
            }
            TaskPayload::WriteReport { options, .. } if options.is_empty() => {
                Err("report without options".into())
            }
            _ => Ok(()),
        }
    }

    pub fn render_prompt(&self) -> String {
        let payload = serde_json::to_string_pretty(&self.payload).expect("payload serializes");
        self.kind()
            .template()
            .replace("{{context}}", &self.context)
            .replace("{{payload}}", &payload)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedCriterion {
    pub name: String,
    pub description: String,
    pub relevance: Option<f64>,
    #[serde(default)]
    pub facets: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAssignment {
    pub label: String,
    pub charter: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertOrder {
    /// 0-based indices into the ranked list, most important first.
    pub order: Vec<usize>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellScore {
    pub score: u8,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionProse {
    pub criterion_id: usize,
    pub strength: String,
    pub weakness: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionProse {
    pub option_id: String,
    pub criteria: Vec<CriterionProse>,
    pub overall: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportProse {
    pub options: Vec<OptionProse>,
    pub recommendation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StructuredValue {
    Title(String),
    Criterion(ExtractedCriterion),
    Relation(bool),
    Domains(Vec<DomainAssignment>),
    Ranking(ExpertOrder),
    Validity(bool),
    Score(CellScore),
    Report(ReportProse),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredResponse {
    pub value: StructuredValue,
    pub raw_text: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("{kind}: no valid response after {attempts} attempts ({reason}); last reply: {last_raw:?}")]
    Invalid {
        kind: TaskKind,
        attempts: u32,
        reason: String,
        last_raw: String,
    },
    #[error("{kind}: {source}")]
    Transport {
        kind: TaskKind,
        #[source]
        source: TransportError,
    },
    #[error("{kind}: malformed task: {reason}")]
    BadTask { kind: TaskKind, reason: String },
}

impl GatewayError {
    pub fn kind(&self) -> TaskKind {
        match self {
            GatewayError::Invalid { kind, .. }
            | GatewayError::Transport { kind, .. }
            | GatewayError::BadTask { kind, .. } => *kind,
        }
    }
}

/// Anything that can turn a rendered prompt into raw model text.
pub trait Backend: Send + Sync {
    fn send(&self, task: &PromptTask, prompt: &str) -> Result<String, TransportError>;
}

impl<F> Backend for F
where
    F: Fn(&PromptTask, &str) -> Result<String, TransportError> + Send + Sync,
{
    fn send(&self, task: &PromptTask, prompt: &str) -> Result<String, TransportError> {
        self(task, prompt)
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self {
            backend: Box::new(backend),
        }
    }

    pub fn mock(seed: u64) -> Self {
        Self::new(MockBackend::new(seed))
    }

    pub fn complete(&self, task: &PromptTask) -> Result<StructuredResponse, GatewayError> {
        let kind = task.kind();
        task.validate()
            .map_err(|reason| GatewayError::BadTask { kind, reason })?;

        let mut prompt = task.render_prompt();
        let mut last_reason = String::new();
        let mut last_raw = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            let raw = match self.backend.send(task, &prompt) {
                Ok(raw) => raw,
                Err(source) if attempt == MAX_ATTEMPTS => {
                    return Err(GatewayError::Transport { kind, source })
                }
                Err(_) => continue,
            };
            match parse_response(task, &raw) {
                Ok(value) => {
                    return Ok(StructuredResponse {
                        value,
                        raw_text: raw,
                        attempt,
                    })
                }
                Err(reason) => {
                    prompt = format!(
                        "{}\n\nYour previous reply was rejected: {reason}. \
                         Reply again with JSON that matches the requested format exactly.",
                        task.render_prompt()
                    );
                    last_reason = reason;
                    last_raw = raw;
                }
            }
        }
        Err(GatewayError::Invalid {
            kind,
            attempts: MAX_ATTEMPTS,
            reason: last_reason,
            last_raw,
        })
    }

    pub fn generate_title(&self, text: &str) -> Result<String, GatewayError> {
        let task = PromptTask::new("", TaskPayload::GenerateTitle { text: text.into() });
        match self.complete(&task)?.value {
            StructuredValue::Title(t) => Ok(t),
            other => unreachable!("title task produced {other:?}"),
        }
    }

    pub fn extract_criterion(
        &self,
        context: &str,
        chunk_id: &str,
        heading_path: Vec<String>,
        text: &str,
    ) -> Result<ExtractedCriterion, GatewayError> {
        let task = PromptTask::new(
            context,
            TaskPayload::ExtractCriterion {
                chunk_id: chunk_id.into(),
                heading_path,
                text: text.into(),
            },
        );
        match self.complete(&task)?.value {
            StructuredValue::Criterion(c) => Ok(c),
            other => unreachable!("criterion task produced {other:?}"),
        }
    }

    pub fn judge_relation(
        &self,
        context: &str,
        from: CriterionBrief,
        to: CriterionBrief,
    ) -> Result<bool, GatewayError> {
        let task = PromptTask::new(context, TaskPayload::JudgeRelation { from, to });
        match self.complete(&task)?.value {
            StructuredValue::Relation(r) => Ok(r),
            other => unreachable!("relation task produced {other:?}"),
        }
    }

    pub fn assign_domains(
        &self,
        context: &str,
        count: usize,
    ) -> Result<Vec<DomainAssignment>, GatewayError> {
        let task = PromptTask::new(context, TaskPayload::AssignDomains { count });
        match self.complete(&task)?.value {
            StructuredValue::Domains(d) => Ok(d),
            other => unreachable!("domain task produced {other:?}"),
        }
    }

    pub fn rank_criteria(
        &self,
        context: &str,
        role: &DomainAssignment,
        criteria: Vec<CriterionBrief>,
    ) -> Result<ExpertOrder, GatewayError> {
        let task = PromptTask::new(
            context,
            TaskPayload::RankCriteria {
                role: role.label.clone(),
                charter: role.charter.clone(),
                criteria,
            },
        );
        match self.complete(&task)?.value {
            StructuredValue::Ranking(r) => Ok(r),
            other => unreachable!("ranking task produced {other:?}"),
        }
    }

    pub fn validate_rationale(
        &self,
        context: &str,
        role: &str,
        rationale: &str,
        criteria: Vec<String>,
    ) -> Result<bool, GatewayError> {
        let task = PromptTask::new(
            context,
            TaskPayload::ValidateRationale {
                role: role.into(),
                rationale: rationale.into(),
                criteria,
            },
        );
        match self.complete(&task)?.value {
            StructuredValue::Validity(v) => Ok(v),
            other => unreachable!("validity task produced {other:?}"),
        }
    }

    pub fn score_alternative(
        &self,
        context: &str,
        option_title: &str,
        option_text: &str,
        criterion: CriterionBrief,
    ) -> Result<CellScore, GatewayError> {
        let task = PromptTask::new(
            context,
            TaskPayload::ScoreAlternative {
                option_title: option_title.into(),
                option_text: option_text.into(),
                criterion,
            },
        );
        match self.complete(&task)?.value {
            StructuredValue::Score(s) => Ok(s),
            other => unreachable!("score task produced {other:?}"),
        }
    }

    pub fn write_report(
        &self,
        context: &str,
        criteria: Vec<ReportCriterion>,
        options: Vec<ReportOption>,
    ) -> Result<ReportProse, GatewayError> {
        let task = PromptTask::new(context, TaskPayload::WriteReport { criteria, options });
        match self.complete(&task)?.value {
            StructuredValue::Report(r) => Ok(r),
            other => unreachable!("report task produced {other:?}"),
        }
    }
}

/// Strips a Markdown code fence some models wrap around JSON.
fn unfence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn field<'a>(obj: &'a Value, name: &str) -> Result<&'a Value, String> {
    obj.get(name).ok_or_else(|| format!("missing field `{name}`"))
}

fn string_field(obj: &Value, name: &str) -> Result<String, String> {
    field(obj, name)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| format!("field `{name}` is not a string"))
}

fn nonempty_string_field(obj: &Value, name: &str) -> Result<String, String> {
    let s = string_field(obj, name)?;
    if s.trim().is_empty() {
        return Err(format!("field `{name}` is empty"));
    }
    Ok(s)
}

fn binary_field(obj: &Value, name: &str) -> Result<bool, String> {
    match field(obj, name)? {
        Value::Bool(b) => Ok(*b),
        v => match v.as_i64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(format!("field `{name}` must be 0 or 1, got {v}")),
        },
    }
}

/// Validates a raw reply against the schema of the task's kind.
pub fn parse_response(task: &PromptTask, raw: &str) -> Result<StructuredValue, String> {
    let json: Value =
        serde_json::from_str(unfence(raw)).map_err(|e| format!("reply is not JSON: {e}"))?;

    match &task.payload {
        TaskPayload::GenerateTitle { .. } => {
            Ok(StructuredValue::Title(nonempty_string_field(&json, "title")?.trim().to_string()))
        }
        TaskPayload::ExtractCriterion { .. } => {
            let name = nonempty_string_field(&json, "name")?.trim().to_string();
            let description = string_field(&json, "description").unwrap_or_default();
            let relevance = match json.get("relevance") {
                None | Some(Value::Null) => None,
                Some(v) => {
                    let r = v.as_f64().ok_or("`relevance` is not a number")?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(format!("`relevance` {r} outside [0, 1]"));
                    }
                    Some(r)
                }
            };
            let mut facets = BTreeMap::new();
            if let Some(Value::Object(map)) = json.get("facets") {
                for (k, v) in map {
                    match v {
                        Value::String(s) if !s.trim().is_empty() => {
                            facets.insert(k.clone(), s.clone());
                        }
                        Value::Null | Value::String(_) => {}
                        other => {
                            facets.insert(k.clone(), other.to_string());
                        }
                    }
                }
            }
            Ok(StructuredValue::Criterion(ExtractedCriterion {
                name,
                description,
                relevance,
                facets,
            }))
        }
        TaskPayload::JudgeRelation { .. } => {
            Ok(StructuredValue::Relation(binary_field(&json, "influence")?))
        }
        TaskPayload::AssignDomains { count } => {
            let list = field(&json, "domains")?
                .as_array()
                .ok_or("`domains` is not a list")?;
            if list.len() != *count {
                return Err(format!("expected {count} domains, got {}", list.len()));
            }
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(list.len());
            for d in list {
                let label = nonempty_string_field(d, "label")?.trim().to_string();
                if !seen.insert(label.to_lowercase()) {
                    return Err(format!("duplicate domain `{label}`"));
                }
                let charter = string_field(d, "charter").unwrap_or_default();
                out.push(DomainAssignment { label, charter });
            }
            Ok(StructuredValue::Domains(out))
        }
        TaskPayload::RankCriteria { criteria, .. } => {
            let m = criteria.len();
            let list = field(&json, "ranking")?
                .as_array()
                .ok_or("`ranking` is not a list")?;
            let order = list
                .iter()
                .map(|v| {
                    v.as_u64()
                        .filter(|&n| n >= 1 && n as usize <= m)
                        .map(|n| n as usize - 1)
                        .ok_or_else(|| format!("ranking entry {v} is not in 1..={m}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if !crate::mcdm::is_permutation(&order, m) {
                return Err(format!("ranking is not a permutation of 1..={m}"));
            }
            let rationale = match json.get("rationale") {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err("`rationale` is not a string".into()),
            };
            Ok(StructuredValue::Ranking(ExpertOrder { order, rationale }))
        }
        TaskPayload::ValidateRationale { .. } => {
            Ok(StructuredValue::Validity(binary_field(&json, "valid")?))
        }
        TaskPayload::ScoreAlternative { .. } => {
            let (score, rationale) = match &json {
                Value::Number(_) => (&json, String::new()),
                _ => (
                    field(&json, "score")?,
                    string_field(&json, "rationale").unwrap_or_default(),
                ),
            };
            let score = score
                .as_i64()
                .filter(|s| (1..=9).contains(s))
                .ok_or_else(|| format!("score {score} is not an integer in 1..=9"))?;
            Ok(StructuredValue::Score(CellScore {
                score: score as u8,
                rationale,
            }))
        }
        TaskPayload::WriteReport { criteria, options } => {
            let prose: ReportProse = serde_json::from_value(json)
                .map_err(|e| format!("report does not match schema: {e}"))?;
            for opt in options {
                let found = prose
                    .options
                    .iter()
                    .find(|p| p.option_id == opt.option_id)
                    .ok_or_else(|| format!("report misses option `{}`", opt.option_id))?;
                for c in criteria {
                    if !found.criteria.iter().any(|p| p.criterion_id == c.criterion_id) {
                        return Err(format!(
                            "report misses criterion {} for option `{}`",
                            c.criterion_id, opt.option_id
                        ));
                    }
                }
            }
            Ok(StructuredValue::Report(prose))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    use super::*;

    fn brief(name: &str) -> CriterionBrief {
        CriterionBrief {
            name: name.into(),
            description: format!("{name} matters"),
        }
    }

    fn score_task() -> PromptTask {
        PromptTask::new(
            "pick a site",
            TaskPayload::ScoreAlternative {
                option_title: "North".into(),
                option_text: "near the grid".into(),
                criterion: brief("grid access"),
            },
        )
    }

    #[test]
    fn mock_relation_is_deterministic() {
        let gw = Gateway::mock(11);
        let task = PromptTask::new(
            "pick a site",
            TaskPayload::JudgeRelation {
                from: brief("grid access"),
                to: brief("cost"),
            },
        );
        let a = gw.complete(&task).unwrap();
        let b = gw.complete(&task).unwrap();
        assert_eq!(a, b);
        assert!(matches!(a.value, StructuredValue::Relation(_)));
        assert_eq!(a.attempt, 1);
    }

    #[test]
    fn out_of_scale_score_is_retried_then_fails() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let gw = Gateway::new(move |_: &PromptTask, _: &str| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok("10".to_string())
        });
        let err = gw.complete(&score_task()).unwrap_err();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        match err {
            GatewayError::Invalid {
                kind,
                attempts,
                last_raw,
                ..
            } => {
                assert_eq!(kind, TaskKind::ScoreAlternative);
                assert_eq!(attempts, 2);
                assert_eq!(last_raw, "10");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn retry_carries_corrective_instruction_and_can_succeed() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let gw = Gateway::new(move |_: &PromptTask, prompt: &str| {
            if c.fetch_add(1, Ordering::SeqCst) == 0 {
                Ok("10".to_string())
            } else {
                assert!(prompt.contains("previous reply was rejected"));
                Ok(r#"{"score": 7, "rationale": "fine"}"#.to_string())
            }
        });
        let resp = gw.complete(&score_task()).unwrap();
        assert_eq!(resp.attempt, 2);
        assert_eq!(
            resp.value,
            StructuredValue::Score(CellScore {
                score: 7,
                rationale: "fine".into()
            })
        );
    }

    #[test]
    fn transport_failure_is_retried_once() {
        let calls = Arc::new(AtomicU32::new(0));
        let c = calls.clone();
        let gw = Gateway::new(move |_: &PromptTask, _: &str| {
            c.fetch_add(1, Ordering::SeqCst);
            Err(TransportError("connection refused".into()))
        });
        let err = gw.complete(&score_task()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn mock_ranking_is_a_permutation() {
        let gw = Gateway::mock(3);
        let role = DomainAssignment {
            label: "Finance".into(),
            charter: "cost".into(),
        };
        let crits: Vec<_> = ["a", "b", "c", "d"].iter().map(|n| brief(n)).collect();
        let r = gw.rank_criteria("d", &role, crits).unwrap();
        let mut sorted = r.order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ranking_schema_rejects_repeats_and_out_of_range() {
        let task = PromptTask::new(
            "d",
            TaskPayload::RankCriteria {
                role: "r".into(),
                charter: "c".into(),
                criteria: vec![brief("a"), brief("b")],
            },
        );
        assert!(parse_response(&task, r#"{"ranking":[1,1],"rationale":"x"}"#).is_err());
        assert!(parse_response(&task, r#"{"ranking":[0,1],"rationale":"x"}"#).is_err());
        assert!(parse_response(&task, r#"{"ranking":[2],"rationale":"x"}"#).is_err());
        let ok = parse_response(&task, r#"{"ranking":[2,1],"rationale":"x"}"#).unwrap();
        assert_eq!(
            ok,
            StructuredValue::Ranking(ExpertOrder {
                order: vec![1, 0],
                rationale: "x".into()
            })
        );
    }

    #[test]
    fn fenced_json_is_accepted() {
        let task = PromptTask::new("", TaskPayload::GenerateTitle { text: "x".into() });
        let v = parse_response(&task, "```json\n{\"title\": \"Grid\"}\n```").unwrap();
        assert_eq!(v, StructuredValue::Title("Grid".into()));
    }

    #[test]
    fn relevance_outside_unit_interval_is_rejected() {
        let task = PromptTask::new(
            "d",
            TaskPayload::ExtractCriterion {
                chunk_id: "c".into(),
                heading_path: vec![],
                text: "t".into(),
            },
        );
        assert!(parse_response(&task, r#"{"name":"n","description":"x","relevance":1.5}"#).is_err());
        let v = parse_response(&task, r#"{"name":"n","description":"x"}"#).unwrap();
        assert!(matches!(v, StructuredValue::Criterion(ExtractedCriterion { relevance: None, .. })));
    }

    #[test]
    fn empty_context_is_a_bad_task() {
        let task = PromptTask::new(
            " ",
            TaskPayload::JudgeRelation {
                from: brief("a"),
                to: brief("b"),
            },
        );
        assert!(matches!(
            Gateway::mock(0).complete(&task),
            Err(GatewayError::BadTask { .. })
        ));
    }

    #[test]
    fn prompts_embed_context_and_payload() {
        let p = score_task().render_prompt();
        assert!(p.contains("pick a site"));
        assert!(p.contains("grid access"));
        assert!(p.starts_with("# template: score_alternative v1"));
    }
}
