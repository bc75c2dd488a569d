//! Deterministic offline backend.
//!
//! Replies are a pure function of `(seed, kind, canonical payload, context)`,
//! so identical tasks yield identical bytes in any process. The rules below
//! are chosen to produce schema-valid output that exercises every code path;
//! they make no claim about decision quality.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::json;

use super::{Backend, PromptTask, TaskPayload, TransportError};
use crate::text::{coverage, jaccard, leading_words, sentences, stable_hash, token_set, tokens};

/// Token-overlap threshold used by the relation rule.
pub const RELATION_OVERLAP_THRESHOLD: f64 = 0.1;

/// Fixed pool the mock draws expert domains from.
pub const DOMAIN_POOL: [(&str, &str); 12] = [
    ("Economics", "Weighs costs, budgets, financing and return on investment."),
    ("Environmental science", "Weighs emissions, ecological impact and resource use."),
    ("Public policy", "Weighs regulatory fit, mandates and public accountability."),
    ("Engineering", "Weighs technical feasibility, reliability and capacity."),
    ("Law", "Weighs legal obligations, liability and compliance risk."),
    ("Public health", "Weighs safety, health outcomes and exposure."),
    ("Urban planning", "Weighs land use, accessibility and spatial equity."),
    ("Operations management", "Weighs scheduling, logistics and execution risk."),
    ("Sociology", "Weighs community acceptance, equity and social impact."),
    ("Risk management", "Weighs uncertainty, resilience and failure modes."),
    ("Energy systems", "Weighs supply, demand, grid integration and efficiency."),
    ("Education", "Weighs skills, training needs and knowledge transfer."),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn hash(&self, task: &PromptTask, extra: &[&str]) -> u64 {
        let seed = self.seed.to_string();
        let payload = task.canonical_payload();
        let mut parts = vec![seed.as_str(), task.kind().name(), task.context.as_str(), &payload];
        parts.extend_from_slice(extra);
        stable_hash(&parts)
    }

    /// The reply this backend produces for `task`, as raw JSON text.
    pub fn reply(&self, task: &PromptTask) -> String {
        let value = match &task.payload {
            TaskPayload::GenerateTitle { text } => json!({ "title": mock_title(text) }),
            TaskPayload::ExtractCriterion {
                heading_path, text, ..
            } => {
                let best = best_sentence(text, &task.context);
                let name = match heading_path.last() {
                    Some(tail) if !tail.trim().is_empty() => tail.trim().to_string(),
                    _ => trim_terminal(&leading_words(best, 6)),
                };
                let name = if name.is_empty() { "General considerations".to_string() } else { name };
                json!({
                    "name": name,
                    "description": best,
                    "relevance": coverage(&task.context, text),
                    "facets": facets(text),
                })
            }
            TaskPayload::JudgeRelation { from, to } => {
                let a = format!("{} {}", from.name, from.description);
                let b = format!("{} {}", to.name, to.description);
                let overlapping = jaccard(&a, &b) >= RELATION_OVERLAP_THRESHOLD;
                let parity = self.hash(task, &[]) & 1 == 1;
                json!({ "influence": u8::from(parity == overlapping) })
            }
            TaskPayload::AssignDomains { count } => {
                let domains: Vec<_> = mock_domains(self.seed, &task.context, *count)
                    .into_iter()
                    .map(|(label, charter)| json!({ "label": label, "charter": charter }))
                    .collect();
                json!({ "domains": domains })
            }
            TaskPayload::RankCriteria { role, criteria, .. } => {
                let mut order: Vec<usize> = (0..criteria.len()).collect();
                let seed = self.seed.to_string();
                order.sort_by_key(|&i| {
                    let idx = i.to_string();
                    (
                        stable_hash(&[&seed, role, &task.context, &criteria[i].name, &idx]),
                        i,
                    )
                });
                let top = &criteria[order[0]].name;
                let rationale = format!(
                    "From the {role} perspective, {top} matters most for {}.",
                    leading_words(&task.context, 8)
                );
                let ranking: Vec<usize> = order.iter().map(|i| i + 1).collect();
                json!({ "ranking": ranking, "rationale": rationale })
            }
            TaskPayload::ValidateRationale {
                rationale, criteria, ..
            } => {
                let mut vocabulary = token_set(&task.context);
                for c in criteria {
                    vocabulary.extend(token_set(c));
                }
                let valid = tokens(rationale).iter().any(|t| vocabulary.contains(t));
                json!({ "valid": u8::from(valid) })
            }
            TaskPayload::ScoreAlternative {
                option_title,
                option_text,
                criterion,
            } => {
                let overlap = coverage(&criterion.name, &format!("{option_title} {option_text}"));
                let score = mock_score(self.hash(task, &[]), overlap);
                json!({
                    "score": score,
                    "rationale": format!(
                        "{option_title} addresses {} with {:.0}% term coverage.",
                        criterion.name,
                        overlap * 100.0
                    ),
                })
            }
            TaskPayload::WriteReport { criteria, options } => {
                let best = options.iter().min_by_key(|o| o.position);
                let opts: Vec<_> = options
                    .iter()
                    .map(|o| {
                        let per: Vec<_> = criteria
                            .iter()
                            .map(|c| {
                                let s = o.scores.get(c.criterion_id).copied().unwrap_or(0);
                                let strength = if s >= 6 {
                                    format!("Strong on {} ({s}/9).", c.name)
                                } else {
                                    String::new()
                                };
                                let weakness = if s <= 4 {
                                    format!("Weak on {} ({s}/9).", c.name)
                                } else {
                                    String::new()
                                };
                                json!({ "criterion_id": c.criterion_id, "strength": strength, "weakness": weakness })
                            })
                            .collect();
                        json!({
                            "option_id": o.option_id,
                            "criteria": per,
                            "overall": format!("{} places #{} with a weighted total of {:.3}.", o.title, o.position, o.total),
                        })
                    })
                    .collect();
                let recommendation = best
                    .map(|b| format!("Prefer {} ({}).", b.title, b.option_id))
                    .unwrap_or_default();
                json!({ "options": opts, "recommendation": recommendation })
            }
        };
        value.to_string()
    }
}

impl Backend for MockBackend {
    fn send(&self, task: &PromptTask, _prompt: &str) -> Result<String, TransportError> {
        Ok(self.reply(task))
    }
}

/// `1 + hash mod 5`, lifted by up to 4 points of term coverage, on 1..=9.
pub fn mock_score(hash: u64, overlap: f64) -> u8 {
    let base = 1 + (hash % 5) as i64;
    (base + (4.0 * overlap).round() as i64).clamp(1, 9) as u8
}

pub fn mock_title(text: &str) -> String {
    let first = crate::text::first_sentence(text);
    let title = trim_terminal(&leading_words(first.trim_start_matches('#'), 6));
    if title.is_empty() {
        "Untitled section".to_string()
    } else {
        title
    }
}

/// Domains ordered by `hash(seed, d, label)`; the first `count` are taken.
pub fn mock_domains(seed: u64, context: &str, count: usize) -> Vec<(String, String)> {
    let seed = seed.to_string();
    let mut pool: Vec<(u64, String, String)> = DOMAIN_POOL
        .iter()
        .map(|(l, c)| (stable_hash(&[&seed, context, l]), l.to_string(), c.to_string()))
        .collect();
    pool.sort();
    let mut out: Vec<(String, String)> = pool.into_iter().map(|(_, l, c)| (l, c)).collect();
    let extra = count.saturating_sub(out.len());
    out.extend((1..=extra).map(|i| {
        (
            format!("General analysis {i}"),
            "Weighs overall merit from a generalist view.".to_string(),
        )
    }));
    out.truncate(count);
    out
}

fn trim_terminal(s: &str) -> String {
    s.trim()
        .trim_end_matches(['.', '?', '!', ',', ';', ':'])
        .trim()
        .to_string()
}

/// Sentence sharing the most distinct tokens with `context`; first on ties.
fn best_sentence<'a>(text: &'a str, context: &str) -> &'a str {
    let wanted = token_set(context);
    let mut best = ("", 0usize);
    for s in sentences(text) {
        let hits = token_set(s).intersection(&wanted).count();
        if best.0.is_empty() || hits > best.1 {
            best = (s, hits);
        }
    }
    best.0
}

fn facets(text: &str) -> BTreeMap<String, String> {
    static YEAR: OnceLock<Regex> = OnceLock::new();
    static QUANTITY: OnceLock<Regex> = OnceLock::new();
    let year = YEAR.get_or_init(|| Regex::new(r"\b(19|20)\d{2}\b").unwrap());
    let quantity = QUANTITY.get_or_init(|| {
        Regex::new(r"\b\d+(?:[.,]\d+)?\s?(?:%|percent|kW|MW|GW|km|kg|tonnes|t|units)\b|\d+(?:\.\d+)?%").unwrap()
    });
    let mut out = BTreeMap::new();
    if let Some(m) = year.find(text) {
        out.insert("time".to_string(), m.as_str().to_string());
    }
    if let Some(m) = quantity.find(text) {
        out.insert("quantity".to_string(), m.as_str().to_string());
    }
    out
}
