//! Manager/expert weighting panel.
//!
//! The manager picks one domain per expert. For every ISM level each expert
//! ranks that level's criteria and explains why; the manager screens the
//! rationales, averages the accepted rankings, converts the average ranks to
//! a Saaty comparison matrix and takes its AHP eigenvector as the
//! within-level weights. Each level carries an equal share `1/L` of the
//! global weight mass.
//!
//! The full chain is kept in a [`PanelTranscript`] so the weights can be
//! replayed from the stored rankings alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::Criterion;
use crate::gateway::{DomainAssignment, Gateway, GatewayError};
use crate::mcdm::{
    aggregate_rankings, ahp_weights, consistency, ranks_to_comparison_matrix, ConsistencyReport,
    LevelPartition, McdmError, PairwiseMatrix, WeightVector,
};

pub const EXPERT_COUNT: usize = 5;
pub const MIN_RATIONALE_CHARS: usize = 20;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("decision description is empty")]
    EmptyDescription,
    #[error("panel needs at least one expert")]
    NoExperts,
    #[error("level partition does not cover the {0} criteria")]
    BadPartition(usize),
    #[error("domain assignment failed: {0}")]
    Domains(#[source] GatewayError),
    #[error("expert {role_id} failed on level {level}: {source}")]
    Expert {
        role_id: usize,
        level: usize,
        #[source]
        source: GatewayError,
    },
    #[error("level {level}: {source}")]
    Math {
        level: usize,
        #[source]
        source: McdmError,
    },
    #[error("transcript is inconsistent: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRole {
    /// 1-based.
    pub role_id: usize,
    pub domain_label: String,
    pub charter: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRanking {
    pub role_id: usize,
    pub level_index: usize,
    /// Criterion ids, most important first.
    pub ranking: Vec<usize>,
    pub rationale: String,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    /// 1-based ISM level.
    pub level_index: usize,
    pub criteria: Vec<usize>,
    pub rankings: Vec<ExpertRanking>,
    /// Every ranking was rejected, so all were used.
    pub fallback_all_accepted: bool,
    /// Aligned with `criteria`.
    pub average_ranks: Vec<f64>,
    pub comparison: PairwiseMatrix,
    pub local_weights: Vec<f64>,
    pub consistency: ConsistencyReport,
    pub level_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelTranscript {
    pub roles: Vec<ExpertRole>,
    pub levels: Vec<LevelRecord>,
    pub weights: WeightVector,
}

pub fn assign_domains(
    d: &str,
    gateway: &Gateway,
    count: usize,
) -> Result<Vec<ExpertRole>, PanelError> {
    if d.trim().is_empty() {
        return Err(PanelError::EmptyDescription);
    }
    if count == 0 {
        return Err(PanelError::NoExperts);
    }
    let domains = gateway.assign_domains(d, count).map_err(PanelError::Domains)?;
    Ok(domains
        .into_iter()
        .enumerate()
        .map(|(i, DomainAssignment { label, charter })| ExpertRole {
            role_id: i + 1,
            domain_label: label,
            charter,
        })
        .collect())
}

/// Mechanical rationale checks; `None` when the rationale passes.
fn screen_rationale(rationale: &str) -> Option<String> {
    let len = rationale.trim().chars().count();
    if len == 0 {
        Some("empty rationale".into())
    } else if len < MIN_RATIONALE_CHARS {
        Some(format!("rationale shorter than {MIN_RATIONALE_CHARS} characters"))
    } else {
        None
    }
}

/// One ranking per role over `level_criteria`, screened by the manager.
/// When every ranking is rejected they are all accepted instead and the
/// returned flag is set.
pub fn collect_rankings(
    level_index: usize,
    level_criteria: &[&Criterion],
    roles: &[ExpertRole],
    d: &str,
    gateway: &Gateway,
) -> Result<(Vec<ExpertRanking>, bool), PanelError> {
    let briefs: Vec<_> = level_criteria.iter().map(|c| c.brief()).collect();
    let names: Vec<String> = level_criteria.iter().map(|c| c.name.clone()).collect();

    let results: Vec<Result<ExpertRanking, PanelError>> = roles
        .par_iter()
        .map(|role| {
            let wrap = |source| PanelError::Expert {
                role_id: role.role_id,
                level: level_index,
                source,
            };
            let assignment = DomainAssignment {
                label: role.domain_label.clone(),
                charter: role.charter.clone(),
            };
            let order = gateway
                .rank_criteria(d, &assignment, briefs.clone())
                .map_err(wrap)?;
            let mut rejection = screen_rationale(&order.rationale);
            if rejection.is_none()
                && !gateway
                    .validate_rationale(d, &role.domain_label, &order.rationale, names.clone())
                    .map_err(wrap)?
            {
                rejection = Some("manager judged the rationale off-topic".into());
            }
            Ok(ExpertRanking {
                role_id: role.role_id,
                level_index,
                ranking: order
                    .order
                    .iter()
                    .map(|&i| level_criteria[i].criterion_id)
                    .collect(),
                rationale: order.rationale,
                accepted: rejection.is_none(),
                rejection,
            })
        })
        .collect();
    let mut rankings = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let fallback = !rankings.is_empty() && rankings.iter().all(|r| !r.accepted);
    if fallback {
        rankings.iter_mut().for_each(|r| r.accepted = true);
    }
    Ok((rankings, fallback))
}

/// Average ranks, comparison matrix, local weights and consistency for one
/// level from its (already screened) rankings.
pub fn weigh_level(
    level_index: usize,
    criteria: &[usize],
    rankings: &[ExpertRanking],
) -> Result<(Vec<f64>, PairwiseMatrix, Vec<f64>, ConsistencyReport), PanelError> {
    let local = |id: usize| criteria.iter().position(|&c| c == id);
    let accepted: Vec<Vec<usize>> = rankings
        .iter()
        .filter(|r| r.accepted)
        .map(|r| {
            r.ranking
                .iter()
                .map(|&id| local(id).unwrap_or(usize::MAX))
                .collect()
        })
        .collect();
    let math = |source| PanelError::Math {
        level: level_index,
        source,
    };
    let avg = aggregate_rankings(&accepted).map_err(math)?;
    let matrix = ranks_to_comparison_matrix(&avg);
    let (w, lambda) = ahp_weights(&matrix).map_err(math)?;
    let report = consistency(&matrix, lambda);
    Ok((avg, matrix, w.0, report))
}

pub fn build_weights(
    partition: &LevelPartition,
    criteria: &[Criterion],
    roles: &[ExpertRole],
    d: &str,
    gateway: &Gateway,
) -> Result<(WeightVector, PanelTranscript), PanelError> {
    let k = criteria.len();
    if !partition.covers(k) {
        return Err(PanelError::BadPartition(k));
    }
    if roles.is_empty() {
        return Err(PanelError::NoExperts);
    }
    if d.trim().is_empty() {
        return Err(PanelError::EmptyDescription);
    }
    let mass = 1.0 / partition.len() as f64;
    let mut weights = vec![0.0; k];
    let mut levels = Vec::with_capacity(partition.len());

    for (i, ids) in partition.levels.iter().enumerate() {
        let level_index = i + 1;
        let level_criteria: Vec<&Criterion> = ids.iter().map(|&id| &criteria[id]).collect();
        let (rankings, fallback) = collect_rankings(level_index, &level_criteria, roles, d, gateway)?;
        let (avg, matrix, local, report) = weigh_level(level_index, ids, &rankings)?;
        for (&id, u) in ids.iter().zip(&local) {
            weights[id] = u * mass;
        }
        levels.push(LevelRecord {
            level_index,
            criteria: ids.clone(),
            rankings,
            fallback_all_accepted: fallback,
            average_ranks: avg,
            comparison: matrix,
            local_weights: local,
            consistency: report,
            level_mass: mass,
        });
    }
    let weights = WeightVector(weights);
    let transcript = PanelTranscript {
        roles: roles.to_vec(),
        levels,
        weights: weights.clone(),
    };
    Ok((weights, transcript))
}

/// Recomputes the global weights from the transcript's rankings and
/// acceptance flags alone.
pub fn replay(transcript: &PanelTranscript) -> Result<WeightVector, PanelError> {
    let k: usize = transcript.levels.iter().map(|l| l.criteria.len()).sum();
    let partition = LevelPartition {
        levels: transcript.levels.iter().map(|l| l.criteria.clone()).collect(),
    };
    if !partition.covers(k) {
        return Err(PanelError::Transcript("levels do not partition the criteria".into()));
    }
    let mass = 1.0 / transcript.levels.len() as f64;
    let mut weights = vec![0.0; k];
    for level in &transcript.levels {
        let (_, _, local, _) = weigh_level(level.level_index, &level.criteria, &level.rankings)?;
        for (&id, u) in level.criteria.iter().zip(&local) {
            weights[id] = u * mass;
        }
    }
    Ok(WeightVector(weights))
}
