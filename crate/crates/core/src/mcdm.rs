//! Decision mathematics: Boolean closure, ISM level extraction, ranking
//! aggregation and AHP eigenvector weighting with consistency indices.
//!
//! Everything here is a pure function over small dense matrices. Criterion
//! counts are bounded by the retrieval `top_k` (tens, not thousands), so
//! plain `Vec<Vec<_>>` storage is used throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::RelationMatrix;

/// Saaty random-index constants for matrix orders 1..=15.
pub const RANDOM_INDEX: [f64; 15] = [
    0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57, 1.59,
];

/// Acceptable consistency ratio.
pub const CR_THRESHOLD: f64 = 0.1;

/// The discrete Saaty intensity scale, both directions.
pub const SAATY_SCALE: [f64; 17] = [
    1.0 / 9.0,
    1.0 / 8.0,
    1.0 / 7.0,
    1.0 / 6.0,
    1.0 / 5.0,
    1.0 / 4.0,
    1.0 / 3.0,
    1.0 / 2.0,
    1.0,
    2.0,
    3.0,
    4.0,
    5.0,
    6.0,
    7.0,
    8.0,
    9.0,
];

const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum McdmError {
    #[error("level extraction stalled with {remaining} criteria left; reachability matrix is not closed")]
    PartitionStall { remaining: usize },
    #[error("ranking {index} is not a permutation of 0..{size}")]
    MalformedRanking { index: usize, size: usize },
    #[error("no rankings to aggregate")]
    EmptyRankings,
    #[error("power iteration did not converge in {iterations} iterations (last change {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },
    #[error("pairwise matrix is empty")]
    EmptyMatrix,
}

/// Reflexive-transitive closure of a relation matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachabilityMatrix {
    cells: Vec<Vec<u8>>,
}

impl ReachabilityMatrix {
    /// Wraps raw cells without checking closure. Used when replaying stored
    /// models and by tests that feed hand-built matrices.
    pub fn from_cells(cells: Vec<Vec<u8>>) -> Self {
        Self { cells }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.cells[from][to] == 1
    }

    pub fn cells(&self) -> &[Vec<u8>] {
        &self.cells
    }

    pub fn is_closed(&self) -> bool {
        let k = self.size();
        (0..k).all(|a| self.reaches(a, a))
            && (0..k).all(|a| {
                (0..k).all(|b| {
                    !self.reaches(a, b) || (0..k).all(|c| !self.reaches(b, c) || self.reaches(a, c))
                })
            })
    }
}

/// Ordered criterion levels; `levels[0]` holds the outcome-like sinks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    pub levels: Vec<Vec<usize>>,
}

impl LevelPartition {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// 1-based level of a criterion, if present.
    pub fn level_of(&self, id: usize) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(&id)).map(|i| i + 1)
    }

    /// True when the levels are non-empty, disjoint and cover `0..k`.
    pub fn covers(&self, k: usize) -> bool {
        let mut seen = vec![false; k];
        for level in &self.levels {
            if level.is_empty() {
                return false;
            }
            for &id in level {
                if id >= k || seen[id] {
                    return false;
                }
                seen[id] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Positive reciprocal comparison matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    cells: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn from_cells(cells: Vec<Vec<f64>>) -> Self {
        Self { cells }
    }

    /// Builds `p_ab = w_a / w_b`, the perfectly consistent matrix for `weights`.
    pub fn from_weights(weights: &[f64]) -> Self {
        let cells = weights
            .iter()
            .map(|wa| weights.iter().map(|wb| wa / wb).collect())
            .collect();
        Self { cells }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.cells[a][b]
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn is_reciprocal(&self, tol: f64) -> bool {
        let m = self.size();
        (0..m).all(|a| {
            self.cells[a].len() == m
                && (0..m).all(|b| {
                    let p = self.cells[a][b];
                    p > 0.0 && (p * self.cells[b][a] - 1.0).abs() <= tol
                })
        })
    }

    fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|row| row.iter().zip(v).map(|(p, x)| p * x).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub size: usize,
    pub lambda_max: f64,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub consistent: bool,
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.0.iter().all(|w| *w >= 0.0) && (self.sum() - 1.0).abs() <= tol
    }
}

/// Warshall closure, reflexive.
pub fn transitive_closure(relations: &RelationMatrix) -> ReachabilityMatrix {
    let k = relations.size();
    let mut r: Vec<Vec<u8>> = (0..k)
        .map(|a| (0..k).map(|b| u8::from(a == b || relations.get(a, b) == 1)).collect())
        .collect();
    for via in 0..k {
        for a in 0..k {
            if r[a][via] == 0 {
                continue;
            }
            for b in 0..k {
                if r[via][b] == 1 {
                    r[a][b] = 1;
                }
            }
        }
    }
    ReachabilityMatrix { cells: r }
}

/// Classical ISM level extraction over the remaining set. An element joins
/// the current level when everything it reaches also reaches it back, i.e.
/// `reach(a) ∩ ante(a) == reach(a)`.
pub fn ism_partition(reach: &ReachabilityMatrix) -> Result<LevelPartition, McdmError> {
    let k = reach.size();
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut levels = Vec::new();

    while !remaining.is_empty() {
        let level: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&a| {
                remaining
                    .iter()
                    .all(|&b| !reach.reaches(a, b) || reach.reaches(b, a))
            })
            .collect();
        if level.is_empty() {
            return Err(McdmError::PartitionStall {
                remaining: remaining.len(),
            });
        }
        remaining.retain(|id| !level.contains(id));
        levels.push(level);
    }
    Ok(LevelPartition { levels })
}

/// Mean 1-based position of each id across `rankings`. Each ranking lists
/// ids `0..m` from most to least important.
pub fn aggregate_rankings(rankings: &[Vec<usize>]) -> Result<Vec<f64>, McdmError> {
    let first = rankings.first().ok_or(McdmError::EmptyRankings)?;
    let m = first.len();
    let mut sums = vec![0.0; m];
    for (index, ranking) in rankings.iter().enumerate() {
        if !is_permutation(ranking, m) {
            return Err(McdmError::MalformedRanking { index, size: m });
        }
        for (pos, &id) in ranking.iter().enumerate() {
            sums[id] += (pos + 1) as f64;
        }
    }
    let n = rankings.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

pub fn is_permutation(ranking: &[usize], m: usize) -> bool {
    if ranking.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    ranking.iter().all(|&id| id < m && !std::mem::replace(&mut seen[id], true))
}

/// Maps average ranks onto the Saaty scale: the better-ranked side gets
/// `clamp(1 + round(gap), 1, 9)` and the other side its reciprocal.
pub fn ranks_to_comparison_matrix(avg_ranks: &[f64]) -> PairwiseMatrix {
    let m = avg_ranks.len();
    let mut cells = vec![vec![1.0; m]; m];
    for a in 0..m {
        for b in (a + 1)..m {
            let gap = avg_ranks[b] - avg_ranks[a];
            let intensity = (1.0 + gap.abs().round()).clamp(1.0, 9.0);
            if gap >= 0.0 {
                cells[a][b] = intensity;
                cells[b][a] = 1.0 / intensity;
            } else {
                cells[b][a] = intensity;
                cells[a][b] = 1.0 / intensity;
            }
        }
    }
    PairwiseMatrix { cells }
}

/// Principal right eigenvector by power iteration, normalized to sum 1,
/// together with the Rayleigh estimate of the dominant eigenvalue.
pub fn ahp_weights(p: &PairwiseMatrix) -> Result<(WeightVector, f64), McdmError> {
    let m = p.size();
    if m == 0 {
        return Err(McdmError::EmptyMatrix);
    }
    let mut w = vec![1.0 / m as f64; m];
    let mut last_delta = f64::INFINITY;

    for _ in 0..POWER_MAX_ITERATIONS {
        let mut next = p.mul_vec(&w);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        last_delta = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if last_delta < POWER_TOLERANCE {
            let pw = p.mul_vec(&w);
            let num: f64 = w.iter().zip(&pw).map(|(a, b)| a * b).sum();
            let den: f64 = w.iter().map(|a| a * a).sum();
            return Ok((WeightVector(w), num / den));
        }
    }
    Err(McdmError::NoConvergence {
        iterations: POWER_MAX_ITERATIONS,
        last_delta,
    })
}

pub fn random_index(m: usize) -> f64 {
    match m {
        0 => 0.0,
        m if m <= RANDOM_INDEX.len() => RANDOM_INDEX[m - 1],
        _ => RANDOM_INDEX[RANDOM_INDEX.len() - 1],
    }
}

pub fn consistency(p: &PairwiseMatrix, lambda_max: f64) -> ConsistencyReport {
    let m = p.size();
    let ri = random_index(m);
    if m <= 2 {
        return ConsistencyReport {
            size: m,
            lambda_max,
            ci: 0.0,
            ri,
            cr: 0.0,
            consistent: true,
        };
    }
    // λmax ≥ m for positive reciprocal matrices; clip round-off below it.
    let ci = ((lambda_max - m as f64) / (m as f64 - 1.0)).max(0.0);
    let cr = if ri == 0.0 { 0.0 } else { ci / ri };
    ConsistencyReport {
        size: m,
        lambda_max,
        ci,
        ri,
        cr,
        consistent: cr <= CR_THRESHOLD,
    }
}

/// Nearest Saaty value to a positive ratio, measured in log space so that
/// `snap(r)` and `snap(1/r)` are exact reciprocals.
pub fn nearest_saaty(ratio: f64) -> f64 {
    let target = ratio.ln();
    SAATY_SCALE
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.ln() - target)
                .abs()
                .total_cmp(&(b.ln() - target).abs())
        })
        .unwrap_or(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relations(k: usize, edges: &[(usize, usize)]) -> RelationMatrix {
        let mut e = RelationMatrix::zeros(k);
        for &(a, b) in edges {
            e.set(a, b, 1);
        }
        e
    }

    #[test]
    fn closure_of_empty_relation_is_identity() {
        let r = transitive_closure(&RelationMatrix::zeros(3));
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(r.reaches(a, b), a == b);
            }
        }
    }

    #[test]
    fn closure_follows_chains_and_cycles() {
        let r = transitive_closure(&relations(3, &[(0, 1), (1, 2)]));
        assert!(r.reaches(0, 2));
        assert!(!r.reaches(2, 0));

        let r = transitive_closure(&relations(2, &[(0, 1), (1, 0)]));
        assert!(r.reaches(0, 1) && r.reaches(1, 0));
        assert!(r.is_closed());
    }

    #[test]
    fn identity_reachability_is_one_level() {
        let r = transitive_closure(&RelationMatrix::zeros(3));
        let p = ism_partition(&r).unwrap();
        assert_eq!(p.levels, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn sinks_come_first() {
        let r = transitive_closure(&relations(3, &[(0, 2), (1, 2)]));
        assert_eq!(ism_partition(&r).unwrap().levels, vec![vec![2], vec![0, 1]]);
    }

    #[test]
    fn cycle_members_share_a_level() {
        let r = transitive_closure(&relations(3, &[(0, 1), (1, 0), (0, 2), (1, 2)]));
        assert_eq!(ism_partition(&r).unwrap().levels, vec![vec![2], vec![0, 1]]);
    }

    #[test]
    fn unclosed_matrix_can_stall() {
        // 0 -> 1 -> 2 -> 0 with none of the implied edges filled in.
        let r = ReachabilityMatrix::from_cells(vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        assert_eq!(
            ism_partition(&r),
            Err(McdmError::PartitionStall { remaining: 3 })
        );
    }

    #[test]
    fn unanimous_rankings_average_to_positions() {
        let r = vec![vec![0, 1, 2]; 5];
        assert_eq!(aggregate_rankings(&r).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn opposed_rankings_cancel() {
        let r = vec![vec![0, 1, 2], vec![2, 1, 0]];
        assert_eq!(aggregate_rankings(&r).unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn two_to_one_majority() {
        let r = vec![vec![0, 1], vec![0, 1], vec![1, 0]];
        let avg = aggregate_rankings(&r).unwrap();
        assert!((avg[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((avg[1] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_rankings_are_rejected() {
        assert_eq!(
            aggregate_rankings(&[vec![0, 1, 2], vec![0, 0, 2]]),
            Err(McdmError::MalformedRanking { index: 1, size: 3 })
        );
        assert_eq!(
            aggregate_rankings(&[vec![0, 1], vec![0, 1, 2]]),
            Err(McdmError::MalformedRanking { index: 1, size: 2 })
        );
        assert_eq!(aggregate_rankings(&[]), Err(McdmError::EmptyRankings));
    }

    #[test]
    fn rank_gaps_map_to_saaty_intensities() {
        let p = ranks_to_comparison_matrix(&[2.0, 2.0, 2.0]);
        assert!(p.cells().iter().flatten().all(|&x| x == 1.0));

        let p = ranks_to_comparison_matrix(&[1.0, 2.0]);
        assert_eq!(p.get(0, 1), 2.0);
        assert_eq!(p.get(1, 0), 0.5);

        let p = ranks_to_comparison_matrix(&[1.0, 10.0]);
        assert_eq!(p.get(0, 1), 9.0);

        // worse-ranked first
        let p = ranks_to_comparison_matrix(&[3.0, 1.0]);
        assert_eq!(p.get(1, 0), 3.0);
        assert_eq!(p.get(0, 1), 1.0 / 3.0);
        assert!(p.is_reciprocal(1e-12));
    }

    #[test]
    fn uniform_matrix_gives_uniform_weights() {
        let p = PairwiseMatrix::from_cells(vec![vec![1.0; 3]; 3]);
        let (w, lambda) = ahp_weights(&p).unwrap();
        for x in w.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((lambda - 3.0).abs() < 1e-12);
    }

    #[test]
    fn consistent_matrix_recovers_generating_weights() {
        let target = [0.6, 0.3, 0.1];
        let (w, lambda) = ahp_weights(&PairwiseMatrix::from_weights(&target)).unwrap();
        for (a, b) in w.as_slice().iter().zip(target) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((lambda - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_is_always_consistent() {
        let p = PairwiseMatrix::from_cells(vec![vec![1.0, 7.0], vec![1.0 / 7.0, 1.0]]);
        let (_, lambda) = ahp_weights(&p).unwrap();
        let c = consistency(&p, lambda);
        assert_eq!(c.ci, 0.0);
        assert_eq!(c.cr, 0.0);
        assert!(c.consistent);
    }

    #[test]
    fn singleton_matrix() {
        let p = PairwiseMatrix::from_cells(vec![vec![1.0]]);
        let (w, lambda) = ahp_weights(&p).unwrap();
        assert_eq!(w.0, vec![1.0]);
        assert_eq!(lambda, 1.0);
        assert!(consistency(&p, lambda).consistent);
    }

    #[test]
    fn empty_matrix_errors() {
        assert_eq!(
            ahp_weights(&PairwiseMatrix::from_cells(vec![])),
            Err(McdmError::EmptyMatrix)
        );
    }

    #[test]
    fn random_index_table() {
        assert_eq!(random_index(1), 0.0);
        assert_eq!(random_index(3), 0.58);
        assert_eq!(random_index(10), 1.49);
        assert_eq!(random_index(40), 1.59);
    }

    #[test]
    fn snapping_is_log_nearest_and_reciprocal() {
        assert_eq!(nearest_saaty(4.5), 5.0);
        assert_eq!(nearest_saaty(3.0), 3.0);
        assert_eq!(nearest_saaty(9.0), 9.0);
        assert_eq!(nearest_saaty(20.0), 9.0);
        assert_eq!(nearest_saaty(1.0 / 4.5), 1.0 / 5.0);
        assert_eq!(nearest_saaty(1.2), 1.0);
    }

    #[test]
    fn partition_coverage_check() {
        assert!(LevelPartition { levels: vec![vec![1], vec![0, 2]] }.covers(3));
        assert!(!LevelPartition { levels: vec![vec![1], vec![1, 2]] }.covers(3));
        assert!(!LevelPartition { levels: vec![vec![], vec![0]] }.covers(1));
    }
}
