//! Seeded input generators shared by the benchmarks.

use rad_core::criteria::RelationMatrix;
use rad_core::decision::ScoreMatrix;
use rad_core::mcdm::PairwiseMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn random_relation(k: usize, density: f64, seed: u64) -> RelationMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut e = RelationMatrix::zeros(k);
    for a in 0..k {
        for b in 0..k {
            if a != b && rng.random_bool(density) {
                e.set(a, b, 1);
            }
        }
    }
    e
}

pub fn random_reciprocal(m: usize, seed: u64) -> PairwiseMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cells = vec![vec![1.0; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let v: f64 = rng.random_range(1.0..=9.0);
            let v = if rng.random_bool(0.5) { v } else { 1.0 / v };
            cells[a][b] = v;
            cells[b][a] = 1.0 / v;
        }
    }
    PairwiseMatrix::from_cells(cells)
}

/// Score matrix with `o` options and `k` criteria plus normalized weights.
pub fn random_scores(o: usize, k: usize, seed: u64) -> (ScoreMatrix, Vec<f64>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let cells = (0..o).map(|_| (0..k).map(|_| rng.random_range(1..=9)).collect()).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    (ScoreMatrix::from_cells(cells), raw.iter().map(|x| x / total).collect())
}

/// `docs` documents of `sections` headed sections each, alternating
/// markdown and decimal numbering. Returns `(doc_id, body)` pairs.
pub fn sectioned_corpus(docs: usize, sections: usize) -> Vec<(String, String)> {
    (0..docs)
        .map(|d| {
            let mut body = String::new();
            for s in 0..sections {
                if d % 2 == 0 {
                    body.push_str(&format!("## Topic {d}.{s} requirements\n"));
                } else {
                    body.push_str(&format!("{}.{} Topic requirements {d} {s}\n", d + 1, s + 1));
                }
                for p in 0..3 {
                    body.push_str(&format!("Clause {p} of topic {s} limits charging load and review time.\n"));
                }
                body.push('\n');
            }
            (format!("part{d:02}.md"), body)
        })
        .collect()
}
