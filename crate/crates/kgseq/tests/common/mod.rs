//! Shared test support: an independent brute-force ranking evaluator and
//! small synthetic graphs.
//!
//! The brute-force evaluator deliberately avoids the library's candidate
//! generation, membership index, and rank arithmetic: it scans split vectors
//! linearly, materializes and sorts explicit score lists, and derives ranks
//! from sorted positions. It exists to cross-check the production harness.

// Not every test binary uses every helper.
#![allow(dead_code)]

use kgseq::eval::{QueryRecord, Scorer};
use kgseq::store::{EntityId, KnowledgeGraph, RelationId, Split, TextEntry, Triple};

/// Builds a graph with numbered entity/relation names.
pub fn kg_from_triples(
    n_entities: u32,
    n_relations: u32,
    train: Vec<Triple>,
    dev: Vec<Triple>,
    test: Vec<Triple>,
) -> KnowledgeGraph {
    let entities = (0..n_entities)
        .map(|i| TextEntry {
            raw_id: format!("e{i:04}"),
            text: format!("entity {i}"),
        })
        .collect();
    let relations = (0..n_relations)
        .map(|i| TextEntry {
            raw_id: format!("r{i:03}"),
            text: format!("relation {i}"),
        })
        .collect();
    KnowledgeGraph::from_parts(entities, relations, train, dev, test).expect("valid test graph")
}

/// Linear-scan membership over all three splits; the oracle for `is_known`.
pub fn known_by_scan(kg: &KnowledgeGraph, t: Triple) -> bool {
    for split in [Split::Train, Split::Dev, Split::Test] {
        if kg.split(split).iter().any(|x| *x == t) {
            return true;
        }
    }
    false
}

/// Rank by explicit sort: position of the correct score in the descending
/// list, averaging over the tie block.
fn rank_by_sorting(correct: f64, mut others: Vec<f64>) -> f64 {
    others.push(correct);
    others.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let first = others.iter().position(|&s| s == correct).unwrap();
    let last = others.iter().rposition(|&s| s == correct).unwrap();
    // Mean of best and worst one-based positions within the tie block.
    ((first + 1) + (last + 1)) as f64 / 2.0
}

/// Sequential filtered link-prediction evaluation by exhaustive scan.
/// Returns (mean rank, hits map for k = 1 and 10, per-query ranks).
pub fn brute_force_link_prediction<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: Split,
    filtered: bool,
) -> (f64, f64, f64, Vec<f64>) {
    let mut ranks = Vec::new();
    for &t in kg.split(split) {
        // Head side.
        let mut others = Vec::new();
        for e in 0..kg.num_entities() as u32 {
            if e == t.head.0 {
                continue;
            }
            let candidate = Triple {
                head: EntityId(e),
                ..t
            };
            if filtered && known_by_scan(kg, candidate) {
                continue;
            }
            others.push(scorer.plausibility(candidate).unwrap());
        }
        ranks.push(rank_by_sorting(scorer.plausibility(t).unwrap(), others));

        // Tail side.
        let mut others = Vec::new();
        for e in 0..kg.num_entities() as u32 {
            if e == t.tail.0 {
                continue;
            }
            let candidate = Triple {
                tail: EntityId(e),
                ..t
            };
            if filtered && known_by_scan(kg, candidate) {
                continue;
            }
            others.push(scorer.plausibility(candidate).unwrap());
        }
        ranks.push(rank_by_sorting(scorer.plausibility(t).unwrap(), others));
    }
    summarize(ranks)
}

/// Sequential filtered relation-prediction evaluation by exhaustive scan.
pub fn brute_force_relation_prediction<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: Split,
    filtered: bool,
) -> (f64, f64, f64, Vec<f64>) {
    let mut ranks = Vec::new();
    for &t in kg.split(split) {
        let scores = scorer.relation_scores(t.head, t.tail).unwrap().unwrap();
        let mut others = Vec::new();
        for r in 0..kg.num_relations() as u32 {
            if r == t.relation.0 {
                continue;
            }
            let competitor = Triple {
                relation: RelationId(r),
                ..t
            };
            if filtered && known_by_scan(kg, competitor) {
                continue;
            }
            others.push(scores[r as usize]);
        }
        ranks.push(rank_by_sorting(scores[t.relation.index()], others));
    }
    summarize(ranks)
}

fn summarize(ranks: Vec<f64>) -> (f64, f64, f64, Vec<f64>) {
    let n = ranks.len() as f64;
    let mut mean = 0.0;
    for r in &ranks {
        mean += r;
    }
    mean /= n;
    let hits1 = ranks.iter().filter(|&&r| r <= 1.0).count() as f64 / n;
    let hits10 = ranks.iter().filter(|&&r| r <= 10.0).count() as f64 / n;
    (mean, hits1, hits10, ranks)
}

/// Ranks from a production report, in query order.
pub fn report_ranks(records: &[QueryRecord]) -> Vec<f64> {
    records.iter().map(|r| r.rank).collect()
}
