//! Filtered ranking evaluation and classification accuracy.
//!
//! The harness is scorer-agnostic: anything implementing [`Scorer`] runs
//! through the same code path, which is how the translational baselines
//! cross-validate the transformer pipeline. Link prediction corrupts each
//! test triple on both sides against every entity, removes candidates that
//! are themselves true triples in any split (the filtered setting), and ranks
//! by descending plausibility with mean-tie ranks.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::par;
use crate::store::{EntityId, KnowledgeGraph, LabeledTriple, RelationId, Split, Triple};

/// Error raised inside a scorer, carried back with the offending query.
#[derive(Clone, Debug, Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scorer failed on query {query}: {source}")]
    Scorer {
        query: Triple,
        #[source]
        source: ScorerError,
    },
    #[error("non-finite score")]
    NonFinite,
    #[error("non-finite score for query {query}")]
    NonFiniteScore { query: Triple },
    #[error("scorer does not provide relation scores")]
    NoRelationScores,
    #[error("relation score vector has length {got}, expected {expected}")]
    BadRelationVector { got: usize, expected: usize },
    #[error("no examples to evaluate")]
    EmptyInput,
}

/// A plausibility oracle over triples. Higher scores mean more plausible.
pub trait Scorer: Sync {
    fn plausibility(&self, t: Triple) -> Result<f64, ScorerError>;

    /// Batch scoring; the default maps the scalar method.
    fn plausibility_batch(&self, triples: &[Triple]) -> Result<Vec<f64>, ScorerError> {
        triples.iter().map(|&t| self.plausibility(t)).collect()
    }

    /// Scores for every relation between two entities, if this scorer
    /// supports relation prediction.
    fn relation_scores(
        &self,
        _head: EntityId,
        _tail: EntityId,
    ) -> Option<Result<Vec<f64>, ScorerError>> {
        None
    }
}

/// Mean-tie descending rank: one plus the number of strictly better
/// candidates plus half the number of exact ties.
pub fn rank_of(correct_score: f64, candidate_scores: &[f64]) -> Result<f64, EvalError> {
    if !correct_score.is_finite() || candidate_scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let mut greater = 0usize;
    let mut equal = 0usize;
    for &s in candidate_scores {
        if s > correct_score {
            greater += 1;
        } else if s == correct_score {
            equal += 1;
        }
    }
    Ok(1.0 + greater as f64 + equal as f64 / 2.0)
}

/// Which entity slot a ranking query corrupted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionSide {
    Head,
    Tail,
    Relation,
}

/// One evaluated ranking query.
#[derive(Clone, Debug, Serialize)]
pub struct QueryRecord {
    pub triple: Triple,
    pub side: CorruptionSide,
    pub rank: f64,
}

/// Aggregated ranking results for one split.
#[derive(Clone, Debug, Serialize)]
pub struct RankingReport {
    pub mean_rank: f64,
    /// Fraction of queries with rank at most k, keyed by k.
    pub hits_at_k: BTreeMap<usize, f64>,
    pub num_queries: usize,
    #[serde(skip)]
    pub records: Vec<QueryRecord>,
}

/// Ks reported by default: Hits@1 and Hits@10.
pub const HITS_KS: [usize; 2] = [1, 10];

impl RankingReport {
    pub fn from_records(records: Vec<QueryRecord>) -> Self {
        let n = records.len();
        let mut mean = 0.0;
        for r in &records {
            mean += r.rank;
        }
        mean /= n.max(1) as f64;
        let mut hits = BTreeMap::new();
        for k in HITS_KS {
            let count = records.iter().filter(|r| r.rank <= k as f64).count();
            hits.insert(k, count as f64 / n.max(1) as f64);
        }
        Self {
            mean_rank: mean,
            hits_at_k: hits,
            num_queries: n,
            records,
        }
    }

    pub fn ranks(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rank).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Remove candidates that are true triples in any split (default). The
    /// raw setting keeps them.
    pub filtered: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { filtered: true }
    }
}

fn wrap_scorer_err(query: Triple) -> impl FnOnce(ScorerError) -> EvalError {
    move |source| EvalError::Scorer { query, source }
}

/// Entity ranking over head and tail corruption, two queries per test triple.
pub fn link_prediction_eval<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: Split,
    opts: &EvalOptions,
) -> Result<RankingReport, EvalError> {
    let triples = kg.split(split);
    if triples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n_ent = kg.num_entities() as u32;
    let per_triple: Vec<Result<[QueryRecord; 2], EvalError>> = par::map_slice(triples, |&t| {
        let head_rank = rank_one_side(scorer, kg, t, CorruptionSide::Head, n_ent, opts)?;
        let tail_rank = rank_one_side(scorer, kg, t, CorruptionSide::Tail, n_ent, opts)?;
        Ok([
            QueryRecord {
                triple: t,
                side: CorruptionSide::Head,
                rank: head_rank,
            },
            QueryRecord {
                triple: t,
                side: CorruptionSide::Tail,
                rank: tail_rank,
            },
        ])
    });
    let mut records = Vec::with_capacity(triples.len() * 2);
    for r in per_triple {
        records.extend(r?);
    }
    Ok(RankingReport::from_records(records))
}

fn rank_one_side<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    t: Triple,
    side: CorruptionSide,
    n_ent: u32,
    opts: &EvalOptions,
) -> Result<f64, EvalError> {
    let mut candidates = Vec::with_capacity(n_ent as usize - 1);
    for e in 0..n_ent {
        let candidate = match side {
            CorruptionSide::Head => {
                if e == t.head.0 {
                    continue;
                }
                Triple {
                    head: EntityId(e),
                    ..t
                }
            }
            CorruptionSide::Tail => {
                if e == t.tail.0 {
                    continue;
                }
                Triple {
                    tail: EntityId(e),
                    ..t
                }
            }
            CorruptionSide::Relation => unreachable!("entity ranking only"),
        };
        if opts.filtered && kg.is_known_unchecked(&candidate) {
            continue;
        }
        candidates.push(candidate);
    }
    let correct = scorer.plausibility(t).map_err(wrap_scorer_err(t))?;
    let scores = scorer
        .plausibility_batch(&candidates)
        .map_err(wrap_scorer_err(t))?;
    if !correct.is_finite() || scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore { query: t });
    }
    rank_of(correct, &scores).map_err(|_| EvalError::NonFiniteScore { query: t })
}

/// Relation ranking: for each test triple, rank its relation among all
/// relations, filtering those that also hold between the same entity pair.
pub fn relation_prediction_eval<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: Split,
    opts: &EvalOptions,
) -> Result<RankingReport, EvalError> {
    let triples = kg.split(split);
    if triples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n_rel = kg.num_relations();
    let per_triple: Vec<Result<QueryRecord, EvalError>> = par::map_slice(triples, |&t| {
        let scores = scorer
            .relation_scores(t.head, t.tail)
            .ok_or(EvalError::NoRelationScores)?
            .map_err(wrap_scorer_err(t))?;
        if scores.len() != n_rel {
            return Err(EvalError::BadRelationVector {
                got: scores.len(),
                expected: n_rel,
            });
        }
        let mut candidate_scores = Vec::with_capacity(n_rel - 1);
        for r in 0..n_rel {
            if r == t.relation.index() {
                continue;
            }
            let competitor = Triple {
                relation: RelationId(r as u32),
                ..t
            };
            if opts.filtered && kg.is_known_unchecked(&competitor) {
                continue;
            }
            candidate_scores.push(scores[r]);
        }
        let correct = scores[t.relation.index()];
        if !correct.is_finite() || candidate_scores.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFiniteScore { query: t });
        }
        Ok(QueryRecord {
            triple: t,
            side: CorruptionSide::Relation,
            rank: rank_of(correct, &candidate_scores)?,
        })
    });
    let records: Result<Vec<QueryRecord>, EvalError> = per_triple.into_iter().collect();
    Ok(RankingReport::from_records(records?))
}

/// Classification accuracy: predicted positive iff plausibility exceeds
/// `threshold`.
pub fn triple_classification_eval<S: Scorer>(
    scorer: &S,
    labeled: &[LabeledTriple],
    threshold: f64,
) -> Result<f64, EvalError> {
    if labeled.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let triples: Vec<Triple> = labeled.iter().map(|l| l.triple).collect();
    let scores = scorer
        .plausibility_batch(&triples)
        .map_err(wrap_scorer_err(triples[0]))?;
    let correct = scores
        .iter()
        .zip(labeled)
        .filter(|(&s, l)| (s > threshold) == l.label)
        .count();
    Ok(correct as f64 / labeled.len() as f64)
}

/// Accuracy-maximizing global threshold over a labeled set, for the optional
/// tuned-threshold decision rule.
pub fn tune_threshold<S: Scorer>(
    scorer: &S,
    labeled: &[LabeledTriple],
) -> Result<f64, EvalError> {
    if labeled.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let triples: Vec<Triple> = labeled.iter().map(|l| l.triple).collect();
    let scores = scorer
        .plausibility_batch(&triples)
        .map_err(wrap_scorer_err(triples[0]))?;
    let mut scored: Vec<(f64, bool)> = scores
        .iter()
        .zip(labeled)
        .map(|(&s, l)| (s, l.label))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    // Candidate cuts: midpoints between adjacent distinct scores plus the
    // extremes. Predicting positive above the cut, count accuracy.
    let mut best = (0.5, 0usize);
    let mut cuts = vec![scored[0].0 - 1.0];
    for w in scored.windows(2) {
        if w[0].0 != w[1].0 {
            cuts.push(0.5 * (w[0].0 + w[1].0));
        }
    }
    cuts.push(scored[scored.len() - 1].0 + 1.0);
    for cut in cuts {
        let acc = scored
            .iter()
            .filter(|(s, y)| (*s > cut) == *y)
            .count();
        if acc > best.1 {
            best = (cut, acc);
        }
    }
    Ok(best.0)
}

/// Built-in sanity scorer: full plausibility for known-true triples, zero
/// otherwise. Under filtered evaluation every query ranks first.
pub struct TruthOracle<'a> {
    pub kg: &'a KnowledgeGraph,
}

impl Scorer for TruthOracle<'_> {
    fn plausibility(&self, t: Triple) -> Result<f64, ScorerError> {
        Ok(if self.kg.is_known_unchecked(&t) { 1.0 } else { 0.0 })
    }

    fn relation_scores(
        &self,
        head: EntityId,
        tail: EntityId,
    ) -> Option<Result<Vec<f64>, ScorerError>> {
        let v = (0..self.kg.num_relations() as u32)
            .map(|r| {
                let t = Triple {
                    head,
                    relation: RelationId(r),
                    tail,
                };
                if self.kg.is_known_unchecked(&t) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Some(Ok(v))
    }
}
