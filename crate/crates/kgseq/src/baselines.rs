//! Translational-embedding baselines.
//!
//! TransE scores a triple by the negative L2 distance `-||h + r - t||` and
//! trains with a margin ranking loss against one-slot corruptions, keeping
//! entity vectors on the unit sphere. DistMult scores with the trilinear
//! product `Σ h·r·t` under a logistic loss. Both plug into the shared
//! evaluation harness unchanged, which cross-validates it: DistMult's exact
//! head/tail symmetry, for instance, must produce tied ranks on inverse
//! queries.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Scorer, ScorerError};
use crate::rng::{rng_from, split_seed};
use crate::store::{EntityId, KnowledgeGraph, NegativeSamplingConfig, RelationId, Split, Triple};
use crate::tensor::Matrix;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid baseline config: {0}")]
    BadConfig(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    TransE,
    DistMult,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::TransE => "transe",
            BaselineKind::DistMult => "distmult",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub dim: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            margin: 1.0,
            learning_rate: 0.01,
            epochs: 500,
            negatives_per_positive: 1,
            seed: 42,
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<(), BaselineError> {
        if self.dim == 0 {
            return Err(BaselineError::BadConfig("dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(BaselineError::BadConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.negatives_per_positive == 0 {
            return Err(BaselineError::BadConfig(
                "negatives_per_positive must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Entity and relation embeddings for TransE.
#[derive(Clone, Debug)]
pub struct TransEParams {
    pub entity: Matrix<f32>,
    pub relation: Matrix<f32>,
}

/// Entity and relation embeddings for DistMult.
#[derive(Clone, Debug)]
pub struct DistMultParams {
    pub entity: Matrix<f32>,
    pub relation: Matrix<f32>,
}

/// `-||h + r - t||_2`, accumulated in f64.
pub fn transe_score(params: &TransEParams, t: Triple) -> f64 {
    let h = params.entity.row(t.head.index());
    let r = params.relation.row(t.relation.index());
    let tl = params.entity.row(t.tail.index());
    let mut sum_sq = 0.0f64;
    for i in 0..h.len() {
        let d = h[i] as f64 + r[i] as f64 - tl[i] as f64;
        sum_sq += d * d;
    }
    -sum_sq.sqrt()
}

/// Trilinear product `Σ h·r·t`. Each term multiplies the two entity factors
/// first, so the head/tail symmetry holds exactly in floating point.
pub fn distmult_score(params: &DistMultParams, t: Triple) -> f64 {
    let h = params.entity.row(t.head.index());
    let r = params.relation.row(t.relation.index());
    let tl = params.entity.row(t.tail.index());
    let mut sum = 0.0f64;
    for i in 0..h.len() {
        sum += (h[i] as f64 * tl[i] as f64) * r[i] as f64;
    }
    sum
}

/// A trained baseline exposed through the shared scorer interface.
#[derive(Clone, Debug)]
pub enum BaselineModel {
    TransE(TransEParams),
    DistMult(DistMultParams),
}

impl BaselineModel {
    pub fn score(&self, t: Triple) -> f64 {
        match self {
            BaselineModel::TransE(p) => transe_score(p, t),
            BaselineModel::DistMult(p) => distmult_score(p, t),
        }
    }

    fn num_relations(&self) -> usize {
        match self {
            BaselineModel::TransE(p) => p.relation.rows(),
            BaselineModel::DistMult(p) => p.relation.rows(),
        }
    }
}

impl Scorer for BaselineModel {
    fn plausibility(&self, t: Triple) -> Result<f64, ScorerError> {
        Ok(self.score(t))
    }

    fn relation_scores(
        &self,
        head: EntityId,
        tail: EntityId,
    ) -> Option<Result<Vec<f64>, ScorerError>> {
        let v = (0..self.num_relations() as u32)
            .map(|r| {
                self.score(Triple {
                    head,
                    relation: RelationId(r),
                    tail,
                })
            })
            .collect();
        Some(Ok(v))
    }
}

/// Uniform(-6/sqrt(d), 6/sqrt(d)) init per the original translational recipe.
fn init_embeddings(rows: usize, dim: usize, seed: u64) -> Matrix<f32> {
    let bound = 6.0 / (dim as f64).sqrt();
    let mut rng = rng_from(seed);
    Matrix::from_fn(rows, dim, |_, _| {
        (rng.random::<f64>() * 2.0 * bound - bound) as f32
    })
}

fn normalize_row(m: &mut Matrix<f32>, row: usize) {
    let r = m.row_mut(row);
    let norm = r.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in r {
            *v = (*v as f64 / norm) as f32;
        }
    }
}

/// Per-epoch mean loss alongside the trained parameters.
pub struct BaselineTraining {
    pub model: BaselineModel,
    pub epoch_losses: Vec<f64>,
}

/// Trains a baseline with per-triple stochastic updates and epoch-fresh
/// negatives; deterministic in the seed.
pub fn train_baseline(
    kind: BaselineKind,
    kg: &KnowledgeGraph,
    cfg: &BaselineConfig,
) -> Result<BaselineTraining, BaselineError> {
    cfg.validate()?;
    let train = kg.split(Split::Train);
    if train.is_empty() {
        return Err(BaselineError::EmptyTrainingSet);
    }
    let n_ent = kg.num_entities();
    let n_rel = kg.num_relations();
    let mut entity = init_embeddings(n_ent, cfg.dim, split_seed(cfg.seed, 0));
    let mut relation = init_embeddings(n_rel, cfg.dim, split_seed(cfg.seed, 1));
    if kind == BaselineKind::TransE {
        for r in 0..n_rel {
            normalize_row(&mut relation, r);
        }
        for e in 0..n_ent {
            normalize_row(&mut entity, e);
        }
    }

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // Linear decay to a tenth of the base rate settles the late-stage
        // update noise that a constant step leaves behind.
        let decay = 1.0 - 0.9 * epoch as f64 / cfg.epochs.max(1) as f64;
        let lr = (cfg.learning_rate * decay) as f32;
        let epoch_seed = split_seed(cfg.seed, 0xBA5E_0000 + epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from(split_seed(epoch_seed, 0)));
        let mut loss_sum = 0.0f64;
        let mut loss_count = 0usize;
        for &i in &order {
            let pos = train[i];
            let neg_cfg = NegativeSamplingConfig {
                negatives_per_positive: cfg.negatives_per_positive,
                corruption: crate::store::Corruption::HeadOrTailUniform,
                seed: split_seed(epoch_seed, 1 + i as u64),
                max_rejection_attempts: 32 * cfg.negatives_per_positive,
            };
            for neg in kg.sample_negatives(pos, &neg_cfg)?.negatives {
                let loss = match kind {
                    BaselineKind::TransE => transe_update(
                        &mut entity,
                        &mut relation,
                        pos,
                        neg.triple,
                        cfg.margin,
                        lr,
                    ),
                    BaselineKind::DistMult => {
                        distmult_update(&mut entity, &mut relation, pos, neg.triple, lr)
                    }
                };
                loss_sum += loss;
                loss_count += 1;
            }
        }
        let mean = loss_sum / loss_count.max(1) as f64;
        if !mean.is_finite() {
            return Err(BaselineError::Diverged { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }

    let model = match kind {
        BaselineKind::TransE => BaselineModel::TransE(TransEParams { entity, relation }),
        BaselineKind::DistMult => BaselineModel::DistMult(DistMultParams { entity, relation }),
    };
    Ok(BaselineTraining {
        model,
        epoch_losses,
    })
}

/// Margin ranking step: descend `max(0, margin + d(pos) - d(neg))` where `d`
/// is the translation distance. Touched entity rows are renormalized.
fn transe_update(
    entity: &mut Matrix<f32>,
    relation: &mut Matrix<f32>,
    pos: Triple,
    neg: Triple,
    margin: f64,
    lr: f32,
) -> f64 {
    let dim = entity.cols();
    let diff = |e: &Matrix<f32>, r: &Matrix<f32>, t: Triple| -> Vec<f32> {
        let h = e.row(t.head.index());
        let rel = r.row(t.relation.index());
        let tl = e.row(t.tail.index());
        (0..dim).map(|i| h[i] + rel[i] - tl[i]).collect()
    };
    let norm = |v: &[f32]| v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();

    let pos_diff = diff(entity, relation, pos);
    let neg_diff = diff(entity, relation, neg);
    let d_pos = norm(&pos_diff);
    let d_neg = norm(&neg_diff);
    let loss = margin + d_pos - d_neg;
    if loss <= 0.0 {
        return 0.0;
    }

    // Unit gradients of the two distances; guard the degenerate zero vector.
    let g_pos: Vec<f32> = pos_diff
        .iter()
        .map(|&v| if d_pos > 1e-12 { v / d_pos as f32 } else { 0.0 })
        .collect();
    let g_neg: Vec<f32> = neg_diff
        .iter()
        .map(|&v| if d_neg > 1e-12 { v / d_neg as f32 } else { 0.0 })
        .collect();

    for i in 0..dim {
        // Positive distance shrinks.
        entity.row_mut(pos.head.index())[i] -= lr * g_pos[i];
        relation.row_mut(pos.relation.index())[i] -= lr * g_pos[i];
        entity.row_mut(pos.tail.index())[i] += lr * g_pos[i];
        // Negative distance grows.
        entity.row_mut(neg.head.index())[i] += lr * g_neg[i];
        relation.row_mut(neg.relation.index())[i] += lr * g_neg[i];
        entity.row_mut(neg.tail.index())[i] -= lr * g_neg[i];
    }
    for id in [pos.head, pos.tail, neg.head, neg.tail] {
        normalize_row(entity, id.index());
    }
    loss
}

/// Logistic step on the trilinear score: labels +1 for the positive, -1 for
/// the corruption.
fn distmult_update(
    entity: &mut Matrix<f32>,
    relation: &mut Matrix<f32>,
    pos: Triple,
    neg: Triple,
    lr: f32,
) -> f64 {
    let mut total = 0.0f64;
    for (t, y) in [(pos, 1.0f64), (neg, -1.0f64)] {
        let score = {
            let h = entity.row(t.head.index());
            let r = relation.row(t.relation.index());
            let tl = entity.row(t.tail.index());
            (0..entity.cols())
                .map(|i| (h[i] as f64 * tl[i] as f64) * r[i] as f64)
                .sum::<f64>()
        };
        total += (1.0 + (-y * score).exp()).ln();
        // d/ds log(1 + exp(-y s)) = -y sigmoid(-y s)
        let coeff = (-y / (1.0 + (y * score).exp())) as f32;
        let dim = entity.cols();
        for i in 0..dim {
            let h = entity.get(t.head.index(), i);
            let r = relation.get(t.relation.index(), i);
            let tl = entity.get(t.tail.index(), i);
            entity.row_mut(t.head.index())[i] -= lr * coeff * r * tl;
            relation.row_mut(t.relation.index())[i] -= lr * coeff * h * tl;
            entity.row_mut(t.tail.index())[i] -= lr * coeff * h * r;
        }
    }
    total / 2.0
}
