//! Task heads, losses, and fine-tuning.
//!
//! Two heads sit on the encoder's classification vector: a two-way
//! plausibility head for triple sequences (scores sum to one, the first
//! component is the positive-class plausibility used for ranking) and an
//! R-way relation head for entity-pair sequences. Both train with
//! cross-entropy summed over the batch.

mod adam;
mod train;

pub use adam::{scheduled_lr, Adam};
pub use train::{train, EpochStats, TrainConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{
    backward_batch, forward_eval, forward_train, EncoderConfig, EncoderError, EncoderParams,
};
use crate::eval::{Scorer, ScorerError};
use crate::par;
use crate::rng::{rng_from, split_seed, truncated_normal};
use crate::store::{EntityId, RelationId, StoreError, Triple};
use crate::tensor::{dot, Matrix, Real};
use crate::textseq::{PackedSequence, PackingConfig, SeqKind, TextIndex, TextSeqError};

/// Probability clamp applied before logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    TripleClassification,
    LinkPrediction,
    RelationPrediction,
}

impl Task {
    /// Tuned epoch defaults: 3 for classification, 5 for link prediction,
    /// 20 for relation prediction.
    pub fn default_epochs(self) -> usize {
        match self {
            Task::TripleClassification => 3,
            Task::LinkPrediction => 5,
            Task::RelationPrediction => 20,
        }
    }

    /// Negatives per positive: 1 keeps classification class-balanced, 5 works
    /// best for link prediction, relation prediction trains on positives only.
    pub fn default_negatives(self) -> usize {
        match self {
            Task::TripleClassification => 1,
            Task::LinkPrediction => 5,
            Task::RelationPrediction => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::TripleClassification => "triple_classification",
            Task::LinkPrediction => "link_prediction",
            Task::RelationPrediction => "relation_prediction",
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("relation label {label} out of range (model has {num_relations} relations)")]
    BadLabel { label: u32, num_relations: usize },
    #[error("expected a {expected:?}-mode sequence, got {found:?}")]
    ModeMismatch { expected: SeqKind, found: SeqKind },
    #[error("head/model mismatch: {0}")]
    HeadMismatch(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Pack(#[from] TextSeqError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Two-way plausibility head (`2 × hidden`).
#[derive(Clone, Debug, PartialEq)]
pub struct TripleHead<T> {
    pub weight: Matrix<T>,
}

/// R-way relation head (`num_relations × hidden`).
#[derive(Clone, Debug, PartialEq)]
pub struct RelationHead<T> {
    pub weight: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Head<T> {
    Triple(TripleHead<T>),
    Relation(RelationHead<T>),
}

impl<T: Real> Head<T> {
    pub fn weight(&self) -> &Matrix<T> {
        match self {
            Head::Triple(h) => &h.weight,
            Head::Relation(h) => &h.weight,
        }
    }

    pub fn weight_mut(&mut self) -> &mut Matrix<T> {
        match self {
            Head::Triple(h) => &mut h.weight,
            Head::Relation(h) => &mut h.weight,
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            Head::Triple(_) => "triple",
            Head::Relation(_) => "relation",
        }
    }
}

/// Encoder plus task head.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: EncoderConfig,
    pub params: EncoderParams<T>,
    pub head: Head<T>,
}

impl<T: Real> Model<T> {
    pub fn new_triple(config: EncoderConfig) -> Result<Self, TaskError> {
        let params = EncoderParams::init(&config)?;
        let head = Head::Triple(TripleHead {
            weight: head_init(2, config.hidden_size, split_seed(config.seed, 0x4EAD)),
        });
        Ok(Self {
            config,
            params,
            head,
        })
    }

    pub fn new_relation(config: EncoderConfig, num_relations: usize) -> Result<Self, TaskError> {
        let params = EncoderParams::init(&config)?;
        let head = Head::Relation(RelationHead {
            weight: head_init(
                num_relations,
                config.hidden_size,
                split_seed(config.seed, 0x4EAD),
            ),
        });
        Ok(Self {
            config,
            params,
            head,
        })
    }

    pub fn for_task(config: EncoderConfig, task: Task, num_relations: usize) -> Result<Self, TaskError> {
        match task {
            Task::RelationPrediction => Self::new_relation(config, num_relations),
            _ => Self::new_triple(config),
        }
    }
}

fn head_init<T: Real>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = rng_from(seed);
    Matrix::from_fn(rows, cols, |_, _| {
        T::from_f64(truncated_normal(&mut rng, 0.02))
    })
}

impl Model<f32> {
    /// Writes encoder, head, vocabulary, and packing limits as one
    /// self-contained checkpoint.
    pub fn save(
        &self,
        vocab: &crate::textseq::Vocabulary,
        task: Task,
        packing: &PackingConfig,
        path: &std::path::Path,
    ) -> Result<(), TaskError> {
        let extra = serde_json::json!({
            "task": task.as_str(),
            "head": self.head.kind_str(),
            "max_len": packing.max_len,
            "vocab": vocab.tokens(),
        });
        crate::encoder::save_with_extra(
            &self.params,
            &self.config,
            extra,
            &[("head.weight", self.head.weight())],
            path,
        )
        .map_err(EncoderError::from)?;
        Ok(())
    }

    /// Loads a checkpoint written by [`Model::save`].
    pub fn load(
        path: &std::path::Path,
    ) -> Result<(Self, crate::textseq::Vocabulary, Task, PackingConfig), TaskError> {
        use crate::encoder::CheckpointError;
        let loaded = crate::encoder::load_full(path).map_err(EncoderError::from)?;
        let integrity = |msg: String| {
            TaskError::Encoder(EncoderError::Checkpoint(CheckpointError::Integrity(msg)))
        };
        let head_weight = loaded
            .extra_tensors
            .get("head.weight")
            .cloned()
            .ok_or_else(|| integrity("checkpoint has no head.weight tensor".into()))?;
        if head_weight.cols() != loaded.config.hidden_size {
            return Err(integrity(format!(
                "head width {} does not match hidden size {}",
                head_weight.cols(),
                loaded.config.hidden_size
            )));
        }
        let task = match loaded.extra["task"].as_str() {
            Some("triple_classification") => Task::TripleClassification,
            Some("link_prediction") => Task::LinkPrediction,
            Some("relation_prediction") => Task::RelationPrediction,
            other => return Err(integrity(format!("unknown task {other:?} in checkpoint"))),
        };
        let head = match loaded.extra["head"].as_str() {
            Some("triple") if head_weight.rows() == 2 => {
                Head::Triple(TripleHead {
                    weight: head_weight,
                })
            }
            Some("relation") => Head::Relation(RelationHead {
                weight: head_weight,
            }),
            other => {
                return Err(integrity(format!(
                    "bad head descriptor {other:?} for stored head shape"
                )))
            }
        };
        let max_len = loaded.extra["max_len"]
            .as_u64()
            .ok_or_else(|| integrity("checkpoint missing max_len".into()))?
            as usize;
        let tokens: Vec<String> = loaded.extra["vocab"]
            .as_array()
            .ok_or_else(|| integrity("checkpoint missing vocabulary".into()))?
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| integrity("non-string vocabulary entry".into()))?;
        if tokens.len() != loaded.config.vocab_size {
            return Err(integrity(format!(
                "vocabulary has {} tokens, config says {}",
                tokens.len(),
                loaded.config.vocab_size
            )));
        }
        for (i, s) in crate::textseq::SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(integrity("vocabulary specials out of order".into()));
            }
        }
        let vocab = crate::textseq::Vocabulary::from_tokens(
            tokens.into_iter().skip(crate::textseq::SPECIALS.len()),
        );
        let model = Model {
            config: loaded.config,
            params: loaded.params,
            head,
        };
        Ok((model, vocab, task, PackingConfig { max_len }))
    }
}

/// Plausibility scores for one triple sequence: two components on the
/// probability simplex, the first being the positive class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleScore<T> {
    pub positive: T,
    pub negative: T,
}

/// Relation probabilities, one entry per relation, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationScores<T>(pub Vec<T>);

/// Numerically stable softmax.
fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let mut max = logits[0];
    for &v in &logits[1..] {
        max = max.maximum(v);
    }
    let mut out: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let mut sum = T::ZERO;
    for &v in &out {
        sum += v;
    }
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

fn head_logits<T: Real>(weight: &Matrix<T>, cls: &[T]) -> Vec<T> {
    (0..weight.rows()).map(|k| dot(weight.row(k), cls)).collect()
}

fn triple_score_from_cls<T: Real>(head: &TripleHead<T>, cls: &[T]) -> TripleScore<T> {
    let probs = softmax(&head_logits(&head.weight, cls));
    TripleScore {
        positive: probs[0],
        negative: probs[1],
    }
}

/// Scores one packed triple sequence with the two-way head.
pub fn score_triple<T: Real>(
    model: &Model<T>,
    packed: &PackedSequence,
) -> Result<TripleScore<T>, TaskError> {
    Ok(score_triples(model, std::slice::from_ref(packed))?.remove(0))
}

/// Scores a batch of packed triple sequences.
pub fn score_triples<T: Real>(
    model: &Model<T>,
    batch: &[PackedSequence],
) -> Result<Vec<TripleScore<T>>, TaskError> {
    let head = match &model.head {
        Head::Triple(h) => h,
        Head::Relation(_) => {
            return Err(TaskError::HeadMismatch(
                "model carries a relation head, not a triple head".into(),
            ))
        }
    };
    for p in batch {
        if p.kind != SeqKind::Triple {
            return Err(TaskError::ModeMismatch {
                expected: SeqKind::Triple,
                found: p.kind,
            });
        }
    }
    let outputs = forward_eval(&model.params, &model.config, batch)?;
    Ok(outputs
        .iter()
        .map(|o| triple_score_from_cls(head, &o.cls))
        .collect())
}

/// Scores one packed entity-pair sequence with the relation head.
pub fn score_relations<T: Real>(
    model: &Model<T>,
    packed: &PackedSequence,
) -> Result<RelationScores<T>, TaskError> {
    let head = match &model.head {
        Head::Relation(h) => h,
        Head::Triple(_) => {
            return Err(TaskError::HeadMismatch(
                "model carries a triple head, not a relation head".into(),
            ))
        }
    };
    if packed.kind != SeqKind::Pair {
        return Err(TaskError::ModeMismatch {
            expected: SeqKind::Pair,
            found: packed.kind,
        });
    }
    let outputs = forward_eval(&model.params, &model.config, std::slice::from_ref(packed))?;
    Ok(RelationScores(softmax(&head_logits(
        &head.weight,
        &outputs[0].cls,
    ))))
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

/// Summed binary cross-entropy over the batch:
/// `-Σ [y·ln(positive) + (1-y)·ln(negative)]`, probabilities clamped to
/// `[1e-12, 1-1e-12]` before the logarithm.
pub fn triple_loss<T: Real>(
    scores: &[TripleScore<T>],
    labels: &[bool],
) -> Result<f64, TaskError> {
    if scores.len() != labels.len() {
        return Err(TaskError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut loss = 0.0;
    for (s, &y) in scores.iter().zip(labels) {
        let p = if y { s.positive } else { s.negative };
        loss -= clamp_prob(p.to_f64()).ln();
    }
    Ok(loss)
}

/// Summed cross-entropy against one-hot relation labels:
/// `-Σ ln(score[true_relation])`, clamped as in [`triple_loss`].
pub fn relation_loss<T: Real>(
    scores: &[RelationScores<T>],
    labels: &[RelationId],
) -> Result<f64, TaskError> {
    if scores.len() != labels.len() {
        return Err(TaskError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut loss = 0.0;
    for (s, &r) in scores.iter().zip(labels) {
        if r.index() >= s.0.len() {
            return Err(TaskError::BadLabel {
                label: r.0,
                num_relations: s.0.len(),
            });
        }
        loss -= clamp_prob(s.0[r.index()].to_f64()).ln();
    }
    Ok(loss)
}

/// Gradients of a summed cross-entropy batch loss with respect to every
/// encoder tensor and the head, plus the loss value itself.
pub struct BatchGradients<T> {
    pub encoder: EncoderParams<T>,
    pub head: Matrix<T>,
    pub loss: f64,
    pub examples: usize,
}

/// Forward + backward for a triple-mode batch under the summed loss.
pub fn triple_batch_gradients<T: Real>(
    model: &Model<T>,
    batch: &[PackedSequence],
    labels: &[bool],
    dropout_seed: u64,
) -> Result<BatchGradients<T>, TaskError> {
    let head = match &model.head {
        Head::Triple(h) => h,
        Head::Relation(_) => return Err(TaskError::HeadMismatch("need a triple head".into())),
    };
    if batch.len() != labels.len() {
        return Err(TaskError::LengthMismatch {
            scores: batch.len(),
            labels: labels.len(),
        });
    }
    let class_of = |y: bool| if y { 0 } else { 1 };
    batch_gradients(
        model,
        &head.weight,
        batch,
        &labels.iter().map(|&y| class_of(y)).collect::<Vec<usize>>(),
        dropout_seed,
    )
}

/// Forward + backward for a pair-mode batch under the summed loss.
pub fn relation_batch_gradients<T: Real>(
    model: &Model<T>,
    batch: &[PackedSequence],
    labels: &[RelationId],
    dropout_seed: u64,
) -> Result<BatchGradients<T>, TaskError> {
    let head = match &model.head {
        Head::Relation(h) => h,
        Head::Triple(_) => return Err(TaskError::HeadMismatch("need a relation head".into())),
    };
    if batch.len() != labels.len() {
        return Err(TaskError::LengthMismatch {
            scores: batch.len(),
            labels: labels.len(),
        });
    }
    for &r in labels {
        if r.index() >= head.weight.rows() {
            return Err(TaskError::BadLabel {
                label: r.0,
                num_relations: head.weight.rows(),
            });
        }
    }
    batch_gradients(
        model,
        &head.weight,
        batch,
        &labels.iter().map(|r| r.index()).collect::<Vec<usize>>(),
        dropout_seed,
    )
}

fn batch_gradients<T: Real>(
    model: &Model<T>,
    weight: &Matrix<T>,
    batch: &[PackedSequence],
    true_classes: &[usize],
    dropout_seed: u64,
) -> Result<BatchGradients<T>, TaskError> {
    let traced = forward_train(&model.params, &model.config, batch, dropout_seed)?;
    let k = weight.rows();
    let h = weight.cols();
    let mut head_grad = Matrix::zeros(k, h);
    let mut loss = 0.0;
    let mut examples = Vec::with_capacity(traced.len());
    for ((out, trace), &truth) in traced.into_iter().zip(true_classes) {
        let probs = softmax(&head_logits(weight, &out.cls));
        loss -= clamp_prob(probs[truth].to_f64()).ln();
        // d(loss)/d(logit_k) = p_k - 1[k == truth]
        let mut d_cls = vec![T::ZERO; h];
        for c in 0..k {
            let d_logit = if c == truth {
                probs[c] - T::ONE
            } else {
                probs[c]
            };
            let w_row = weight.row(c);
            let hg_row = head_grad.row_mut(c);
            for j in 0..h {
                d_cls[j] += d_logit * w_row[j];
                hg_row[j] += d_logit * out.cls[j];
            }
        }
        examples.push((trace, d_cls));
    }
    if !loss.is_finite() {
        return Err(TaskError::Diverged { epoch: 0, loss });
    }
    let encoder = backward_batch(&model.params, &model.config, &examples)?;
    Ok(BatchGradients {
        encoder,
        head: head_grad,
        loss,
        examples: true_classes.len(),
    })
}

/// Classification accuracy under a plausibility threshold (default rule:
/// positive iff the positive-class score exceeds 0.5).
pub fn classification_accuracy<T: Real>(
    model: &Model<T>,
    text: &TextIndex,
    packing: &PackingConfig,
    labeled: &[crate::store::LabeledTriple],
    threshold: f64,
) -> Result<f64, TaskError> {
    if labeled.is_empty() {
        return Err(TaskError::BadConfig("no labeled examples".into()));
    }
    let packed: Vec<PackedSequence> = labeled
        .iter()
        .map(|l| text.pack_triple(l.triple, packing))
        .collect::<Result<_, _>>()?;
    let scores = score_triples(model, &packed)?;
    let correct = scores
        .iter()
        .zip(labeled)
        .filter(|(s, l)| (s.positive.to_f64() > threshold) == l.label)
        .count();
    Ok(correct as f64 / labeled.len() as f64)
}

/// Adapter exposing a trained model through the shared [`Scorer`] interface.
/// Candidate sequences are packed once per query and scored in bounded
/// batches; batch size has no effect on the scores themselves.
pub struct ModelScorer<'a, T> {
    pub model: &'a Model<T>,
    pub text: &'a TextIndex,
    pub packing: PackingConfig,
    pub batch_size: usize,
}

impl<'a, T: Real> ModelScorer<'a, T> {
    pub fn new(model: &'a Model<T>, text: &'a TextIndex, packing: PackingConfig) -> Self {
        Self {
            model,
            text,
            packing,
            batch_size: 128,
        }
    }

    fn score_packed_triples(&self, packed: &[PackedSequence]) -> Result<Vec<f64>, ScorerError> {
        let mut out = Vec::with_capacity(packed.len());
        for chunk in packed.chunks(self.batch_size.max(1)) {
            let scores =
                score_triples(self.model, chunk).map_err(|e| ScorerError(e.to_string()))?;
            out.extend(scores.into_iter().map(|s| s.positive.to_f64()));
        }
        Ok(out)
    }
}

impl<T: Real> Scorer for ModelScorer<'_, T> {
    fn plausibility(&self, t: Triple) -> Result<f64, ScorerError> {
        let packed = self
            .text
            .pack_triple(t, &self.packing)
            .map_err(|e| ScorerError(e.to_string()))?;
        Ok(self.score_packed_triples(std::slice::from_ref(&packed))?[0])
    }

    fn plausibility_batch(&self, triples: &[Triple]) -> Result<Vec<f64>, ScorerError> {
        let packed: Vec<PackedSequence> = triples
            .iter()
            .map(|&t| self.text.pack_triple(t, &self.packing))
            .collect::<Result<_, _>>()
            .map_err(|e: TextSeqError| ScorerError(e.to_string()))?;
        // Forward already fans out across the batch; evaluation queries call
        // this once per candidate set.
        let chunks: Vec<&[PackedSequence]> = packed.chunks(self.batch_size.max(1)).collect();
        let scored: Vec<Result<Vec<f64>, ScorerError>> = par::map_slice(&chunks, |chunk| {
            score_triples(self.model, chunk)
                .map(|v| v.into_iter().map(|s| s.positive.to_f64()).collect())
                .map_err(|e| ScorerError(e.to_string()))
        });
        let mut out = Vec::with_capacity(packed.len());
        for s in scored {
            out.extend(s?);
        }
        Ok(out)
    }

    fn relation_scores(&self, head: EntityId, tail: EntityId) -> Option<Result<Vec<f64>, ScorerError>> {
        if !matches!(self.model.head, Head::Relation(_)) {
            return None;
        }
        let run = || -> Result<Vec<f64>, ScorerError> {
            let packed = self
                .text
                .pack_pair(head, tail, &self.packing)
                .map_err(|e| ScorerError(e.to_string()))?;
            let scores =
                score_relations(self.model, &packed).map_err(|e| ScorerError(e.to_string()))?;
            Ok(scores.0.iter().map(|v| v.to_f64()).collect())
        };
        Some(run())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textseq::{pack_pair_tokens, pack_triple_tokens, TokenId};

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            num_layers: 1,
            num_heads: 2,
            hidden_size: 8,
            ffn_size: 16,
            max_positions: 16,
            vocab_size: 10,
            dropout_rate: 0.0,
            seed: 31,
        }
    }

    fn packed_triple() -> PackedSequence {
        pack_triple_tokens(
            &[TokenId(5)],
            &[TokenId(6)],
            &[TokenId(7)],
            &PackingConfig::default(),
        )
        .unwrap()
    }

    fn packed_pair() -> PackedSequence {
        pack_pair_tokens(&[TokenId(5)], &[TokenId(7)], &PackingConfig::default()).unwrap()
    }

    #[test]
    fn task_defaults_follow_the_recipe() {
        assert_eq!(Task::TripleClassification.default_epochs(), 3);
        assert_eq!(Task::LinkPrediction.default_epochs(), 5);
        assert_eq!(Task::RelationPrediction.default_epochs(), 20);
        assert_eq!(Task::TripleClassification.default_negatives(), 1);
        assert_eq!(Task::LinkPrediction.default_negatives(), 5);
        let tc = TrainConfig::for_task(Task::LinkPrediction);
        assert_eq!(tc.batch_size, 32);
        assert_eq!(tc.learning_rate, 5e-5);
        assert_eq!(tc.warmup_fraction, 0.1);
        assert_eq!((tc.adam_beta1, tc.adam_beta2, tc.adam_epsilon), (0.9, 0.999, 1e-8));
    }

    #[test]
    fn zero_head_gives_uniform_triple_score() {
        let mut model = Model::<f64>::new_triple(cfg()).unwrap();
        model.head.weight_mut().scale(0.0);
        let s = score_triple(&model, &packed_triple()).unwrap();
        assert_eq!(s.positive, 0.5);
        assert_eq!(s.negative, 0.5);
    }

    #[test]
    fn triple_scores_live_on_the_simplex() {
        let model = Model::<f64>::new_triple(cfg()).unwrap();
        let s = score_triple(&model, &packed_triple()).unwrap();
        assert!((s.positive + s.negative - 1.0).abs() < 1e-9);
        assert!(s.positive >= 0.0 && s.positive <= 1.0);
    }

    #[test]
    fn mode_errors_are_reported() {
        let model = Model::<f64>::new_triple(cfg()).unwrap();
        assert!(matches!(
            score_triples(&model, &[packed_pair()]),
            Err(TaskError::ModeMismatch { .. })
        ));
        let rel_model = Model::<f64>::new_relation(cfg(), 4).unwrap();
        assert!(matches!(
            score_relations(&rel_model, &packed_triple()),
            Err(TaskError::ModeMismatch { .. })
        ));
        assert!(matches!(
            score_relations(&model, &packed_pair()),
            Err(TaskError::HeadMismatch(_))
        ));
    }

    #[test]
    fn zero_relation_head_is_uniform_over_46() {
        let mut model = Model::<f64>::new_relation(cfg(), 46).unwrap();
        model.head.weight_mut().scale(0.0);
        let s = score_relations(&model, &packed_pair()).unwrap();
        assert_eq!(s.0.len(), 46);
        for &p in &s.0 {
            assert!((p - 1.0 / 46.0).abs() < 1e-15);
        }
    }

    #[test]
    fn relation_scores_shift_invariant_argmax() {
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let model = Model::<f64>::new_relation(cfg(), 7).unwrap();
        let base = score_relations(&model, &packed_pair()).unwrap();

        // Adding the same vector to every head row shifts every logit by the
        // same constant, which must leave the distribution unchanged.
        let mut shifted = model.clone();
        let h = shifted.config.hidden_size;
        let delta: Vec<f64> = (0..h).map(|j| 0.3 + 0.05 * j as f64).collect();
        for r in 0..7 {
            for j in 0..h {
                let v = shifted.head.weight().get(r, j) + delta[j];
                shifted.head.weight_mut().set(r, j, v);
            }
        }
        let moved = score_relations(&shifted, &packed_pair()).unwrap();
        assert_eq!(argmax(&base.0), argmax(&moved.0));
        for (a, b) in base.0.iter().zip(&moved.0) {
            assert!((a - b).abs() < 1e-9, "softmax must be shift invariant");
        }
        let sum: f64 = moved.0.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn triple_loss_anchors() {
        let uniform = TripleScore {
            positive: 0.5,
            negative: 0.5,
        };
        let loss = triple_loss(&[uniform], &[true]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);

        let perfect = TripleScore {
            positive: 1.0,
            negative: 0.0,
        };
        let loss = triple_loss(&[perfect], &[true]).unwrap();
        assert!(loss >= 0.0 && loss <= 1e-11);

        let two = triple_loss(&[uniform, uniform], &[true, false]).unwrap();
        assert!((two - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);

        assert!(matches!(
            triple_loss(&[uniform], &[true, false]),
            Err(TaskError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn relation_loss_anchors() {
        let r = 46;
        let uniform = RelationScores(vec![1.0 / r as f64; r]);
        let loss = relation_loss(&[uniform.clone()], &[RelationId(3)]).unwrap();
        assert!((loss - (r as f64).ln()).abs() < 1e-12);

        let mut onehot = vec![0.0; r];
        onehot[3] = 1.0;
        let loss = relation_loss(&[RelationScores(onehot)], &[RelationId(3)]).unwrap();
        assert!(loss >= 0.0 && loss <= 1e-11);

        // Batch loss is the sum of per-example losses.
        let a = RelationScores(vec![0.25, 0.25, 0.25, 0.25]);
        let one = relation_loss(&[a.clone()], &[RelationId(0)]).unwrap();
        let two = relation_loss(&[a.clone(), a.clone()], &[RelationId(0), RelationId(2)]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);

        assert!(matches!(
            relation_loss(&[a], &[RelationId(9)]),
            Err(TaskError::BadLabel { .. })
        ));
    }

    #[test]
    fn scorer_batch_size_does_not_change_scores() {
        use crate::store::{KnowledgeGraph, TextEntry};
        let entities: Vec<TextEntry> = (0..6)
            .map(|i| TextEntry {
                raw_id: format!("e{i}"),
                text: format!("e{i}"),
            })
            .collect();
        let relations = vec![TextEntry {
            raw_id: "r0".into(),
            text: "r0".into(),
        }];
        let kg = KnowledgeGraph::from_parts(
            entities,
            relations,
            vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)],
            vec![Triple::new(2, 0, 3)],
            vec![Triple::new(3, 0, 4)],
        )
        .unwrap();
        let vocab = crate::textseq::build_vocab(&kg, 128).unwrap();
        let text = TextIndex::build(&kg, &vocab);
        let c = EncoderConfig {
            vocab_size: vocab.len(),
            ..cfg()
        };
        let model = Model::<f32>::new_triple(c).unwrap();
        let triples: Vec<Triple> = (0..6).map(|i| Triple::new(i, 0, (i + 1) % 6)).collect();

        let mut s1 = ModelScorer::new(&model, &text, PackingConfig::default());
        s1.batch_size = 1;
        let mut s64 = ModelScorer::new(&model, &text, PackingConfig::default());
        s64.batch_size = 64;
        assert_eq!(
            s1.plausibility_batch(&triples).unwrap(),
            s64.plausibility_batch(&triples).unwrap()
        );
    }
}
