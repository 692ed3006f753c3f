//! The fine-tuning loop.
//!
//! Each epoch regenerates negatives from an epoch-derived seed, shuffles,
//! and walks mini-batches with Adam under a linear warmup/decay schedule.
//! The optimizer steps on the batch-mean gradient of the summed
//! cross-entropy; per-example gradient work fans out over workers in fixed
//! chunks so results do not depend on thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{rng_from, split_seed};
use crate::store::{KnowledgeGraph, NegativeSamplingConfig, RelationId, Split};
use crate::tensor::Real;
use crate::textseq::{PackedSequence, PackingConfig, TextIndex};

use super::{
    relation_batch_gradients, scheduled_lr, triple_batch_gradients, Adam, BatchGradients, Head,
    Model, Task, TaskError,
};

/// Fine-tuning hyperparameters. Defaults follow the reference recipe:
/// batch 32, learning rate 5e-5, warmup over the first tenth of training.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub warmup_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            batch_size: 32,
            learning_rate: 5e-5,
            epochs: task.default_epochs(),
            negatives_per_positive: task.default_negatives(),
            warmup_fraction: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 42,
        }
    }

    pub fn validate(&self, task: Task) -> Result<(), TaskError> {
        if self.batch_size == 0 {
            return Err(TaskError::BadConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TaskError::BadConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..=0.5).contains(&self.warmup_fraction) {
            return Err(TaskError::BadConfig(
                "warmup_fraction must be in [0, 0.5]".into(),
            ));
        }
        if task != Task::RelationPrediction && self.negatives_per_positive == 0 {
            return Err(TaskError::BadConfig(
                "triple-mode tasks need at least one negative per positive".into(),
            ));
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < 1.0)
            || !(0.0 < self.adam_beta2 && self.adam_beta2 < 1.0)
            || !(self.adam_epsilon > 0.0)
        {
            return Err(TaskError::BadConfig("bad adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: u128,
}

enum EpochExamples {
    /// Triple sequences with binary labels.
    Labeled(Vec<(crate::store::Triple, bool)>),
    /// Positive pairs with relation labels.
    Positives(Vec<crate::store::Triple>),
}

/// Fine-tunes `model` in place and returns the per-epoch loss log.
///
/// Triple-mode tasks pair every positive with freshly sampled one-slot
/// corruptions each epoch (`seed_epoch` derives from config seed and epoch);
/// relation prediction trains on the observed positives alone.
pub fn train<T: Real>(
    model: &mut Model<T>,
    kg: &KnowledgeGraph,
    text: &TextIndex,
    task: Task,
    packing: &PackingConfig,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>, TaskError> {
    cfg.validate(task)?;
    check_head(model, kg, task)?;
    let train_split = kg.split(Split::Train);
    if train_split.is_empty() {
        return Err(TaskError::EmptyTrainingSet);
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }

    let per_epoch_examples = match task {
        Task::RelationPrediction => train_split.len(),
        _ => train_split.len() * (1 + cfg.negatives_per_positive),
    };
    let batches_per_epoch = per_epoch_examples.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;

    let mut adam = {
        let mut sizes: Vec<usize> = model
            .params
            .tensor_slices()
            .iter()
            .map(|s| s.len())
            .collect();
        sizes.push(model.head.weight().data().len());
        Adam::<T>::new(&sizes, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
    };

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut global_step = 0usize;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_seed = split_seed(cfg.seed, 0x0E0C_0000 + epoch as u64);
        let examples = build_epoch_examples(kg, task, cfg, epoch_seed)?;
        let mut loss_sum = 0.0;
        let mut example_count = 0usize;

        match examples {
            EpochExamples::Labeled(list) => {
                for chunk in list.chunks(cfg.batch_size) {
                    let mut batch: Vec<PackedSequence> = Vec::with_capacity(chunk.len());
                    let mut labels: Vec<bool> = Vec::with_capacity(chunk.len());
                    for (t, y) in chunk {
                        batch.push(text.pack_triple(*t, packing)?);
                        labels.push(*y);
                    }
                    let grads = triple_batch_gradients(
                        model,
                        &batch,
                        &labels,
                        split_seed(epoch_seed, 1 + global_step as u64),
                    )?;
                    loss_sum += grads.loss;
                    example_count += grads.examples;
                    apply_step(model, &mut adam, grads, cfg, global_step, total_steps, epoch)?;
                    global_step += 1;
                }
            }
            EpochExamples::Positives(list) => {
                for chunk in list.chunks(cfg.batch_size) {
                    let mut batch: Vec<PackedSequence> = Vec::with_capacity(chunk.len());
                    let mut labels: Vec<RelationId> = Vec::with_capacity(chunk.len());
                    for t in chunk {
                        batch.push(text.pack_pair(t.head, t.tail, packing)?);
                        labels.push(t.relation);
                    }
                    let grads = relation_batch_gradients(
                        model,
                        &batch,
                        &labels,
                        split_seed(epoch_seed, 1 + global_step as u64),
                    )?;
                    loss_sum += grads.loss;
                    example_count += grads.examples;
                    apply_step(model, &mut adam, grads, cfg, global_step, total_steps, epoch)?;
                    global_step += 1;
                }
            }
        }

        log.push(EpochStats {
            epoch,
            mean_loss: loss_sum / example_count.max(1) as f64,
            wall_ms: started.elapsed().as_millis(),
        });
    }
    Ok(log)
}

fn check_head<T: Real>(
    model: &Model<T>,
    kg: &KnowledgeGraph,
    task: Task,
) -> Result<(), TaskError> {
    match (&model.head, task) {
        (Head::Triple(_), Task::RelationPrediction) => Err(TaskError::HeadMismatch(
            "relation prediction needs a relation head".into(),
        )),
        (Head::Relation(h), Task::RelationPrediction) => {
            if h.weight.rows() != kg.num_relations() {
                Err(TaskError::HeadMismatch(format!(
                    "relation head has {} rows, dataset has {} relations",
                    h.weight.rows(),
                    kg.num_relations()
                )))
            } else {
                Ok(())
            }
        }
        (Head::Relation(_), _) => Err(TaskError::HeadMismatch(
            "triple-mode tasks need a triple head".into(),
        )),
        (Head::Triple(_), _) => Ok(()),
    }
}

fn build_epoch_examples(
    kg: &KnowledgeGraph,
    task: Task,
    cfg: &TrainConfig,
    epoch_seed: u64,
) -> Result<EpochExamples, TaskError> {
    let train_split = kg.split(Split::Train);
    match task {
        Task::RelationPrediction => {
            let mut list: Vec<crate::store::Triple> = train_split.to_vec();
            list.shuffle(&mut rng_from(split_seed(epoch_seed, 0)));
            Ok(EpochExamples::Positives(list))
        }
        _ => {
            let mut list: Vec<(crate::store::Triple, bool)> =
                Vec::with_capacity(train_split.len() * (1 + cfg.negatives_per_positive));
            for (i, &pos) in train_split.iter().enumerate() {
                list.push((pos, true));
                let neg_cfg = NegativeSamplingConfig {
                    negatives_per_positive: cfg.negatives_per_positive,
                    corruption: crate::store::Corruption::HeadOrTailUniform,
                    seed: split_seed(epoch_seed, 0x5A00_0000 + i as u64),
                    max_rejection_attempts: 32 * cfg.negatives_per_positive.max(1),
                };
                for neg in kg.sample_negatives(pos, &neg_cfg)?.negatives {
                    list.push((neg.triple, false));
                }
            }
            list.shuffle(&mut rng_from(split_seed(epoch_seed, 0)));
            Ok(EpochExamples::Labeled(list))
        }
    }
}

fn apply_step<T: Real>(
    model: &mut Model<T>,
    adam: &mut Adam<T>,
    grads: BatchGradients<T>,
    cfg: &TrainConfig,
    global_step: usize,
    total_steps: usize,
    epoch: usize,
) -> Result<(), TaskError> {
    if !grads.loss.is_finite() {
        return Err(TaskError::Diverged {
            epoch,
            loss: grads.loss,
        });
    }
    let scale = T::from_f64(1.0 / grads.examples.max(1) as f64);
    let mut encoder_grads = grads.encoder;
    for s in encoder_grads.tensor_slices_mut() {
        for v in s {
            *v *= scale;
        }
    }
    let mut head_grad = grads.head;
    head_grad.scale(scale);

    let lr = scheduled_lr(
        cfg.learning_rate,
        global_step,
        total_steps,
        cfg.warmup_fraction,
    );
    let mut param_slices = model.params.tensor_slices_mut();
    param_slices.push(model.head.weight_mut().data_mut());
    let mut grad_slices = encoder_grads.tensor_slices();
    grad_slices.push(head_grad.data());
    adam.step(&mut param_slices, &grad_slices, lr);
    Ok(())
}
