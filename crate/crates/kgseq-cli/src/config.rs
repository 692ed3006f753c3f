//! Run configuration: flat JSON file with documented defaults, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use kgseq::encoder::EncoderConfig;
use kgseq::store::TextSource;
use kgseq::tasks::{Task, TrainConfig};
use kgseq::textseq::PackingConfig;

/// Every knob of a training run. Serializes losslessly; unknown keys are
/// rejected so config typos fail fast.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory (train/dev/test TSVs plus text maps).
    pub dataset: Option<PathBuf>,
    /// One of triple_classification, link_prediction, relation_prediction.
    pub task: Task,
    /// names (entity2text.txt) or descriptions (entity2textlong.txt).
    pub text_source: TextSource,
    pub seed: u64,
    /// Subword vocabulary budget when learning from the dataset.
    pub vocab_size: usize,
    /// Packed sequence length cap.
    pub max_len: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_size: usize,
    pub ffn_size: usize,
    pub max_positions: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Defaults to the task's epoch count (3 / 5 / 20) when absent.
    pub epochs: Option<usize>,
    /// Defaults to the task's negative count (1 / 5 / none) when absent.
    pub negatives: Option<usize>,
    pub warmup_fraction: f64,
    /// Uniform subsample of the training split in (0, 1].
    pub train_proportion: f64,
    /// Worker threads; 0 picks the library default.
    pub workers: usize,
    /// Scoring batch size during evaluation.
    pub eval_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            task: Task::TripleClassification,
            text_source: TextSource::Names,
            seed: 42,
            vocab_size: 2000,
            max_len: 32,
            num_layers: 2,
            num_heads: 4,
            hidden_size: 128,
            ffn_size: 512,
            max_positions: 64,
            dropout: 0.1,
            batch_size: 32,
            learning_rate: 5e-5,
            epochs: None,
            negatives: None,
            warmup_fraction: 0.1,
            train_proportion: 1.0,
            workers: 0,
            eval_batch: 128,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&content).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            hidden_size: self.hidden_size,
            ffn_size: self.ffn_size,
            max_positions: self.max_positions,
            vocab_size,
            dropout_rate: self.dropout,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut tc = TrainConfig::for_task(self.task);
        tc.batch_size = self.batch_size;
        tc.learning_rate = self.learning_rate;
        if let Some(e) = self.epochs {
            tc.epochs = e;
        }
        if let Some(n) = self.negatives {
            tc.negatives_per_positive = n;
        }
        tc.warmup_fraction = self.warmup_fraction;
        tc.seed = self.seed;
        tc
    }

    pub fn packing(&self) -> Result<PackingConfig> {
        Ok(PackingConfig::new(self.max_len)?)
    }
}
