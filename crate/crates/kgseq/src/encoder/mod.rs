//! Bidirectional transformer encoder with exact analytic gradients.
//!
//! Post-layer-norm residual arrangement; input embeddings are the sum of
//! token, segment, and position embeddings. Padding keys are masked out of
//! attention with an additive -1e9 before softmax, which underflows to an
//! exact zero probability. Dropout (applied to embeddings, attention
//! probabilities, and feed-forward outputs) records its masks in the forward
//! trace so the backward pass is exact.

mod backward;
mod checkpoint;
mod forward;

pub use backward::{backward, backward_batch};
pub use checkpoint::{
    load_checkpoint, load_full, load_named_tensors, save_checkpoint, save_named_tensors,
    save_with_extra, CheckpointError, LoadedCheckpoint, Manifest, RawManifest, TensorRecord,
    CHECKPOINT_VERSION,
};
pub use forward::{forward_eval, forward_train, LayerTrace, LnTrace, Trace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from, truncated_normal};
use crate::tensor::{Matrix, Real};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_size: usize,
    pub ffn_size: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.num_layers == 0 {
            return Err(EncoderError::Config("num_layers must be >= 1".into()));
        }
        if self.num_heads == 0 {
            return Err(EncoderError::Config("num_heads must be >= 1".into()));
        }
        if self.hidden_size == 0 || self.hidden_size % self.num_heads != 0 {
            return Err(EncoderError::Config(format!(
                "hidden_size {} must be a positive multiple of num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        if self.ffn_size == 0 {
            return Err(EncoderError::Config("ffn_size must be >= 1".into()));
        }
        if self.max_positions == 0 || self.max_positions > 512 {
            return Err(EncoderError::Config(format!(
                "max_positions {} must be in 1..=512",
                self.max_positions
            )));
        }
        if self.vocab_size < 5 {
            return Err(EncoderError::Config(
                "vocab_size must cover the special tokens".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(EncoderError::Config(format!(
                "dropout_rate {} must be in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }
}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("sequence length {len} exceeds max_positions {max}")]
    InputTooLong { len: usize, max: usize },
    #[error("token id {id} out of range for vocab_size {vocab}")]
    BadTokenId { id: u32, vocab: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("trace does not match parameters: {0}")]
    TraceMismatch(String),
    #[error("layer {layer} out of range (model has {layers} layers)")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// One encoder layer's trainable tensors. Projections are stored input-major
/// (`y = x W + b`).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Matrix<T>,
    pub bq: Vec<T>,
    pub wk: Matrix<T>,
    pub bk: Vec<T>,
    pub wv: Matrix<T>,
    pub bv: Vec<T>,
    pub wo: Matrix<T>,
    pub bo: Vec<T>,
    pub ln1_scale: Vec<T>,
    pub ln1_offset: Vec<T>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
    pub ln2_scale: Vec<T>,
    pub ln2_offset: Vec<T>,
}

/// All trainable tensors of the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub token_embed: Matrix<T>,
    pub segment_embed: Matrix<T>,
    pub position_embed: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
}

/// Canonical tensor names and shapes, in checkpoint order.
pub fn tensor_specs(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    let h = cfg.hidden_size;
    let f = cfg.ffn_size;
    let mut specs = vec![
        ("token_embed".to_string(), vec![cfg.vocab_size, h]),
        ("segment_embed".to_string(), vec![2, h]),
        ("position_embed".to_string(), vec![cfg.max_positions, h]),
    ];
    for l in 0..cfg.num_layers {
        for (name, shape) in [
            ("attn.wq", vec![h, h]),
            ("attn.bq", vec![h]),
            ("attn.wk", vec![h, h]),
            ("attn.bk", vec![h]),
            ("attn.wv", vec![h, h]),
            ("attn.bv", vec![h]),
            ("attn.wo", vec![h, h]),
            ("attn.bo", vec![h]),
            ("ln1.scale", vec![h]),
            ("ln1.offset", vec![h]),
            ("ffn.w1", vec![h, f]),
            ("ffn.b1", vec![f]),
            ("ffn.w2", vec![f, h]),
            ("ffn.b2", vec![h]),
            ("ln2.scale", vec![h]),
            ("ln2.offset", vec![h]),
        ] {
            specs.push((format!("layer.{l}.{name}"), shape));
        }
    }
    specs
}

impl<T: Real> EncoderParams<T> {
    /// Truncated-normal weights (std 0.02, clipped at two standard
    /// deviations), zero biases, identity layer norms. Deterministic in
    /// `cfg.seed`.
    pub fn init(cfg: &EncoderConfig) -> Result<Self, EncoderError> {
        cfg.validate()?;
        let mut rng = rng_from(cfg.seed);
        let mut normal =
            |rows: usize, cols: usize| -> Matrix<T> {
                Matrix::from_fn(rows, cols, |_, _| {
                    T::from_f64(truncated_normal(&mut rng, 0.02))
                })
            };
        let h = cfg.hidden_size;
        let f = cfg.ffn_size;
        let token_embed = normal(cfg.vocab_size, h);
        let segment_embed = normal(2, h);
        let position_embed = normal(cfg.max_positions, h);
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for _ in 0..cfg.num_layers {
            layers.push(LayerParams {
                wq: normal(h, h),
                bq: vec![T::ZERO; h],
                wk: normal(h, h),
                bk: vec![T::ZERO; h],
                wv: normal(h, h),
                bv: vec![T::ZERO; h],
                wo: normal(h, h),
                bo: vec![T::ZERO; h],
                ln1_scale: vec![T::ONE; h],
                ln1_offset: vec![T::ZERO; h],
                w1: normal(h, f),
                b1: vec![T::ZERO; f],
                w2: normal(f, h),
                b2: vec![T::ZERO; h],
                ln2_scale: vec![T::ONE; h],
                ln2_offset: vec![T::ZERO; h],
            });
        }
        Ok(Self {
            token_embed,
            segment_embed,
            position_embed,
            layers,
        })
    }

    /// Same shapes as `self`, all zeros. Gradient accumulators reuse the
    /// parameter structure.
    pub fn zeros_like(&self) -> Self {
        let zm = |m: &Matrix<T>| Matrix::zeros(m.rows(), m.cols());
        let zv = |v: &Vec<T>| vec![T::ZERO; v.len()];
        Self {
            token_embed: zm(&self.token_embed),
            segment_embed: zm(&self.segment_embed),
            position_embed: zm(&self.position_embed),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: zm(&l.wq),
                    bq: zv(&l.bq),
                    wk: zm(&l.wk),
                    bk: zv(&l.bk),
                    wv: zm(&l.wv),
                    bv: zv(&l.bv),
                    wo: zm(&l.wo),
                    bo: zv(&l.bo),
                    ln1_scale: zv(&l.ln1_scale),
                    ln1_offset: zv(&l.ln1_offset),
                    w1: zm(&l.w1),
                    b1: zv(&l.b1),
                    w2: zm(&l.w2),
                    b2: zv(&l.b2),
                    ln2_scale: zv(&l.ln2_scale),
                    ln2_offset: zv(&l.ln2_offset),
                })
                .collect(),
        }
    }

    /// Flat views of every tensor, in canonical checkpoint order.
    pub fn tensor_slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![
            self.token_embed.data(),
            self.segment_embed.data(),
            self.position_embed.data(),
        ];
        for l in &self.layers {
            out.extend([
                l.wq.data(),
                &l.bq[..],
                l.wk.data(),
                &l.bk[..],
                l.wv.data(),
                &l.bv[..],
                l.wo.data(),
                &l.bo[..],
                &l.ln1_scale[..],
                &l.ln1_offset[..],
                l.w1.data(),
                &l.b1[..],
                l.w2.data(),
                &l.b2[..],
                &l.ln2_scale[..],
                &l.ln2_offset[..],
            ]);
        }
        out
    }

    /// Mutable flat views, same order as [`Self::tensor_slices`].
    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![
            self.token_embed.data_mut(),
            self.segment_embed.data_mut(),
            self.position_embed.data_mut(),
        ];
        for l in &mut self.layers {
            out.extend([
                l.wq.data_mut(),
                &mut l.bq[..],
                l.wk.data_mut(),
                &mut l.bk[..],
                l.wv.data_mut(),
                &mut l.bv[..],
                l.wo.data_mut(),
                &mut l.bo[..],
                &mut l.ln1_scale[..],
                &mut l.ln1_offset[..],
                l.w1.data_mut(),
                &mut l.b1[..],
                l.w2.data_mut(),
                &mut l.b2[..],
                &mut l.ln2_scale[..],
                &mut l.ln2_offset[..],
            ]);
        }
        out
    }

    /// Adds `other` into `self`, tensor by tensor.
    pub fn accumulate(&mut self, other: &Self) {
        let mut mine = self.tensor_slices_mut();
        let theirs = other.tensor_slices();
        assert_eq!(mine.len(), theirs.len(), "parameter layout mismatch");
        for (a, b) in mine.iter_mut().zip(theirs) {
            assert_eq!(a.len(), b.len(), "tensor shape mismatch");
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.tensor_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        let cm = |m: &Matrix<T>| m.cast::<U>();
        let cv = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.to_f64())).collect::<Vec<U>>();
        EncoderParams {
            token_embed: cm(&self.token_embed),
            segment_embed: cm(&self.segment_embed),
            position_embed: cm(&self.position_embed),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: cm(&l.wq),
                    bq: cv(&l.bq),
                    wk: cm(&l.wk),
                    bk: cv(&l.bk),
                    wv: cm(&l.wv),
                    bv: cv(&l.bv),
                    wo: cm(&l.wo),
                    bo: cv(&l.bo),
                    ln1_scale: cv(&l.ln1_scale),
                    ln1_offset: cv(&l.ln1_offset),
                    w1: cm(&l.w1),
                    b1: cv(&l.b1),
                    w2: cm(&l.w2),
                    b2: cv(&l.b2),
                    ln2_scale: cv(&l.ln2_scale),
                    ln2_offset: cv(&l.ln2_offset),
                })
                .collect(),
        }
    }
}

/// Final hidden states and attention maps for one input sequence.
#[derive(Clone, Debug)]
pub struct EncoderOutput<T> {
    /// Final hidden vector of the leading classification token.
    pub cls: Vec<T>,
    /// Final hidden vectors of all positions (seq_len × hidden).
    pub tokens: Matrix<T>,
    /// `attention[layer][head]` is the (seq_len × seq_len) post-softmax map.
    pub attention: Vec<Vec<Matrix<T>>>,
    /// Number of non-padding positions.
    pub real_len: usize,
}

impl<T: Real> EncoderOutput<T> {
    /// Per-head attention rows from the classification token at `layer`,
    /// restricted to unmasked positions.
    pub fn cls_attention(&self, layer: usize) -> Result<Vec<Vec<T>>, EncoderError> {
        if layer >= self.attention.len() {
            return Err(EncoderError::LayerOutOfRange {
                layer,
                layers: self.attention.len(),
            });
        }
        Ok(self.attention[layer]
            .iter()
            .map(|m| m.row(0)[..self.real_len].to_vec())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            num_layers: 2,
            num_heads: 2,
            hidden_size: 8,
            ffn_size: 16,
            max_positions: 16,
            vocab_size: 12,
            dropout_rate: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = tiny_cfg();
        let a = EncoderParams::<f32>::init(&cfg).unwrap();
        let b = EncoderParams::<f32>::init(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_layer_norms_are_identity() {
        let p = EncoderParams::<f32>::init(&tiny_cfg()).unwrap();
        for l in &p.layers {
            assert!(l.ln1_scale.iter().all(|&v| v == 1.0));
            assert!(l.ln1_offset.iter().all(|&v| v == 0.0));
            assert!(l.ln2_scale.iter().all(|&v| v == 1.0));
            assert!(l.ln2_offset.iter().all(|&v| v == 0.0));
            assert!(l.bq.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn config_rejects_indivisible_heads() {
        let cfg = EncoderConfig {
            hidden_size: 6,
            num_heads: 4,
            ..tiny_cfg()
        };
        assert!(matches!(
            EncoderParams::<f32>::init(&cfg),
            Err(EncoderError::Config(_))
        ));
    }

    #[test]
    fn init_weights_respect_truncation() {
        let cfg = tiny_cfg();
        let p = EncoderParams::<f64>::init(&cfg).unwrap();
        // Weight tensors stay within two standard deviations; layer-norm
        // scales sit at exactly one and are exempt.
        for ((name, _), s) in tensor_specs(&cfg).iter().zip(p.tensor_slices()) {
            if name.contains("ln") {
                continue;
            }
            for &v in s {
                assert!(v.abs() <= 0.04 + 1e-12, "{name} has {v}");
            }
        }
    }

    #[test]
    fn tensor_specs_align_with_slices() {
        let cfg = tiny_cfg();
        let p = EncoderParams::<f32>::init(&cfg).unwrap();
        let specs = tensor_specs(&cfg);
        let slices = p.tensor_slices();
        assert_eq!(specs.len(), slices.len());
        for ((_, shape), slice) in specs.iter().zip(&slices) {
            assert_eq!(shape.iter().product::<usize>(), slice.len());
        }
    }
}
