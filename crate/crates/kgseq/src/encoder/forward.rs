//! Forward pass, with a recorded trace in training mode.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::par;
use crate::rng::{rng_from, split_seed};
use crate::tensor::{Matrix, Real};
use crate::textseq::PackedSequence;

use super::{EncoderConfig, EncoderError, EncoderOutput, EncoderParams};

/// Additive constant applied to masked attention logits. Large enough that
/// the subsequent exp underflows to an exact zero probability.
pub const MASK_LOGIT: f64 = -1e9;

/// Layer-norm variance epsilon.
pub const LN_EPS: f64 = 1e-12;

const GELU_COEFF: f64 = 0.044715;

/// tanh-form gaussian error linear unit.
#[inline]
pub(crate) fn gelu<T: Real>(x: T) -> T {
    let s = T::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let c = T::from_f64(GELU_COEFF);
    let half = T::from_f64(0.5);
    let u = s * (x + c * x * x * x);
    half * x * (T::ONE + u.tanh())
}

#[inline]
pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let s = T::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let c = T::from_f64(GELU_COEFF);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let u = s * (x + c * x * x * x);
    let t = u.tanh();
    let sech2 = T::ONE - t * t;
    half * (T::ONE + t) + half * x * sech2 * s * (T::ONE + three * c * x * x)
}

/// Per-row layer norm internals needed by the backward pass.
#[derive(Clone, Debug)]
pub struct LnTrace<T> {
    /// Normalized values before scale/offset.
    pub xhat: Matrix<T>,
    pub inv_std: Vec<T>,
}

/// Everything the backward pass needs for one layer.
#[derive(Clone, Debug)]
pub struct LayerTrace<T> {
    pub input: Matrix<T>,
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
    /// Post-softmax attention probabilities per head (before dropout).
    pub probs: Vec<Matrix<T>>,
    /// Inverted-dropout multipliers on attention probabilities, if active.
    pub attn_drop: Option<Vec<Matrix<T>>>,
    pub ctx: Matrix<T>,
    pub ln1: LnTrace<T>,
    pub x1: Matrix<T>,
    /// Feed-forward pre-activation.
    pub u: Matrix<T>,
    pub g: Matrix<T>,
    /// Inverted-dropout multiplier on the feed-forward output, if active.
    pub ffn_drop: Option<Matrix<T>>,
    pub ln2: LnTrace<T>,
    pub x2: Matrix<T>,
}

/// Recorded forward pass for one example.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub token_ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    pub mask: Vec<u8>,
    pub emb_drop: Option<Matrix<T>>,
    pub layers: Vec<LayerTrace<T>>,
}

impl<T> Trace<T> {
    pub fn seq_len(&self) -> usize {
        self.token_ids.len()
    }
}

fn check_input(cfg: &EncoderConfig, packed: &PackedSequence) -> Result<(), EncoderError> {
    if packed.len() > cfg.max_positions {
        return Err(EncoderError::InputTooLong {
            len: packed.len(),
            max: cfg.max_positions,
        });
    }
    for t in &packed.token_ids {
        if t.index() >= cfg.vocab_size {
            return Err(EncoderError::BadTokenId {
                id: t.0,
                vocab: cfg.vocab_size,
            });
        }
    }
    Ok(())
}

fn embed<T: Real>(
    params: &EncoderParams<T>,
    packed: &PackedSequence,
) -> Matrix<T> {
    let h = params.token_embed.cols();
    let s = packed.len();
    let mut x = Matrix::zeros(s, h);
    for i in 0..s {
        let tok = params.token_embed.row(packed.token_ids[i].index());
        let seg = params.segment_embed.row(packed.segment_ids[i] as usize);
        let pos = params.position_embed.row(packed.position_ids[i] as usize);
        let row = x.row_mut(i);
        for j in 0..h {
            row[j] = tok[j] + seg[j] + pos[j];
        }
    }
    x
}

/// Row-wise softmax with additive masking of padded keys. Masked columns end
/// up exactly zero (the shifted exponent underflows).
fn masked_softmax_rows<T: Real>(scores: &mut Matrix<T>, mask: &[u8]) {
    let cols = scores.cols();
    let neg = T::from_f64(MASK_LOGIT);
    for i in 0..scores.rows() {
        let row = scores.row_mut(i);
        for j in 0..cols {
            if mask[j] == 0 {
                row[j] += neg;
            }
        }
        let mut max = row[0];
        for &v in row.iter().skip(1) {
            max = max.maximum(v);
        }
        let mut sum = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

fn layer_norm<T: Real>(x: &Matrix<T>, scale: &[T], offset: &[T]) -> (Matrix<T>, LnTrace<T>) {
    let (s, h) = (x.rows(), x.cols());
    let hf = T::from_f64(h as f64);
    let eps = T::from_f64(LN_EPS);
    let mut xhat = Matrix::zeros(s, h);
    let mut inv_std = Vec::with_capacity(s);
    let mut out = Matrix::zeros(s, h);
    for i in 0..s {
        let row = x.row(i);
        let mut mean = T::ZERO;
        for &v in row {
            mean += v;
        }
        mean = mean / hf;
        let mut var = T::ZERO;
        for &v in row {
            let d = v - mean;
            var += d * d;
        }
        var = var / hf;
        let istd = T::ONE / (var + eps).sqrt();
        inv_std.push(istd);
        let xh = xhat.row_mut(i);
        let o = out.row_mut(i);
        for j in 0..h {
            let n = (row[j] - mean) * istd;
            xh[j] = n;
            o[j] = scale[j] * n + offset[j];
        }
    }
    (out, LnTrace { xhat, inv_std })
}

fn dropout_mask<T: Real>(rng: &mut ChaCha12Rng, rows: usize, cols: usize, rate: f64) -> Matrix<T> {
    let keep = 1.0 - rate;
    let scale = T::from_f64(1.0 / keep);
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < keep {
            scale
        } else {
            T::ZERO
        }
    })
}

struct DropoutState {
    rng: ChaCha12Rng,
    rate: f64,
}

fn forward_one<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    packed: &PackedSequence,
    mut dropout: Option<DropoutState>,
) -> Result<(EncoderOutput<T>, Option<Trace<T>>), EncoderError> {
    check_input(cfg, packed)?;
    let s = packed.len();
    let h = cfg.hidden_size;
    let heads = cfg.num_heads;
    let d = cfg.head_dim();
    let scale = T::from_f64(1.0 / (d as f64).sqrt());
    let record = dropout.is_some();

    let mut x = embed(params, packed);
    let emb_drop = match dropout.as_mut() {
        Some(ds) if ds.rate > 0.0 => {
            let m = dropout_mask::<T>(&mut ds.rng, s, h, ds.rate);
            x.hadamard_assign(&m);
            Some(m)
        }
        _ => None,
    };

    let mut attention: Vec<Vec<Matrix<T>>> = Vec::with_capacity(cfg.num_layers);
    let mut layer_traces: Vec<LayerTrace<T>> = Vec::with_capacity(if record {
        cfg.num_layers
    } else {
        0
    });

    for layer in &params.layers {
        let input = x;
        let mut q = input.matmul(&layer.wq);
        q.add_row_bias(&layer.bq);
        let mut k = input.matmul(&layer.wk);
        k.add_row_bias(&layer.bk);
        let mut v = input.matmul(&layer.wv);
        v.add_row_bias(&layer.bv);

        let mut probs: Vec<Matrix<T>> = Vec::with_capacity(heads);
        let mut drops: Vec<Matrix<T>> = Vec::new();
        let mut ctx = Matrix::zeros(s, h);
        for a in 0..heads {
            let lo = a * d;
            let hi = lo + d;
            let qa = q.column_block(lo, hi);
            let ka = k.column_block(lo, hi);
            let va = v.column_block(lo, hi);
            let mut sc = qa.matmul_bt(&ka);
            sc.scale(scale);
            masked_softmax_rows(&mut sc, &packed.attention_mask);
            let p = sc;
            let ctx_a = match dropout.as_mut() {
                Some(ds) if ds.rate > 0.0 => {
                    let m = dropout_mask::<T>(&mut ds.rng, s, s, ds.rate);
                    let mut pd = p.clone();
                    pd.hadamard_assign(&m);
                    drops.push(m);
                    pd.matmul(&va)
                }
                _ => p.matmul(&va),
            };
            ctx.add_column_block(lo, &ctx_a);
            probs.push(p);
        }

        let mut attn_out = ctx.matmul(&layer.wo);
        attn_out.add_row_bias(&layer.bo);
        let mut r1 = input.clone();
        r1.add_assign(&attn_out);
        let (x1, ln1) = layer_norm(&r1, &layer.ln1_scale, &layer.ln1_offset);

        let mut u = x1.matmul(&layer.w1);
        u.add_row_bias(&layer.b1);
        let mut g = u.clone();
        for val in g.data_mut() {
            *val = gelu(*val);
        }
        let mut ffn_out = g.matmul(&layer.w2);
        ffn_out.add_row_bias(&layer.b2);
        let ffn_drop = match dropout.as_mut() {
            Some(ds) if ds.rate > 0.0 => {
                let m = dropout_mask::<T>(&mut ds.rng, s, h, ds.rate);
                ffn_out.hadamard_assign(&m);
                Some(m)
            }
            _ => None,
        };
        let mut r2 = x1.clone();
        r2.add_assign(&ffn_out);
        let (x2, ln2) = layer_norm(&r2, &layer.ln2_scale, &layer.ln2_offset);

        attention.push(probs.clone());
        if record {
            layer_traces.push(LayerTrace {
                input,
                q,
                k,
                v,
                probs,
                attn_drop: if drops.is_empty() { None } else { Some(drops) },
                ctx,
                ln1,
                x1,
                u,
                g,
                ffn_drop,
                ln2: ln2.clone(),
                x2: x2.clone(),
            });
        }
        x = x2;
    }

    let cls = x.row(0).to_vec();
    if !cls.iter().all(|v| v.is_finite()) {
        // Distinguish bad parameters from a genuinely diverged input.
        if !params.is_all_finite() {
            return Err(EncoderError::NonFinite("encoder parameters".into()));
        }
        return Err(EncoderError::NonFinite("encoder output".into()));
    }
    let output = EncoderOutput {
        cls,
        tokens: x,
        attention,
        real_len: packed.real_len(),
    };
    let trace = if record {
        Some(Trace {
            token_ids: packed.token_ids.iter().map(|t| t.0).collect(),
            segment_ids: packed.segment_ids.clone(),
            mask: packed.attention_mask.clone(),
            emb_drop,
            layers: layer_traces,
        })
    } else {
        None
    };
    Ok((output, trace))
}

/// Deterministic inference over a batch; dropout disabled.
pub fn forward_eval<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    batch: &[PackedSequence],
) -> Result<Vec<EncoderOutput<T>>, EncoderError> {
    cfg.validate()?;
    par::map_slice(batch, |p| {
        forward_one(params, cfg, p, None).map(|(out, _)| out)
    })
    .into_iter()
    .collect()
}

/// Training-mode forward: dropout masks derive from `dropout_seed` and the
/// example's batch position, and every intermediate needed for an exact
/// backward pass is recorded.
pub fn forward_train<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    batch: &[PackedSequence],
    dropout_seed: u64,
) -> Result<Vec<(EncoderOutput<T>, Trace<T>)>, EncoderError> {
    cfg.validate()?;
    let indexed: Vec<(usize, &PackedSequence)> = batch.iter().enumerate().collect();
    par::map_slice(&indexed, |&(i, p)| {
        let ds = DropoutState {
            rng: rng_from(split_seed(dropout_seed, i as u64)),
            rate: cfg.dropout_rate,
        };
        forward_one(params, cfg, p, Some(ds)).map(|(out, tr)| (out, tr.expect("trace recorded")))
    })
    .into_iter()
    .collect()
}
