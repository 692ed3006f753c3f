//! Exact analytic gradients for the encoder.
//!
//! Gradients flow from the final classification-token vector only; padded
//! positions hold zero attention probability, so their contributions vanish
//! identically and match finite differences.

use crate::par;
use crate::tensor::{Matrix, Real};

use super::forward::{gelu_grad, LnTrace, Trace};
use super::{EncoderConfig, EncoderError, EncoderParams};

/// Fixed micro-batch size for chunked gradient reduction. Independent of the
/// worker count so the summation order never changes.
const GRAD_CHUNK: usize = 8;

fn ln_backward<T: Real>(
    upstream: &Matrix<T>,
    ln: &LnTrace<T>,
    scale: &[T],
    grad_scale: &mut [T],
    grad_offset: &mut [T],
) -> Matrix<T> {
    let (s, h) = (upstream.rows(), upstream.cols());
    let hf = T::from_f64(h as f64);
    let mut dx = Matrix::zeros(s, h);
    for i in 0..s {
        let dy = upstream.row(i);
        let xhat = ln.xhat.row(i);
        let istd = ln.inv_std[i];
        let mut m1 = T::ZERO;
        let mut m2 = T::ZERO;
        for j in 0..h {
            let dxh = dy[j] * scale[j];
            m1 += dxh;
            m2 += dxh * xhat[j];
            grad_scale[j] += dy[j] * xhat[j];
            grad_offset[j] += dy[j];
        }
        m1 = m1 / hf;
        m2 = m2 / hf;
        let out = dx.row_mut(i);
        for j in 0..h {
            let dxh = dy[j] * scale[j];
            out[j] = istd * (dxh - m1 - xhat[j] * m2);
        }
    }
    dx
}

fn softmax_backward<T: Real>(probs: &Matrix<T>, upstream: &Matrix<T>) -> Matrix<T> {
    let (s, c) = (probs.rows(), probs.cols());
    let mut out = Matrix::zeros(s, c);
    for i in 0..s {
        let p = probs.row(i);
        let dp = upstream.row(i);
        let mut dot = T::ZERO;
        for j in 0..c {
            dot += dp[j] * p[j];
        }
        let o = out.row_mut(i);
        for j in 0..c {
            o[j] = p[j] * (dp[j] - dot);
        }
    }
    out
}

fn add_slice<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Gradients of a scalar loss with respect to every parameter tensor, given
/// the loss gradient on the classification vector of one traced example.
pub fn backward<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    trace: &Trace<T>,
    d_cls: &[T],
) -> Result<EncoderParams<T>, EncoderError> {
    let mut grads = params.zeros_like();
    accumulate_backward(params, cfg, trace, d_cls, &mut grads)?;
    Ok(grads)
}

fn accumulate_backward<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    trace: &Trace<T>,
    d_cls: &[T],
    grads: &mut EncoderParams<T>,
) -> Result<(), EncoderError> {
    let h = cfg.hidden_size;
    if d_cls.len() != h {
        return Err(EncoderError::TraceMismatch(format!(
            "upstream gradient has length {}, hidden size is {h}",
            d_cls.len()
        )));
    }
    if trace.layers.len() != params.layers.len() {
        return Err(EncoderError::TraceMismatch(format!(
            "trace has {} layers, parameters have {}",
            trace.layers.len(),
            params.layers.len()
        )));
    }
    let s = trace.seq_len();
    if trace.layers.iter().any(|lt| lt.input.cols() != h) {
        return Err(EncoderError::TraceMismatch(
            "trace hidden size differs from parameters".into(),
        ));
    }
    let heads = cfg.num_heads;
    let d = cfg.head_dim();
    let scale = T::from_f64(1.0 / (d as f64).sqrt());

    let mut dx = Matrix::zeros(s, h);
    add_slice(dx.row_mut(0), d_cls);

    for l in (0..params.layers.len()).rev() {
        let lt = &trace.layers[l];
        let lp = &params.layers[l];
        let gl = &mut grads.layers[l];

        // x2 = LN2(x1 + dropout(ffn_out))
        let dr2 = ln_backward(&dx, &lt.ln2, &lp.ln2_scale, &mut gl.ln2_scale, &mut gl.ln2_offset);
        let mut d_ffn_out = dr2.clone();
        if let Some(m) = &lt.ffn_drop {
            d_ffn_out.hadamard_assign(m);
        }

        // ffn_out = gelu(x1 w1 + b1) w2 + b2
        let dg = d_ffn_out.matmul_bt(&lp.w2);
        lt.g.matmul_at_acc(&d_ffn_out, &mut gl.w2);
        d_ffn_out.column_sums_acc(&mut gl.b2);
        let mut du = dg;
        for (v, &u) in du.data_mut().iter_mut().zip(lt.u.data()) {
            *v *= gelu_grad(u);
        }
        lt.x1.matmul_at_acc(&du, &mut gl.w1);
        du.column_sums_acc(&mut gl.b1);

        let mut dx1 = dr2;
        dx1.add_assign(&du.matmul_bt(&lp.w1));

        // x1 = LN1(input + attn_out)
        let dr1 = ln_backward(&dx1, &lt.ln1, &lp.ln1_scale, &mut gl.ln1_scale, &mut gl.ln1_offset);

        // attn_out = ctx wo + bo
        let d_ctx = dr1.matmul_bt(&lp.wo);
        lt.ctx.matmul_at_acc(&dr1, &mut gl.wo);
        dr1.column_sums_acc(&mut gl.bo);

        let mut dq = Matrix::zeros(s, h);
        let mut dk = Matrix::zeros(s, h);
        let mut dv = Matrix::zeros(s, h);
        for a in 0..heads {
            let lo = a * d;
            let hi = lo + d;
            let d_ctx_a = d_ctx.column_block(lo, hi);
            let qa = lt.q.column_block(lo, hi);
            let ka = lt.k.column_block(lo, hi);
            let va = lt.v.column_block(lo, hi);
            let p = &lt.probs[a];

            // ctx_a = dropout(p) va
            let (d_pd, d_va) = match lt.attn_drop.as_ref() {
                Some(masks) => {
                    let mut pd = p.clone();
                    pd.hadamard_assign(&masks[a]);
                    (d_ctx_a.matmul_bt(&va), pd.matmul_at(&d_ctx_a))
                }
                None => (d_ctx_a.matmul_bt(&va), p.matmul_at(&d_ctx_a)),
            };
            let mut dp = d_pd;
            if let Some(masks) = lt.attn_drop.as_ref() {
                dp.hadamard_assign(&masks[a]);
            }
            let mut dsc = softmax_backward(p, &dp);
            dsc.scale(scale);
            dq.add_column_block(lo, &dsc.matmul(&ka));
            dk.add_column_block(lo, &dsc.matmul_at(&qa));
            dv.add_column_block(lo, &d_va);
        }

        lt.input.matmul_at_acc(&dq, &mut gl.wq);
        dq.column_sums_acc(&mut gl.bq);
        lt.input.matmul_at_acc(&dk, &mut gl.wk);
        dk.column_sums_acc(&mut gl.bk);
        lt.input.matmul_at_acc(&dv, &mut gl.wv);
        dv.column_sums_acc(&mut gl.bv);

        let mut d_input = dr1;
        d_input.add_assign(&dq.matmul_bt(&lp.wq));
        d_input.add_assign(&dk.matmul_bt(&lp.wk));
        d_input.add_assign(&dv.matmul_bt(&lp.wv));
        dx = d_input;
    }

    if let Some(m) = &trace.emb_drop {
        dx.hadamard_assign(m);
    }
    for i in 0..s {
        let row = dx.row(i).to_vec();
        add_slice(grads.token_embed.row_mut(trace.token_ids[i] as usize), &row);
        add_slice(
            grads.segment_embed.row_mut(trace.segment_ids[i] as usize),
            &row,
        );
        add_slice(grads.position_embed.row_mut(i), &row);
    }
    Ok(())
}

/// Sums per-example gradients over a batch. Examples are processed in fixed
/// chunks so the reduction order (and therefore the result, bit for bit) does
/// not depend on the number of worker threads.
pub fn backward_batch<T: Real>(
    params: &EncoderParams<T>,
    cfg: &EncoderConfig,
    examples: &[(Trace<T>, Vec<T>)],
) -> Result<EncoderParams<T>, EncoderError> {
    let chunk_grads: Vec<Result<EncoderParams<T>, EncoderError>> =
        par::map_chunks(examples, GRAD_CHUNK, |chunk| {
            let mut acc = params.zeros_like();
            for (trace, d_cls) in chunk {
                accumulate_backward(params, cfg, trace, d_cls, &mut acc)?;
            }
            Ok(acc)
        });
    let mut total = params.zeros_like();
    for g in chunk_grads {
        total.accumulate(&g?);
    }
    Ok(total)
}
