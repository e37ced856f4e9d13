//! Graph-building blocks shared by the encoder and the decoders: sinusoidal
//! positions, dropout, masked multi-head attention, feed-forward, and the
//! residual+norm wiring.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::model::params::BoundParams;

/// Large negative logit used to exclude positions from attention. Finite so
/// `max` reductions never see infinities; `exp` underflows it to zero.
pub const MASKED: f64 = -1e30;

/// Knobs for one forward pass.
pub struct ForwardMode<'r> {
    /// Dropout probability; active only when an RNG is supplied.
    pub dropout: f64,
    pub rng: Option<&'r mut ChaCha8Rng>,
    /// Test hook: added to every gate pre-activation, pushing the fusion
    /// gate toward 0 (text only) or 1 (image only).
    pub gate_preact_offset: Option<f64>,
}

impl<'r> ForwardMode<'r> {
    /// Inference: no dropout, no hooks.
    pub fn eval() -> Self {
        ForwardMode { dropout: 0.0, rng: None, gate_preact_offset: None }
    }

    /// Training: dropout driven by the supplied RNG.
    pub fn train(dropout: f64, rng: &'r mut ChaCha8Rng) -> Self {
        ForwardMode { dropout, rng: Some(rng), gate_preact_offset: None }
    }

    /// Inverted dropout mask, or `None` when dropout is inactive.
    fn dropout_mask(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        let p = self.dropout;
        if p <= 0.0 {
            return None;
        }
        let rng = self.rng.as_deref_mut()?;
        let keep = 1.0 - p;
        Some(Array2::from_shape_fn((rows, cols), |_| {
            if rng.gen_range(0.0..1.0) < p {
                0.0
            } else {
                1.0 / keep
            }
        }))
    }
}

pub fn apply_dropout(graph: &mut Graph, x: Var, mode: &mut ForwardMode) -> Var {
    let (rows, cols) = graph.value(x).dim();
    match mode.dropout_mask(rows, cols) {
        Some(mask) => graph.mul_const(x, mask),
        None => x,
    }
}

/// Fixed sinusoidal position encoding, `len x d`.
pub fn positional_encoding(len: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((len, d));
    for pos in 0..len {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            pe[(pos, 2 * i)] = angle.sin();
            pe[(pos, 2 * i + 1)] = angle.cos();
        }
        if d % 2 == 1 {
            let i = d / 2;
            pe[(pos, 2 * i)] = (pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64)).sin();
        }
    }
    pe
}

/// Token embedding scaled by sqrt(d) plus positions, then dropout.
pub fn embed_sequence(
    graph: &mut Graph,
    bound: &mut BoundParams,
    table_name: &str,
    ids: &[usize],
    d: usize,
    mode: &mut ForwardMode,
) -> Var {
    let table = bound.var(graph, table_name);
    let scaled = graph.embed(table, ids, (d as f64).sqrt());
    let with_pos = graph.add_const(scaled, positional_encoding(ids.len(), d));
    apply_dropout(graph, with_pos, mode)
}

/// `x . W + b`
pub fn linear(graph: &mut Graph, bound: &mut BoundParams, x: Var, w: &str, b: &str) -> Var {
    let w = bound.var(graph, w);
    let b = bound.var(graph, b);
    let xw = graph.matmul(x, w);
    graph.add_row(xw, b)
}

pub fn layer_norm(graph: &mut Graph, bound: &mut BoundParams, x: Var, prefix: &str) -> Var {
    let gain = bound.var(graph, &format!("{prefix}.gain"));
    let bias = bound.var(graph, &format!("{prefix}.bias"));
    graph.layer_norm(x, gain, bias)
}

/// Additive mask excluding padded key positions, `q_len x k_len`.
pub fn padding_mask(q_len: usize, key_pad: &[bool]) -> Array2<f64> {
    Array2::from_shape_fn((q_len, key_pad.len()), |(_, k)| if key_pad[k] { MASKED } else { 0.0 })
}

/// Additive causal mask: position `t` sees keys `0..=t`.
pub fn causal_mask(len: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, len), |(q, k)| if k > q { MASKED } else { 0.0 })
}

/// Scaled dot-product attention: `softmax(Q Kᵀ / sqrt(d_k) + mask) V`.
/// Returns (output, weights).
pub fn scaled_dot_attention(
    graph: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    d_k: usize,
    mask: Option<&Array2<f64>>,
) -> (Var, Var) {
    let kt = graph.transpose(k);
    let scores = graph.matmul(q, kt);
    let mut scaled = graph.scale(scores, 1.0 / (d_k as f64).sqrt());
    if let Some(m) = mask {
        scaled = graph.add_const(scaled, m.clone());
    }
    let weights = graph.softmax_rows(scaled);
    let out = graph.matmul(weights, v);
    (out, weights)
}

/// Multi-head attention with learned projections under `prefix`
/// (`wq/bq/wk/bk/wv/bv/wo/bo`). Queries come from `q_in`, keys and values
/// from `kv_in`; `mask` is shared across heads.
pub fn multi_head_attention(
    graph: &mut Graph,
    bound: &mut BoundParams,
    prefix: &str,
    q_in: Var,
    kv_in: Var,
    n_heads: usize,
    mask: Option<&Array2<f64>>,
) -> Var {
    let q = linear(graph, bound, q_in, &format!("{prefix}.wq"), &format!("{prefix}.bq"));
    let k = linear(graph, bound, kv_in, &format!("{prefix}.wk"), &format!("{prefix}.bk"));
    let v = linear(graph, bound, kv_in, &format!("{prefix}.wv"), &format!("{prefix}.bv"));
    let d = graph.value(q).ncols();
    let head_dim = d / n_heads;

    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qs = graph.slice_cols(q, h * head_dim, head_dim);
        let ks = graph.slice_cols(k, h * head_dim, head_dim);
        let vs = graph.slice_cols(v, h * head_dim, head_dim);
        let (out, _) = scaled_dot_attention(graph, qs, ks, vs, head_dim, mask);
        heads.push(out);
    }
    let cat = graph.concat_cols(&heads);
    linear(graph, bound, cat, &format!("{prefix}.wo"), &format!("{prefix}.bo"))
}

/// Position-wise feed-forward: `relu(x W1 + b1) W2 + b2`.
pub fn feed_forward(graph: &mut Graph, bound: &mut BoundParams, prefix: &str, x: Var) -> Var {
    let h = linear(graph, bound, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"));
    let h = graph.relu(h);
    linear(graph, bound, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

/// Residual add + post layer norm, with dropout on the sublayer output.
pub fn residual_norm(
    graph: &mut Graph,
    bound: &mut BoundParams,
    x: Var,
    sublayer_out: Var,
    ln_prefix: &str,
    mode: &mut ForwardMode,
) -> Var {
    let dropped = apply_dropout(graph, sublayer_out, mode);
    let sum = graph.add(x, dropped);
    layer_norm(graph, bound, sum, ln_prefix)
}
