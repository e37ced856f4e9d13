//! Per-branch transformer decoders: causal self-attention, cross-attention
//! over the fused encoder states, feed-forward, and the output projection.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::model::config::ModelConfig;
use crate::model::layers::{
    causal_mask, embed_sequence, feed_forward, linear, multi_head_attention, padding_mask,
    residual_norm, ForwardMode,
};
use crate::model::params::{Branch, BoundParams, ParamStore};

pub fn branch_vocab(config: &ModelConfig, branch: Branch) -> usize {
    match branch {
        Branch::Mmt => config.target_vocab,
        Branch::Vqa => config.answer_vocab,
    }
}

/// Build one branch's decoder over fused states already in the graph.
/// Returns the logits node (`prefix_len x vocab`).
#[allow(clippy::too_many_arguments)]
pub fn decode_graph(
    graph: &mut Graph,
    bound: &mut BoundParams,
    config: &ModelConfig,
    branch: Branch,
    h_out: Var,
    src_pad_mask: &[bool],
    prefix_ids: &[u32],
    mode: &mut ForwardMode,
) -> Result<Var> {
    if prefix_ids.is_empty() {
        return Err(Error::Argument("decoder prefix is empty".into()));
    }
    if prefix_ids[0] != crate::data::vocab::BOS {
        return Err(Error::Argument("decoder prefix must begin with <bos>".into()));
    }
    let vocab = branch_vocab(config, branch);
    for &id in prefix_ids {
        if id as usize >= vocab {
            return Err(Error::Vocabulary {
                id,
                vocab: format!("{} decoder", branch.key()),
                size: vocab,
            });
        }
    }
    let ids: Vec<usize> = prefix_ids.iter().map(|&id| id as usize).collect();
    let b = format!("branch.{}.decoder", branch.key());

    let mut x =
        embed_sequence(graph, bound, &format!("{b}.embed.table"), &ids, config.d_model, mode);
    let self_mask = causal_mask(ids.len());
    let cross_mask = padding_mask(ids.len(), src_pad_mask);
    for l in 0..config.decoder_layers {
        let p = format!("{b}.layer{l}");
        let attn = multi_head_attention(
            graph,
            bound,
            &format!("{p}.self_attn"),
            x,
            x,
            config.n_heads,
            Some(&self_mask),
        );
        x = residual_norm(graph, bound, x, attn, &format!("{p}.ln1"), mode);
        let cross = multi_head_attention(
            graph,
            bound,
            &format!("{p}.cross_attn"),
            x,
            h_out,
            config.n_heads,
            Some(&cross_mask),
        );
        x = residual_norm(graph, bound, x, cross, &format!("{p}.ln2"), mode);
        let ffn = feed_forward(graph, bound, &format!("{p}.ffn"), x);
        x = residual_norm(graph, bound, x, ffn, &format!("{p}.ln3"), mode);
    }
    Ok(linear(graph, bound, x, &format!("{b}.out_proj.w"), &format!("{b}.out_proj.b")))
}

/// Run one branch's decoder over fused states, returning per-position
/// distributions over that branch's vocabulary (rows sum to 1).
pub fn decode(
    params: &ParamStore,
    config: &ModelConfig,
    branch: Branch,
    h_out: &Array2<f64>,
    src_pad_mask: &[bool],
    prefix_ids: &[u32],
    mode: &mut ForwardMode,
) -> Result<Array2<f64>> {
    let mut graph = Graph::new();
    let mut bound = BoundParams::new(params);
    let h = graph.constant(h_out.clone());
    let logits =
        decode_graph(&mut graph, &mut bound, config, branch, h, src_pad_mask, prefix_ids, mode)?;
    let probs = graph.softmax_rows(logits);
    Ok(graph.value(probs).to_owned())
}
