//! The shared text encoder. One parameter set encodes both the source
//! sentence and the question; padded positions are masked out of
//! self-attention and flagged for every downstream consumer.

use ndarray::Array2;

use crate::data::vocab::PAD;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::model::config::ModelConfig;
use crate::model::layers::{
    embed_sequence, feed_forward, multi_head_attention, padding_mask, residual_norm, ForwardMode,
};
use crate::model::params::{BoundParams, ParamStore};

/// Encoder states plus the padding flags downstream attention must honor.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `len x d_model`
    pub hidden: Array2<f64>,
    pub pad_mask: Vec<bool>,
}

/// Build the encoder stack inside an existing graph. Returns the final
/// hidden states node and the padding flags.
pub fn encode_text_graph(
    graph: &mut Graph,
    bound: &mut BoundParams,
    config: &ModelConfig,
    token_ids: &[u32],
    mode: &mut ForwardMode,
) -> Result<(Var, Vec<bool>)> {
    if token_ids.is_empty() {
        return Err(Error::Argument("cannot encode an empty sequence".into()));
    }
    for &id in token_ids {
        if id as usize >= config.text_vocab {
            return Err(Error::Vocabulary { id, vocab: "text".into(), size: config.text_vocab });
        }
    }
    let pad_mask: Vec<bool> = token_ids.iter().map(|&id| id == PAD).collect();
    let ids: Vec<usize> = token_ids.iter().map(|&id| id as usize).collect();

    let mut x = embed_sequence(graph, bound, "text_encoder.embed.table", &ids, config.d_model, mode);
    let attn_mask = padding_mask(token_ids.len(), &pad_mask);
    for l in 0..config.encoder_layers {
        let p = format!("text_encoder.layer{l}");
        let attn = multi_head_attention(
            graph,
            bound,
            &format!("{p}.self_attn"),
            x,
            x,
            config.n_heads,
            Some(&attn_mask),
        );
        x = residual_norm(graph, bound, x, attn, &format!("{p}.ln1"), mode);
        let ffn = feed_forward(graph, bound, &format!("{p}.ffn"), x);
        x = residual_norm(graph, bound, x, ffn, &format!("{p}.ln2"), mode);
    }
    Ok((x, pad_mask))
}

/// Encode a token sequence with the shared text encoder.
pub fn encode_text(
    params: &ParamStore,
    config: &ModelConfig,
    token_ids: &[u32],
    mode: &mut ForwardMode,
) -> Result<EncoderOutput> {
    let mut graph = Graph::new();
    let mut bound = BoundParams::new(params);
    let (h, pad_mask) = encode_text_graph(&mut graph, &mut bound, config, token_ids, mode)?;
    Ok(EncoderOutput { hidden: graph.value(h).to_owned(), pad_mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::init_params;

    fn setup() -> (ParamStore, ModelConfig) {
        let config = ModelConfig::tiny();
        (init_params(&config), config)
    }

    #[test]
    fn output_has_one_row_per_token() {
        let (params, config) = setup();
        let out = encode_text(&params, &config, &[5, 6, 7, 8, 9], &mut ForwardMode::eval()).unwrap();
        assert_eq!(out.hidden.dim(), (5, config.d_model));
        assert_eq!(out.pad_mask, vec![false; 5]);
    }

    #[test]
    fn appending_pads_leaves_leading_rows_unchanged() {
        let (params, config) = setup();
        let base = encode_text(&params, &config, &[5, 6, 7, 8, 9], &mut ForwardMode::eval()).unwrap();
        let padded =
            encode_text(&params, &config, &[5, 6, 7, 8, 9, PAD, PAD], &mut ForwardMode::eval())
                .unwrap();
        assert_eq!(padded.pad_mask[5..], [true, true]);
        for r in 0..5 {
            for c in 0..config.d_model {
                assert!(
                    (base.hidden[(r, c)] - padded.hidden[(r, c)]).abs() < 1e-9,
                    "row {r} changed by padding"
                );
            }
        }
    }

    #[test]
    fn source_and_question_roles_share_the_encoder() {
        let (params, config) = setup();
        let ids = [5u32, 11, 3, 9];
        let a = encode_text(&params, &config, &ids, &mut ForwardMode::eval()).unwrap();
        let b = encode_text(&params, &config, &ids, &mut ForwardMode::eval()).unwrap();
        assert_eq!(a.hidden, b.hidden, "one encoder, bitwise-identical states");
    }

    #[test]
    fn out_of_range_id_is_vocabulary_error() {
        let (params, config) = setup();
        match encode_text(&params, &config, &[5, 99], &mut ForwardMode::eval()) {
            Err(Error::Vocabulary { id: 99, .. }) => {}
            other => panic!("expected vocabulary error, got {other:?}"),
        }
    }

    #[test]
    fn dropout_changes_training_outputs_but_eval_is_deterministic() {
        use rand::SeedableRng;
        let (params, mut config) = setup();
        config.dropout = 0.2;
        let ids = [5u32, 6, 7];
        let mut rng_a = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a =
            encode_text(&params, &config, &ids, &mut ForwardMode::train(config.dropout, &mut rng_a))
                .unwrap();
        let b =
            encode_text(&params, &config, &ids, &mut ForwardMode::train(config.dropout, &mut rng_b))
                .unwrap();
        assert_ne!(a.hidden, b.hidden);
        let e1 = encode_text(&params, &config, &ids, &mut ForwardMode::eval()).unwrap();
        let e2 = encode_text(&params, &config, &ids, &mut ForwardMode::eval()).unwrap();
        assert_eq!(e1.hidden, e2.hidden);
    }
}
