//! Decoding: greedy by default, beam search when a width > 1 is configured.

use ndarray::Array2;

use crate::data::vocab::{BOS, EOS};
use crate::error::Result;
use crate::graph::Graph;
use crate::model::decoder::decode;
use crate::model::encoder::encode_text_graph;
use crate::model::forward::Model;
use crate::model::fusion::{branch_fusion_graph, project_image_graph};
use crate::model::layers::ForwardMode;
use crate::model::params::{Branch, BoundParams};

/// Fused source states ready for repeated decoding.
pub struct EncodedSource {
    pub h_out: Array2<f64>,
    pub pad_mask: Vec<bool>,
}

/// Encode a source sentence and fuse it with its image for the translation
/// branch.
pub fn encode_for_translation(
    model: &Model,
    source_ids: &[u32],
    features: &Array2<f64>,
) -> Result<EncodedSource> {
    let mut graph = Graph::new();
    let mut bound = BoundParams::new(&model.params);
    let mode = &mut ForwardMode::eval();
    let (h_src, pad_mask) =
        encode_text_graph(&mut graph, &mut bound, &model.config, source_ids, mode)?;
    let h_img = project_image_graph(&mut graph, &mut bound, features)?;
    let (h_out, _, _, _) =
        branch_fusion_graph(&mut graph, &mut bound, Branch::Mmt, h_src, h_img, None)?;
    Ok(EncodedSource { h_out: graph.value(h_out).to_owned(), pad_mask })
}

/// Greedy decoding: append the argmax token until `<eos>` or `max_len`.
/// Returns target ids without `<bos>`/`<eos>`.
pub fn greedy_translate(
    model: &Model,
    source_ids: &[u32],
    features: &Array2<f64>,
    max_len: usize,
) -> Result<Vec<u32>> {
    let encoded = encode_for_translation(model, source_ids, features)?;
    let mut prefix = vec![BOS];
    let mut out = Vec::new();
    for _ in 0..max_len.max(1) {
        let probs = decode(
            &model.params,
            &model.config,
            Branch::Mmt,
            &encoded.h_out,
            &encoded.pad_mask,
            &prefix,
            &mut ForwardMode::eval(),
        )?;
        let last = probs.row(probs.nrows() - 1);
        let next = argmax(last.as_slice().unwrap()) as u32;
        if next == EOS {
            break;
        }
        out.push(next);
        prefix.push(next);
    }
    Ok(out)
}

/// Beam search over the same decoder. `beam_size` 1 reduces to greedy.
pub fn beam_translate(
    model: &Model,
    source_ids: &[u32],
    features: &Array2<f64>,
    max_len: usize,
    beam_size: usize,
) -> Result<Vec<u32>> {
    if beam_size <= 1 {
        return greedy_translate(model, source_ids, features, max_len);
    }
    let encoded = encode_for_translation(model, source_ids, features)?;

    // (prefix, log prob, finished)
    let mut beams: Vec<(Vec<u32>, f64, bool)> = vec![(vec![BOS], 0.0, false)];
    for _ in 0..max_len.max(1) {
        if beams.iter().all(|b| b.2) {
            break;
        }
        let mut candidates: Vec<(Vec<u32>, f64, bool)> = Vec::new();
        for (prefix, score, finished) in &beams {
            if *finished {
                candidates.push((prefix.clone(), *score, true));
                continue;
            }
            let probs = decode(
                &model.params,
                &model.config,
                Branch::Mmt,
                &encoded.h_out,
                &encoded.pad_mask,
                prefix,
                &mut ForwardMode::eval(),
            )?;
            let last = probs.row(probs.nrows() - 1);
            let mut scored: Vec<(usize, f64)> =
                last.iter().enumerate().map(|(i, &p)| (i, p.max(1e-300).ln())).collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));
            for &(tok, lp) in scored.iter().take(beam_size) {
                let mut next = prefix.clone();
                let finished = tok as u32 == EOS;
                if !finished {
                    next.push(tok as u32);
                }
                candidates.push((next, score + lp, finished));
            }
        }
        // keep ties deterministic: higher score first, then shorter prefix
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.len().cmp(&b.0.len())));
        candidates.truncate(beam_size);
        beams = candidates;
    }
    let best = beams.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("beam never empty");
    Ok(best.0[1..].to_vec())
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;

    fn setup() -> (Model, Vec<u32>, Array2<f64>) {
        let config = ModelConfig::tiny();
        let features = Array2::from_shape_fn((config.n_patches, config.d_v), |(r, c)| {
            ((r + 2 * c) as f64 * 0.21).cos() * 0.5
        });
        (Model::new(config).unwrap(), vec![5, 6, 7], features)
    }

    #[test]
    fn max_len_one_returns_at_most_one_token() {
        let (model, src, feats) = setup();
        let out = greedy_translate(&model, &src, &feats, 1).unwrap();
        assert!(out.len() <= 1);
    }

    #[test]
    fn greedy_is_deterministic() {
        let (model, src, feats) = setup();
        let a = greedy_translate(&model, &src, &feats, 8).unwrap();
        let b = greedy_translate(&model, &src, &feats, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beam_one_equals_greedy() {
        let (model, src, feats) = setup();
        let g = greedy_translate(&model, &src, &feats, 6).unwrap();
        let b = beam_translate(&model, &src, &feats, 6, 1).unwrap();
        assert_eq!(g, b);
    }

    #[test]
    fn beam_respects_max_len() {
        let (model, src, feats) = setup();
        let out = beam_translate(&model, &src, &feats, 4, 3).unwrap();
        assert!(out.len() <= 4);
    }
}
