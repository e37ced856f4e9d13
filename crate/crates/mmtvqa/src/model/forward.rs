//! The whole network: shared encoder twice (source, question), shared image
//! projection once, per-branch selective attention + gated fusion, and the
//! two decoders, wired into one differentiable graph per example.

use indexmap::IndexMap;
use ndarray::Array2;

use crate::data::batch::TrainingExample;
use crate::data::vocab::{BOS, EOS};
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::model::config::ModelConfig;
use crate::model::decoder::decode_graph;
use crate::model::encoder::encode_text_graph;
use crate::model::fusion::{branch_fusion_graph, project_image_graph, FusionOutput};
use crate::model::layers::ForwardMode;
use crate::model::params::{Branch, BoundParams, ParamStore};

/// The model: hyperparameters plus named tensors.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    /// Fresh model with seeded initialization.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = crate::model::params::init_params(&config);
        Ok(Model { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        Ok(Model { config, params })
    }
}

/// A built graph for one example, with handles to everything training and
/// diagnostics need.
pub struct ForwardPass<'m> {
    pub graph: Graph,
    pub bound: BoundParams<'m>,
    pub mmt_logits: Var,
    pub vqa_logits: Var,
    /// Token-summed label-smoothed losses (1x1 nodes).
    pub mmt_loss_sum: Var,
    pub vqa_loss_sum: Var,
    pub mmt_tokens: usize,
    pub vqa_tokens: usize,
    mmt_fusion: (Var, Var, Var, Var),
    vqa_fusion: (Var, Var, Var, Var),
}

impl<'m> ForwardPass<'m> {
    /// `a * L_mmt_sum + b * L_vqa_sum` as a graph node.
    pub fn combined_loss(&mut self, mmt_coeff: f64, vqa_coeff: f64) -> Var {
        let g = &mut self.graph;
        let m = g.scale(self.mmt_loss_sum, mmt_coeff);
        let v = g.scale(self.vqa_loss_sum, vqa_coeff);
        g.add(m, v)
    }

    pub fn loss_values(&self) -> (f64, f64) {
        (
            self.graph.value(self.mmt_loss_sum)[(0, 0)],
            self.graph.value(self.vqa_loss_sum)[(0, 0)],
        )
    }

    /// Backpropagate from `root` and collect gradients per parameter name.
    /// Parameters the loss never touched get zero gradients.
    pub fn gradients(&self, root: Var) -> IndexMap<String, Array2<f64>> {
        let mut grads = self.graph.backward(root);
        let mut out = IndexMap::new();
        for (name, var) in self.bound.bound() {
            let g = grads
                .take(var)
                .unwrap_or_else(|| Array2::zeros(self.graph.value(var).raw_dim()));
            out.insert(name.to_string(), g);
        }
        out
    }

    fn fusion_output(&self, f: (Var, Var, Var, Var)) -> FusionOutput {
        FusionOutput {
            h_out: self.graph.value(f.0).to_owned(),
            gate: self.graph.value(f.1).to_owned(),
            attn_weights: self.graph.value(f.2).to_owned(),
        }
    }
}

/// Per-branch diagnostics from a forward pass.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub mmt_fusion: FusionOutput,
    pub vqa_fusion: FusionOutput,
    /// Attended image representations feeding each gate (`len x d_model`),
    /// kept outside [`FusionOutput`] so that type mirrors the fusion
    /// contract exactly.
    pub mmt_attended: Array2<f64>,
    pub vqa_attended: Array2<f64>,
}

/// Distributions and diagnostics from the public forward operation.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// `(|target|+1) x target_vocab`, rows sum to 1.
    pub mmt_distributions: Array2<f64>,
    /// `(|answer|+1) x answer_vocab`, rows sum to 1.
    pub vqa_distributions: Array2<f64>,
    pub diagnostics: Diagnostics,
    pub mmt_loss: f64,
    pub vqa_loss: f64,
}

/// Decoder input/label split: input is `<bos> + y`, labels are `y + <eos>`.
pub fn teacher_forcing(ids: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut input = Vec::with_capacity(ids.len() + 1);
    input.push(BOS);
    input.extend_from_slice(ids);
    let mut labels = Vec::with_capacity(ids.len() + 1);
    labels.extend_from_slice(ids);
    labels.push(EOS);
    (input, labels)
}

impl Model {
    /// Build the full multitask graph for one example.
    ///
    /// `features` is the `n_patches x d_v` patch matrix of the example's
    /// image. Losses are token-summed; divide by token counts to average.
    pub fn forward_pass<'m>(
        &'m self,
        example: &TrainingExample,
        features: &Array2<f64>,
        mode: &mut ForwardMode,
    ) -> Result<ForwardPass<'m>> {
        let mut graph = Graph::new();
        let mut bound = BoundParams::new(&self.params);

        let (h_src, src_pad) =
            encode_text_graph(&mut graph, &mut bound, &self.config, &example.source_ids, mode)?;
        let (h_qsn, qsn_pad) =
            encode_text_graph(&mut graph, &mut bound, &self.config, &example.question_ids, mode)?;
        let h_img = project_image_graph(&mut graph, &mut bound, features)?;

        let mmt_fusion = branch_fusion_graph(
            &mut graph,
            &mut bound,
            Branch::Mmt,
            h_src,
            h_img,
            mode.gate_preact_offset,
        )?;
        let vqa_fusion = branch_fusion_graph(
            &mut graph,
            &mut bound,
            Branch::Vqa,
            h_qsn,
            h_img,
            mode.gate_preact_offset,
        )?;

        let (tgt_in, tgt_labels) = teacher_forcing(&example.target_ids);
        let mmt_logits = decode_graph(
            &mut graph,
            &mut bound,
            &self.config,
            Branch::Mmt,
            mmt_fusion.0,
            &src_pad,
            &tgt_in,
            mode,
        )?;
        let (ans_in, ans_labels) = teacher_forcing(&example.answer_ids);
        let vqa_logits = decode_graph(
            &mut graph,
            &mut bound,
            &self.config,
            Branch::Vqa,
            vqa_fusion.0,
            &qsn_pad,
            &ans_in,
            mode,
        )?;

        let eps = self.config.label_smoothing;
        let tgt_label_ids: Vec<usize> = tgt_labels.iter().map(|&t| t as usize).collect();
        let ans_label_ids: Vec<usize> = ans_labels.iter().map(|&t| t as usize).collect();
        let mmt_loss_sum = graph.ce_smooth_sum(mmt_logits, &tgt_label_ids, eps);
        let vqa_loss_sum = graph.ce_smooth_sum(vqa_logits, &ans_label_ids, eps);

        Ok(ForwardPass {
            graph,
            bound,
            mmt_logits,
            vqa_logits,
            mmt_loss_sum,
            vqa_loss_sum,
            mmt_tokens: tgt_label_ids.len(),
            vqa_tokens: ans_label_ids.len(),
            mmt_fusion,
            vqa_fusion,
        })
    }

    /// Public forward: per-position distributions for both branches plus
    /// fusion diagnostics and token-averaged losses.
    pub fn forward(
        &self,
        example: &TrainingExample,
        features: &Array2<f64>,
        mode: &mut ForwardMode,
    ) -> Result<ForwardResult> {
        let mut pass = self.forward_pass(example, features, mode)?;
        let mmt = pass.graph.softmax_rows(pass.mmt_logits);
        let vqa = pass.graph.softmax_rows(pass.vqa_logits);
        let (mmt_sum, vqa_sum) = pass.loss_values();
        Ok(ForwardResult {
            mmt_distributions: pass.graph.value(mmt).to_owned(),
            vqa_distributions: pass.graph.value(vqa).to_owned(),
            diagnostics: Diagnostics {
                mmt_fusion: pass.fusion_output(pass.mmt_fusion),
                vqa_fusion: pass.fusion_output(pass.vqa_fusion),
                mmt_attended: pass.graph.value(pass.mmt_fusion.3).to_owned(),
                vqa_attended: pass.graph.value(pass.vqa_fusion.3).to_owned(),
            },
            mmt_loss: mmt_sum / pass.mmt_tokens as f64,
            vqa_loss: vqa_sum / pass.vqa_tokens as f64,
        })
    }

    /// Joint loss of one example treated as a batch of one:
    /// `L_mmt_sum/m + lambda * L_vqa_sum/n`. Used by the gradient checks.
    pub fn example_loss(
        &self,
        example: &TrainingExample,
        features: &Array2<f64>,
        mode: &mut ForwardMode,
    ) -> Result<f64> {
        let pass = self.forward_pass(example, features, mode)?;
        let (mmt_sum, vqa_sum) = pass.loss_values();
        Ok(mmt_sum / pass.mmt_tokens as f64
            + self.config.vqa_loss_weight * vqa_sum / pass.vqa_tokens as f64)
    }
}
