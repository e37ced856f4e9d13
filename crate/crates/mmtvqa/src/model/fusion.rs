//! The cross-modal path: image projection, selective attention, and gated
//! fusion.
//!
//! Text states query image patch states through a single attention head
//! (no head splitting, `d_k = d_model`), and a sigmoid gate mixes each text
//! row with its attended image row:
//!
//! ```text
//! gate  = sigmoid(H_text U + H_attn V)
//! H_out = (1 - gate) * H_text + gate * H_attn
//! ```
//!
//! Each branch owns its attention projections and gate matrices; the image
//! projection is shared.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::model::layers::scaled_dot_attention;
use crate::model::params::{Branch, BoundParams, ParamStore};

/// Fused states plus the diagnostics the analysis tooling wants.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    /// `len x d_model`
    pub h_out: Array2<f64>,
    /// Gate values in (0,1), `len x d_model`.
    pub gate: Array2<f64>,
    /// Attention over patches, rows sum to 1, `len x n_patches`.
    pub attn_weights: Array2<f64>,
}

/// `features . W`: no bias, zero features project to zero.
pub fn project_image_graph(
    graph: &mut Graph,
    bound: &mut BoundParams,
    features: &Array2<f64>,
) -> Result<Var> {
    let w = bound.var(graph, "image_projection.w");
    let (d_v, _) = graph.value(w).dim();
    if features.ncols() != d_v {
        return Err(Error::Shape {
            context: "image projection".into(),
            left: format!("features dim {}", features.ncols()),
            right: format!("projection input dim {d_v}"),
        });
    }
    let f = graph.constant(features.clone());
    Ok(graph.matmul(f, w))
}

/// Project patch features into the text dimension.
pub fn project_image(params: &ParamStore, features: &Array2<f64>) -> Result<Array2<f64>> {
    let mut graph = Graph::new();
    let mut bound = BoundParams::new(params);
    let h = project_image_graph(&mut graph, &mut bound, features)?;
    Ok(graph.value(h).to_owned())
}

/// Single-head selective attention inside a graph: queries from `h_text`,
/// keys and values from the image states, `d_k` = the full column width.
pub fn selective_attention_graph(
    graph: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
) -> Result<(Var, Var)> {
    if graph.value(k).nrows() == 0 {
        return Err(Error::Argument("selective attention over zero image patches".into()));
    }
    let d_k = graph.value(q).ncols();
    if graph.value(k).ncols() != d_k {
        return Err(Error::Shape {
            context: "selective attention".into(),
            left: format!("query dim {d_k}"),
            right: format!("key dim {}", graph.value(k).ncols()),
        });
    }
    Ok(scaled_dot_attention(graph, q, k, v, d_k, None))
}

/// Single-head attention of text states over image states (keys = values).
/// Returns the attended image representation and the attention weights.
pub fn selective_attention(
    h_text: &Array2<f64>,
    h_img: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut graph = Graph::new();
    let q = graph.constant(h_text.clone());
    let kv = graph.constant(h_img.clone());
    let (out, weights) = selective_attention_graph(&mut graph, q, kv, kv)?;
    Ok((graph.value(out).to_owned(), graph.value(weights).to_owned()))
}

/// One branch's selective attention with its learned projections:
/// `Q = H_text Wq`, `K = H_img Wk`, `V = H_img Wv`, then single-head
/// attention. Returns (attended states, weights).
pub fn branch_selective_attention_graph(
    graph: &mut Graph,
    bound: &mut BoundParams,
    branch: Branch,
    h_text: Var,
    h_img: Var,
) -> Result<(Var, Var)> {
    let p = format!("branch.{}.sel_attn", branch.key());
    let wq = bound.var(graph, &format!("{p}.wq"));
    let wk = bound.var(graph, &format!("{p}.wk"));
    let wv = bound.var(graph, &format!("{p}.wv"));
    let q = graph.matmul(h_text, wq);
    let k = graph.matmul(h_img, wk);
    let v = graph.matmul(h_img, wv);
    selective_attention_graph(graph, q, k, v)
}

/// Gated fusion inside a graph. Returns (h_out, gate).
///
/// `gate_preact_offset` is the test hook shifting the sigmoid input.
pub fn gated_fusion_graph(
    graph: &mut Graph,
    h_text: Var,
    h_img_attn: Var,
    u: Var,
    v_gate: Var,
    gate_preact_offset: Option<f64>,
) -> Result<(Var, Var)> {
    let (lt, dt) = graph.value(h_text).dim();
    let (la, da) = graph.value(h_img_attn).dim();
    if (lt, dt) != (la, da) {
        return Err(Error::Shape {
            context: "gated fusion".into(),
            left: format!("{lt}x{dt}"),
            right: format!("{la}x{da}"),
        });
    }
    let tu = graph.matmul(h_text, u);
    let av = graph.matmul(h_img_attn, v_gate);
    let mut pre = graph.add(tu, av);
    if let Some(offset) = gate_preact_offset {
        pre = graph.add_const(pre, Array2::from_elem((lt, dt), offset));
    }
    let gate = graph.sigmoid(pre);
    // (1 - g) t + g a  ==  t + g (a - t)
    let diff = graph.sub(h_img_attn, h_text);
    let gated = graph.mul(gate, diff);
    let h_out = graph.add(h_text, gated);
    Ok((h_out, gate))
}

/// Sigmoid-gated convex combination of text and attended-image states.
pub fn gated_fusion(
    h_text: &Array2<f64>,
    h_img_attn: &Array2<f64>,
    u: &Array2<f64>,
    v_gate: &Array2<f64>,
) -> Result<FusionOutput> {
    let mut graph = Graph::new();
    let t = graph.constant(h_text.clone());
    let a = graph.constant(h_img_attn.clone());
    let uv = graph.constant(u.clone());
    let vv = graph.constant(v_gate.clone());
    let (h_out, gate) = gated_fusion_graph(&mut graph, t, a, uv, vv, None)?;
    Ok(FusionOutput {
        h_out: graph.value(h_out).to_owned(),
        gate: graph.value(gate).to_owned(),
        // weights are not part of this operation; filled by the caller
        attn_weights: Array2::zeros((0, 0)),
    })
}

/// Full cross-modal block for one branch: selective attention then gated
/// fusion. Returns (h_out, gate, attention weights, attended states).
pub fn branch_fusion_graph(
    graph: &mut Graph,
    bound: &mut BoundParams,
    branch: Branch,
    h_text: Var,
    h_img: Var,
    gate_preact_offset: Option<f64>,
) -> Result<(Var, Var, Var, Var)> {
    let (h_attn, weights) = branch_selective_attention_graph(graph, bound, branch, h_text, h_img)?;
    let b = format!("branch.{}.gate", branch.key());
    let u = bound.var(graph, &format!("{b}.u"));
    let v = bound.var(graph, &format!("{b}.v"));
    let (h_out, gate) = gated_fusion_graph(graph, h_text, h_attn, u, v, gate_preact_offset)?;
    Ok((h_out, gate, weights, h_attn))
}
