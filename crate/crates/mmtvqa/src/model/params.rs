//! Named parameter tensors.
//!
//! Parameters live in an insertion-ordered store; names are dotted paths
//! whose first segment is the group: `text_encoder.*` (shared by both
//! branches), `image_projection.*` (shared), `branch.mmt.*`, `branch.vqa.*`.
//! The manifest order of a checkpoint is exactly this insertion order.

use indexmap::IndexMap;
use ndarray::{ArcArray2, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::model::config::ModelConfig;

/// Which branch of the network a tensor (or a forward pass) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Mmt,
    Vqa,
}

impl Branch {
    pub fn key(&self) -> &'static str {
        match self {
            Branch::Mmt => "mmt",
            Branch::Vqa => "vqa",
        }
    }
}

/// Insertion-ordered collection of named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    tensors: IndexMap<String, ArcArray2<f64>>,
}

impl ParamStore {
    pub fn empty() -> Self {
        ParamStore { tensors: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        debug_assert!(!self.tensors.contains_key(&name), "duplicate tensor {name}");
        self.tensors.insert(name, value.into_shared());
    }

    pub fn get(&self, name: &str) -> Option<&ArcArray2<f64>> {
        self.tensors.get(name)
    }

    /// Replace a tensor's value, keeping its position. Shape must match.
    pub fn set(&mut self, name: &str, value: Array2<f64>) -> Result<()> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::Incompatible(format!("unknown tensor {name}")))?;
        if slot.dim() != value.dim() {
            return Err(Error::Shape {
                context: format!("set {name}"),
                left: format!("{:?}", slot.dim()),
                right: format!("{:?}", value.dim()),
            });
        }
        *slot = value.into_shared();
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArcArray2<f64>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    /// Names starting with `prefix.`, in store order.
    pub fn group(&self, prefix: &str) -> Vec<&str> {
        self.names().filter(|n| n.starts_with(prefix)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Per-graph cache binding store tensors to graph inputs, so each tensor
/// enters a graph once and its gradient can be read back by name.
pub struct BoundParams<'s> {
    store: &'s ParamStore,
    vars: IndexMap<String, Var>,
}

impl<'s> BoundParams<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        BoundParams { store, vars: IndexMap::new() }
    }

    pub fn var(&mut self, graph: &mut Graph, name: &str) -> Var {
        if let Some(&v) = self.vars.get(name) {
            return v;
        }
        let tensor = self
            .store
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing from store"))
            .clone();
        let v = graph.input(tensor);
        self.vars.insert(name.to_string(), v);
        v
    }

    /// (name, var) pairs for every parameter this graph touched.
    pub fn bound(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Weight matrix scaled by fan-in (rows, since activations multiply from
/// the left as `x . W`).
fn init_weight(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, rows: usize, cols: usize) {
    let bound = (1.0 / rows as f64).sqrt();
    store.insert(name, uniform(rng, rows, cols, bound));
}

/// Embedding table: rows are vocab entries, scale follows the vector dim.
fn init_embedding(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, vocab: usize, dim: usize) {
    let bound = (1.0 / dim as f64).sqrt();
    store.insert(name, uniform(rng, vocab, dim, bound));
}

fn init_zero_row(store: &mut ParamStore, name: &str, cols: usize) {
    store.insert(name, Array2::zeros((1, cols)));
}

fn init_ones_row(store: &mut ParamStore, name: &str, cols: usize) {
    store.insert(name, Array2::from_elem((1, cols), 1.0));
}

fn init_attention(store: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, d: usize) {
    for proj in ["wq", "wk", "wv", "wo"] {
        init_weight(store, rng, &format!("{prefix}.{proj}"), d, d);
    }
    for bias in ["bq", "bk", "bv", "bo"] {
        init_zero_row(store, &format!("{prefix}.{bias}"), d);
    }
}

fn init_layer_norm(store: &mut ParamStore, prefix: &str, d: usize) {
    init_ones_row(store, &format!("{prefix}.gain"), d);
    init_zero_row(store, &format!("{prefix}.bias"), d);
}

fn init_ffn(store: &mut ParamStore, rng: &mut ChaCha8Rng, prefix: &str, d: usize, ffn: usize) {
    init_weight(store, rng, &format!("{prefix}.w1"), d, ffn);
    init_zero_row(store, &format!("{prefix}.b1"), ffn);
    init_weight(store, rng, &format!("{prefix}.w2"), ffn, d);
    init_zero_row(store, &format!("{prefix}.b2"), d);
}

/// Build and initialize every tensor of the model in manifest order:
/// one shared text encoder, one shared image projection, then the two
/// branches (selective attention projections, gate matrices, decoder stack,
/// output projection), each drawn independently from the seeded stream.
pub fn init_params(config: &ModelConfig) -> ParamStore {
    let mut store = ParamStore::empty();
    let rng = &mut ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.d_model;

    init_embedding(&mut store, rng, "text_encoder.embed.table", config.text_vocab, d);
    for l in 0..config.encoder_layers {
        let p = format!("text_encoder.layer{l}");
        init_attention(&mut store, rng, &format!("{p}.self_attn"), d);
        init_layer_norm(&mut store, &format!("{p}.ln1"), d);
        init_ffn(&mut store, rng, &format!("{p}.ffn"), d, config.ffn_dim);
        init_layer_norm(&mut store, &format!("{p}.ln2"), d);
    }

    init_weight(&mut store, rng, "image_projection.w", config.d_v, d);

    for branch in [Branch::Mmt, Branch::Vqa] {
        let b = format!("branch.{}", branch.key());
        for proj in ["wq", "wk", "wv"] {
            init_weight(&mut store, rng, &format!("{b}.sel_attn.{proj}"), d, d);
        }
        init_weight(&mut store, rng, &format!("{b}.gate.u"), d, d);
        init_weight(&mut store, rng, &format!("{b}.gate.v"), d, d);

        let vocab = match branch {
            Branch::Mmt => config.target_vocab,
            Branch::Vqa => config.answer_vocab,
        };
        init_embedding(&mut store, rng, &format!("{b}.decoder.embed.table"), vocab, d);
        for l in 0..config.decoder_layers {
            let p = format!("{b}.decoder.layer{l}");
            init_attention(&mut store, rng, &format!("{p}.self_attn"), d);
            init_layer_norm(&mut store, &format!("{p}.ln1"), d);
            init_attention(&mut store, rng, &format!("{p}.cross_attn"), d);
            init_layer_norm(&mut store, &format!("{p}.ln2"), d);
            init_ffn(&mut store, rng, &format!("{p}.ffn"), d, config.ffn_dim);
            init_layer_norm(&mut store, &format!("{p}.ln3"), d);
        }
        init_weight(&mut store, rng, &format!("{b}.decoder.out_proj.w"), d, vocab);
        init_zero_row(&mut store, &format!("{b}.decoder.out_proj.b"), vocab);
    }

    store
}
