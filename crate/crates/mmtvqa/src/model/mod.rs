//! The multitask network: shared text encoder, shared image projection,
//! per-branch selective attention and gated fusion, two decoders.

pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod encoder;
pub mod forward;
pub mod fusion;
pub mod layers;
pub mod params;
pub mod translate;

pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest};
pub use config::ModelConfig;
pub use decoder::decode;
pub use encoder::{encode_text, EncoderOutput};
pub use forward::{Diagnostics, ForwardPass, ForwardResult, Model};
pub use fusion::{gated_fusion, project_image, selective_attention, FusionOutput};
pub use layers::ForwardMode;
pub use params::{Branch, BoundParams, ParamStore};
pub use translate::{beam_translate, greedy_translate};
