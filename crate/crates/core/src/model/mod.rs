//! The multiview transformer: spectral encoder-decoder, quadrant-pooling
//! tokenizer with a global token, one multi-head attention block with a
//! residual connection, a linear feature head and a linear classifier.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use forward::{
    assemble_tokens, attention_head, feature_and_classify, forward, multi_head, predict, sed_forward,
    tokenize, forward_graph, ForwardNodes, ModelNodes,
};
pub use params::{AffineParams, ConvParams, HeadParams, ModelParams, INIT_STREAM};
