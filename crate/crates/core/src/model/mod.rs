//! ST-pooling classifier with hand-written backpropagation.
//!
//! Per sample: every frame goes through a small strided-conv extractor and is
//! average-pooled to a length-L vector; the N vectors are stacked, summed with
//! sinusoidal positional encoding, passed through pre-norm ST-pooling blocks,
//! normalized, averaged over time and classified by an affine softmax head.

mod adam;
mod checkpoint;
mod config;
mod extractor;
pub mod layers;
mod network;
mod params;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{Mixer, ModelConfig};
pub use extractor::{make_extractor, ConvExtractor};
pub use layers::{pool2d, positional_encoding};
pub use network::{
    forward, forward_features, loss_and_grad, predict, stpool_block, BatchGrad, Mode, StPoolModel,
};
pub use params::{BlockParams, ConvParams, ExtractorParams, ModelParams, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    ConfigInvalid(String),
    #[error("positional encoding needs an even feature length, got {0}")]
    OddDimension(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("checkpoint version {found} not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
