//! Temporal quantization and nearest-electrode rasterization of epochs into
//! sequences of topographic maps.

mod assignment;
mod cache;
mod pgm;
mod sequence;

use thiserror::Error;

pub use assignment::{build_assignment, scale_to_grid, PixelAssignment};
pub use cache::{decode_sequences, encode_sequence, read_sequence_file, write_sequence_file, CACHE_VERSION};
pub use pgm::{encode_pgm, export_image};
pub use sequence::{
    build_sequence, build_sequence_with, quantize_time, rasterize, zscore_channels, Normalization,
    TopomapFrame, TopomapSequence,
};

#[derive(Debug, Error)]
pub enum TopomapError {
    #[error("{samples} samples are not divisible into {n_frames} frames")]
    NotDivisible { samples: usize, n_frames: usize },
    #[error("all coordinates share one value along the {axis} axis")]
    DegenerateAxis { axis: &'static str },
    #[error("grid must be at least 2x2, got {h}x{w}")]
    GridTooSmall { h: usize, w: usize },
    #[error("electrodes {first} and {second} both map to pixel ({row}, {col}); increase the grid resolution")]
    PixelCollision { first: usize, second: usize, row: usize, col: usize },
    #[error("expected {expected} values, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("bad cache data: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
