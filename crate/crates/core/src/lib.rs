//! EEG motor-imagery classification through sequences of topographic maps.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`] reads EDF/EDF+ recordings, TAL annotations and electrode
//!   montages, and cuts labeled fixed-length epochs.
//! * [`coords`] flattens 3D electrode positions to 2D (parallel projection,
//!   azimuthal equidistant projection, or exact t-SNE from an SVD start).
//! * [`topomap`] averages epochs over fixed windows in time and rasterizes each
//!   time slice onto a pixel grid by nearest-electrode assignment.
//! * [`augment`] provides Gaussian signal noise, MixUp and CutMix.
//! * [`model`] is the classifier: a per-frame convolutional extractor,
//!   sinusoidal positional encoding, stacked ST-pooling blocks and a softmax
//!   head, with hand-written backpropagation and Adam.
//! * [`harness`] splits subjects into folds, trains, selects on validation
//!   accuracy, evaluates, and runs ablations.
//!
//! Batch-level work is dispatched through [`exec::Execution`]; with the
//! `parallel` feature (default) it fans out over rayon, otherwise it runs
//! sequentially. Results are identical either way.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod coords;
mod error;
pub mod exec;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod topomap;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
