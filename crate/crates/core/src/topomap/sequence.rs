use std::fmt;
use std::str::FromStr;

use super::{PixelAssignment, TopomapError};
use crate::exec::Execution;
use crate::ingest::Epoch;

/// One H×W map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TopomapFrame {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
}

impl TopomapFrame {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.w + col]
    }
}

/// Chronological frames for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TopomapSequence {
    pub frames: Vec<TopomapFrame>,
    pub label: usize,
    pub subject_id: u32,
}

impl TopomapSequence {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// (N, H, W)
    pub fn dims(&self) -> (usize, usize, usize) {
        let f = &self.frames[0];
        (self.frames.len(), f.h, f.w)
    }

    /// Frames concatenated into one N·H·W buffer.
    pub fn to_flat(&self) -> Vec<f64> {
        self.frames.iter().flat_map(|f| f.values.iter().copied()).collect()
    }

    pub fn from_flat(data: &[f64], n: usize, h: usize, w: usize, label: usize, subject_id: u32) -> Self {
        assert_eq!(data.len(), n * h * w, "flat buffer does not match {n}x{h}x{w}");
        TopomapSequence {
            frames: data.chunks_exact(h * w).map(|c| TopomapFrame { h, w, values: c.to_vec() }).collect(),
            label,
            subject_id,
        }
    }
}

/// Per-channel normalization applied to raw signals before mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Zero mean, unit variance per channel over the epoch; constant channels become 0.
    #[default]
    ZScore,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::ZScore => "zscore",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zscore" => Ok(Normalization::ZScore),
            "none" => Ok(Normalization::None),
            _ => Err(format!("unknown normalization {s:?} (expected zscore or none)")),
        }
    }
}

/// Average each channel over consecutive non-overlapping windows of
/// `samples / n_frames` samples.
pub fn quantize_time(signals: &[Vec<f64>], n_frames: usize) -> Result<Vec<Vec<f64>>, TopomapError> {
    let samples = signals.first().map_or(0, Vec::len);
    if n_frames == 0 || !samples.is_multiple_of(n_frames) || samples == 0 {
        return Err(TopomapError::NotDivisible { samples, n_frames });
    }
    let s = samples / n_frames;
    Ok(signals
        .iter()
        .map(|ch| ch.chunks_exact(s).map(|w| w.iter().sum::<f64>() / s as f64).collect())
        .collect())
}

pub fn zscore_channels(signals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    signals
        .iter()
        .map(|ch| {
            let n = ch.len() as f64;
            let mean = ch.iter().sum::<f64>() / n;
            let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let scale = ch.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            // Rounding leaves a tiny spread on constant channels; treat it as zero.
            if var.sqrt() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                vec![0.0; ch.len()]
            } else {
                let sd = var.sqrt();
                ch.iter().map(|v| (v - mean) / sd).collect()
            }
        })
        .collect()
}

/// Paint each pixel with the value of its owning electrode.
pub fn rasterize(values: &[f64], a: &PixelAssignment) -> Result<TopomapFrame, TopomapError> {
    if values.len() != a.n_electrodes() {
        return Err(TopomapError::ArityMismatch { expected: a.n_electrodes(), got: values.len() });
    }
    Ok(TopomapFrame { h: a.grid_h, w: a.grid_w, values: a.owner.iter().map(|&o| values[o]).collect() })
}

pub fn build_sequence(
    epoch: &Epoch,
    a: &PixelAssignment,
    n_frames: usize,
    norm: Normalization,
) -> Result<TopomapSequence, TopomapError> {
    build_sequence_with(epoch, a, n_frames, norm, Execution::Sequential)
}

/// Normalize, quantize, then rasterize every frame (frames may be rendered in
/// parallel; the output does not depend on `exec`).
pub fn build_sequence_with(
    epoch: &Epoch,
    a: &PixelAssignment,
    n_frames: usize,
    norm: Normalization,
    exec: Execution,
) -> Result<TopomapSequence, TopomapError> {
    if epoch.n_channels() != a.n_electrodes() {
        return Err(TopomapError::ArityMismatch { expected: a.n_electrodes(), got: epoch.n_channels() });
    }
    let normalized;
    let signals = match norm {
        Normalization::ZScore => {
            normalized = zscore_channels(&epoch.signals);
            &normalized
        }
        Normalization::None => &epoch.signals,
    };
    let q = quantize_time(signals, n_frames)?;
    let frames = exec.try_map_range(n_frames, |t| {
        let column: Vec<f64> = q.iter().map(|ch| ch[t]).collect();
        rasterize(&column, a)
    })?;
    Ok(TopomapSequence { frames, label: epoch.label, subject_id: epoch.subject_id })
}
