use std::fmt;
use std::str::FromStr;

use super::ModelError;

/// Token mixer inside each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mixer {
    /// pool2d(LN(x)) − LN(x) over the time × feature plane.
    #[default]
    StPool,
    /// No token mixing: the first residual branch is disabled (its LayerScale
    /// is held at zero).
    None,
}

impl fmt::Display for Mixer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mixer::StPool => "stpool",
            Mixer::None => "none",
        })
    }
}

impl FromStr for Mixer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stpool" => Ok(Mixer::StPool),
            "none" => Ok(Mixer::None),
            _ => Err(format!("unknown mixer {s:?} (expected stpool or none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Extractor depth; feature length is 2^(stage−1)·c1.
    pub stage: usize,
    pub c1: usize,
    pub n_frames: usize,
    pub h: usize,
    pub w: usize,
    pub num_blocks: usize,
    /// Odd side length of the ST-pooling window.
    pub pool_kernel: usize,
    pub mlp_ratio: usize,
    pub num_classes: usize,
    pub layerscale_init: f64,
    /// Dropout on the MLP branch output, training only.
    pub drop_rate: f64,
    /// One extractor for all frames instead of one per frame.
    pub shared_extractor: bool,
    pub mixer: Mixer,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            stage: 2,
            c1: 8,
            n_frames: 60,
            h: 32,
            w: 32,
            num_blocks: 4,
            pool_kernel: 3,
            mlp_ratio: 4,
            num_classes: 4,
            layerscale_init: 1e-5,
            drop_rate: 0.1,
            shared_extractor: true,
            mixer: Mixer::StPool,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Feature length L = 2^(stage−1)·c1.
    pub fn feature_len(&self) -> usize {
        (1usize << (self.stage - 1)) * self.c1
    }

    pub fn hidden_len(&self) -> usize {
        self.mlp_ratio * self.feature_len()
    }

    /// Number of extractor parameter sets.
    pub fn n_extractors(&self) -> usize {
        if self.shared_extractor {
            1
        } else {
            self.n_frames
        }
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w
    }

    pub fn input_len(&self) -> usize {
        self.n_frames * self.h * self.w
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::ConfigInvalid(m));
        if self.stage < 1 || self.stage > 16 {
            return bad(format!("stage {} outside [1, 16]", self.stage));
        }
        if self.c1 == 0 {
            return bad("c1 must be positive".into());
        }
        if !self.feature_len().is_multiple_of(2) {
            return bad(format!("feature length {} must be even for positional encoding", self.feature_len()));
        }
        if self.pool_kernel.is_multiple_of(2) {
            return bad(format!("pool_kernel {} must be odd", self.pool_kernel));
        }
        if self.n_frames == 0 || self.h == 0 || self.w == 0 {
            return bad("n_frames, h and w must be positive".into());
        }
        if self.mlp_ratio == 0 {
            return bad("mlp_ratio must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2".into());
        }
        if !(self.layerscale_init > 0.0 && self.layerscale_init.is_finite()) {
            return bad("layerscale_init must be positive".into());
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!("drop_rate {} outside [0, 1)", self.drop_rate));
        }
        Ok(())
    }
}
