//! Binary checkpoint: `STPM` magic, u16 version, the model config, then every
//! tensor in canonical order as rank (u8), dims (u32 each) and f64 payload.
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::config::{Mixer, ModelConfig};
use super::network::StPoolModel;
use super::params::{ModelParams, Tensor};
use super::ModelError;

pub const CHECKPOINT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"STPM";

pub fn encode_checkpoint(model: &StPoolModel) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [c.stage, c.c1, c.n_frames, c.h, c.w, c.num_blocks, c.pool_kernel, c.mlp_ratio, c.num_classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.layerscale_init.to_le_bytes());
    out.extend_from_slice(&c.drop_rate.to_le_bytes());
    out.push(c.shared_extractor as u8);
    out.push(match c.mixer {
        Mixer::StPool => 0,
        Mixer::None => 1,
    });
    out.extend_from_slice(&c.seed.to_le_bytes());
    for t in model.params.tensors() {
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        if self.buf.len() - self.pos < n {
            return Err(ModelError::Truncated(format!("{what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, ModelError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ModelError> {
        Ok(f64::from_bits(self.u64(what)?))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<StPoolModel, ModelError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let mut dims = [0usize; 9];
    for d in &mut dims {
        *d = r.u32("config")?;
    }
    let layerscale_init = r.f64("config")?;
    let drop_rate = r.f64("config")?;
    let shared_extractor = r.u8("config")? != 0;
    let mixer = match r.u8("config")? {
        0 => Mixer::StPool,
        1 => Mixer::None,
        m => return Err(ModelError::ConfigInvalid(format!("unknown mixer code {m}"))),
    };
    let seed = r.u64("config")?;
    let config = ModelConfig {
        stage: dims[0],
        c1: dims[1],
        n_frames: dims[2],
        h: dims[3],
        w: dims[4],
        num_blocks: dims[5],
        pool_kernel: dims[6],
        mlp_ratio: dims[7],
        num_classes: dims[8],
        layerscale_init,
        drop_rate,
        shared_extractor,
        mixer,
        seed,
    };
    config.validate()?;

    let mut params = ModelParams::zeros(&config);
    for (i, t) in params.tensors_mut().into_iter().enumerate() {
        let rank = r.u8("tensor rank")? as usize;
        let shape = (0..rank).map(|_| r.u32("tensor shape")).collect::<Result<Vec<_>, _>>()?;
        if shape != t.shape {
            return Err(ModelError::ShapeMismatch(format!("tensor {i}: stored {shape:?}, config implies {:?}", t.shape)));
        }
        let raw = r.take(t.len() * 8, "tensor data")?;
        *t = Tensor {
            shape,
            data: raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        };
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Truncated(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    StPoolModel::from_params(config, params)
}

pub fn save_checkpoint(model: &StPoolModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<StPoolModel, ModelError> {
    decode_checkpoint(&fs::read(path)?)
}

/// Load and insist that the stored config matches `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<StPoolModel, ModelError> {
    let m = load_checkpoint(path)?;
    if &m.config != expected {
        return Err(ModelError::ShapeMismatch(format!(
            "checkpoint config {:?} differs from requested {:?}",
            m.config, expected
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> StPoolModel {
        StPoolModel::new(ModelConfig {
            n_frames: 3,
            h: 8,
            w: 8,
            stage: 2,
            c1: 2,
            num_blocks: 2,
            num_classes: 3,
            seed: 9,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = encode_checkpoint(&m);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corruption_detected() {
        let bytes = encode_checkpoint(&model());
        assert!(matches!(decode_checkpoint(b"XXXX"), Err(ModelError::BadMagic)));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(ModelError::Truncated(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_checkpoint(&extra), Err(ModelError::Truncated(_))));
        let mut v = bytes;
        v[4] = 7;
        assert!(matches!(decode_checkpoint(&v), Err(ModelError::VersionMismatch { found: 7, .. })));
    }

    #[test]
    fn config_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model();
        save_checkpoint(&m, &path).unwrap();
        let other = ModelConfig { num_blocks: 1, ..m.config.clone() };
        assert!(matches!(load_checkpoint_for(&path, &other), Err(ModelError::ShapeMismatch(_))));
        assert_eq!(load_checkpoint_for(&path, &m.config).unwrap(), m);
    }
}
