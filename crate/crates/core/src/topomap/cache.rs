//! Binary sequence cache.
//!
//! One record: magic `TOPO`, version u16, then N, H, W as u32, N·H·W f32
//! pixel values, the label as u16 and the subject id as u16, all little
//! endian. A cache file is any number of records back to back.

use std::path::Path;

use super::{TopomapError, TopomapSequence};

const MAGIC: &[u8; 4] = b"TOPO";
pub const CACHE_VERSION: u16 = 1;

pub fn encode_sequence(seq: &TopomapSequence, out: &mut Vec<u8>) {
    let (n, h, w) = seq.dims();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for d in [n, h, w] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for f in &seq.frames {
        for &v in &f.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(seq.label as u16).to_le_bytes());
    out.extend_from_slice(&(seq.subject_id as u16).to_le_bytes());
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], TopomapError> {
    let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        TopomapError::BadCache(format!("record truncated at byte {} (needs {n} more)", *pos))
    })?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

fn u32_at(bytes: &[u8], pos: &mut usize) -> Result<usize, TopomapError> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4)?.try_into().unwrap()) as usize)
}

fn u16_at(bytes: &[u8], pos: &mut usize) -> Result<u16, TopomapError> {
    Ok(u16::from_le_bytes(take(bytes, pos, 2)?.try_into().unwrap()))
}

pub fn decode_sequences(bytes: &[u8]) -> Result<Vec<TopomapSequence>, TopomapError> {
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let start = pos;
        if take(bytes, &mut pos, 4)? != MAGIC {
            return Err(TopomapError::BadCache(format!("bad magic at byte {start}")));
        }
        let version = u16_at(bytes, &mut pos)?;
        if version != CACHE_VERSION {
            return Err(TopomapError::BadCache(format!("unsupported version {version}")));
        }
        let (n, h, w) = (u32_at(bytes, &mut pos)?, u32_at(bytes, &mut pos)?, u32_at(bytes, &mut pos)?);
        if n == 0 || h == 0 || w == 0 {
            return Err(TopomapError::BadCache(format!("empty dimensions {n}x{h}x{w}")));
        }
        let count = n
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| TopomapError::BadCache("dimension overflow".into()))?;
        let payload = take(bytes, &mut pos, count * 4)?;
        let data: Vec<f64> =
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        let label = u16_at(bytes, &mut pos)? as usize;
        let subject = u16_at(bytes, &mut pos)? as u32;
        out.push(TopomapSequence::from_flat(&data, n, h, w, label, subject));
    }
    Ok(out)
}

pub fn write_sequence_file(path: &Path, seqs: &[TopomapSequence]) -> Result<(), TopomapError> {
    let mut buf = Vec::new();
    for s in seqs {
        encode_sequence(s, &mut buf);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_sequence_file(path: &Path) -> Result<Vec<TopomapSequence>, TopomapError> {
    decode_sequences(&std::fs::read(path)?)
}
