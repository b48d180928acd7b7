use std::path::Path;

use super::{TopomapError, TopomapFrame};

/// 8-bit binary PGM: values mapped linearly from the frame's [min, max] onto
/// [0, 255]; a constant frame maps to 128.
pub fn encode_pgm(frame: &TopomapFrame) -> Vec<u8> {
    let (lo, hi) = frame
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut out = format!("P5 {} {} 255\n", frame.w, frame.h).into_bytes();
    if hi > lo {
        out.extend(frame.values.iter().map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8));
    } else {
        out.extend(std::iter::repeat_n(128u8, frame.values.len()));
    }
    out
}

pub fn export_image(frame: &TopomapFrame, path: &Path) -> Result<(), TopomapError> {
    std::fs::write(path, encode_pgm(frame))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: Vec<f64>, h: usize, w: usize) -> TopomapFrame {
        TopomapFrame { h, w, values }
    }

    #[test]
    fn constant_frame_is_mid_gray() {
        let bytes = encode_pgm(&frame(vec![0.3; 16], 4, 4));
        assert!(bytes.ends_with(&[128; 16]));
    }

    #[test]
    fn two_values_hit_the_endpoints() {
        let bytes = encode_pgm(&frame(vec![-1.0, 2.0, 2.0, -1.0], 2, 2));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 255, 255, 0]);
    }

    #[test]
    fn header_and_payload_size() {
        let bytes = encode_pgm(&frame((0..1024).map(f64::from).collect(), 32, 32));
        let header = b"P5 32 32 255\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 1024);
    }

    #[test]
    fn export_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let f = frame(vec![1.0, 2.0], 1, 2);
        export_image(&f, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), encode_pgm(&f));
        assert!(export_image(&f, &dir.path().join("missing/f.pgm")).is_err());
    }
}
