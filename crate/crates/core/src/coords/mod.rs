//! 3D electrode positions to 2D map coordinates.

mod neighbors;
mod projection;
mod svd;
pub mod tsne;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::ElectrodeMontage;

pub use neighbors::neighbor_preservation;
pub use projection::{azimuthal_equidistant, parallel_projection};
pub use svd::svd_init;
pub use tsne::{tsne, tsne_with_trace, TsneParams, TsneTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordError {
    #[error("electrode {label:?} is antipodal to the projection center")]
    AntipodalPoint { label: String },
    #[error("coordinates have rank below 2 after centering (singular values {singular_values:?})")]
    DegenerateRankBelow2 { singular_values: Vec<f64> },
    #[error("perplexity {perplexity} outside (1, {upper}) for {n} electrodes")]
    PerplexityOutOfRange { perplexity: f64, upper: f64, n: usize },
    #[error("invalid t-SNE parameter: {0}")]
    InvalidParams(String),
    #[error("bandwidth search for point {point} did not converge in 200 bisections")]
    NonConvergedBandwidth { point: usize },
    #[error("k = {k} outside [1, {max}] for {n} electrodes")]
    KOutOfRange { k: usize, max: usize, n: usize },
    #[error("map has {map} rows but montage has {montage} electrodes")]
    SizeMismatch { map: usize, montage: usize },
    #[error("need at least {needed} electrodes, have {have}")]
    TooFewElectrodes { needed: usize, have: usize },
    #[error("malformed coordinate CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformMethod {
    Parallel,
    Azimuthal,
    SvdInit,
    Tsne,
}

impl TransformMethod {
    pub fn tag(self) -> &'static str {
        match self {
            TransformMethod::Parallel => "parallel",
            TransformMethod::Azimuthal => "azimuthal",
            TransformMethod::SvdInit => "svd",
            TransformMethod::Tsne => "tsne",
        }
    }
}

impl fmt::Display for TransformMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TransformMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(TransformMethod::Parallel),
            "azimuthal" => Ok(TransformMethod::Azimuthal),
            "svd" => Ok(TransformMethod::SvdInit),
            "tsne" => Ok(TransformMethod::Tsne),
            _ => Err(format!("unknown transform {s:?} (expected parallel, azimuthal or tsne)")),
        }
    }
}

/// Per-electrode 2D coordinates produced by a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap2D {
    pub labels: Vec<String>,
    pub coords2d: Vec<[f64; 2]>,
    pub method: TransformMethod,
}

impl CoordinateMap2D {
    pub fn len(&self) -> usize {
        self.coords2d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords2d.is_empty()
    }

    /// "label,u,v" CSV preceded by a `# method=<tag>` comment line. Values use
    /// the shortest representation that round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# method={}\nlabel,u,v\n", self.method.tag());
        for (l, [u, v]) in self.labels.iter().zip(&self.coords2d) {
            out.push_str(&format!("{l},{u},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CoordError> {
        let mut method = None;
        let mut labels = Vec::new();
        let mut coords2d = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| CoordError::Csv { line: line_no, reason };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("method=") {
                    method = Some(tag.trim().parse().map_err(err)?);
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", f.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
            let (Some(u), Some(v)) = (parse(f[1]), parse(f[2])) else {
                return Err(err("non-finite coordinate".into()));
            };
            labels.push(f[0].trim().to_string());
            coords2d.push([u, v]);
        }
        let method = method.ok_or(CoordError::Csv { line: 1, reason: "missing `# method=` line".into() })?;
        Ok(CoordinateMap2D { labels, coords2d, method })
    }
}

/// Run the named transform with default t-SNE parameters where applicable.
pub fn transform(
    montage: &ElectrodeMontage,
    method: TransformMethod,
    params: &TsneParams,
) -> Result<CoordinateMap2D, CoordError> {
    match method {
        TransformMethod::Parallel => Ok(parallel_projection(montage)),
        TransformMethod::Azimuthal => azimuthal_equidistant(montage),
        TransformMethod::SvdInit => svd_init(montage),
        TransformMethod::Tsne => tsne(montage, params),
    }
}

pub(crate) fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::default_montage;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = default_montage();
        let map = azimuthal_equidistant(&m).unwrap();
        let text = map.to_csv();
        assert!(text.starts_with("# method=azimuthal\nlabel,u,v\n"));
        assert_eq!(CoordinateMap2D::from_csv(&text).unwrap(), map);
    }

    #[test]
    fn csv_without_method_rejected() {
        assert!(CoordinateMap2D::from_csv("label,u,v\nCz,0,0\n").is_err());
    }
}
