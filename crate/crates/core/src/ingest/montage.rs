use std::collections::HashSet;

use super::IngestError;

const SHIPPED_1010: &str = include_str!("../../assets/montage_1010_64.csv");

/// Labeled 3D electrode positions on a unit-sphere head model.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeMontage {
    pub labels: Vec<String>,
    pub coords3d: Vec<[f64; 3]>,
}

impl ElectrodeMontage {
    pub fn new(labels: Vec<String>, coords3d: Vec<[f64; 3]>) -> Result<Self, IngestError> {
        assert_eq!(labels.len(), coords3d.len(), "label/coordinate count mismatch");
        if labels.is_empty() {
            return Err(IngestError::EmptyMontage);
        }
        let mut seen = HashSet::new();
        for (i, (label, p)) in labels.iter().zip(&coords3d).enumerate() {
            if !seen.insert(label.as_str()) {
                return Err(IngestError::DuplicateLabel { label: label.clone(), line: i + 2 });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::NonFiniteCoordinate { line: i + 2, text: format!("{p:?}") });
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(0.5..=1.5).contains(&norm) {
                return Err(IngestError::CoordinateOutOfBand { label: label.clone(), norm });
            }
        }
        Ok(ElectrodeMontage { labels, coords3d })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let key = normalize_label(label);
        self.labels.iter().position(|l| normalize_label(l) == key)
    }

    /// Keep only the listed electrodes, in the given order.
    pub fn subset(&self, labels: &[&str]) -> Result<Self, IngestError> {
        let mut out_labels = Vec::with_capacity(labels.len());
        let mut out_coords = Vec::with_capacity(labels.len());
        for &l in labels {
            let i = self.index_of(l).ok_or_else(|| IngestError::MissingChannel { label: l.to_string() })?;
            out_labels.push(self.labels[i].clone());
            out_coords.push(self.coords3d[i]);
        }
        ElectrodeMontage::new(out_labels, out_coords)
    }
}

/// Canonical form of an electrode label: PhysioNet pads labels with dots
/// ("Fc5.", "Cz..") and uses mixed case.
pub fn normalize_label(label: &str) -> String {
    label.trim().trim_end_matches('.').to_ascii_uppercase()
}

/// Parse "label,x,y,z" lines following a single header line.
pub fn load_montage(text: &str) -> Result<ElectrodeMontage, IngestError> {
    let mut labels = Vec::new();
    let mut coords = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IngestError::BadArity { line: line_no, found: fields.len() });
        }
        let label = fields[0].to_string();
        if !seen.insert(label.clone()) {
            return Err(IngestError::DuplicateLabel { label, line: line_no });
        }
        let mut p = [0.0; 3];
        for (k, f) in fields[1..].iter().enumerate() {
            p[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NonFiniteCoordinate { line: line_no, text: f.to_string() })?;
        }
        labels.push(label);
        coords.push(p);
    }
    ElectrodeMontage::new(labels, coords)
}

/// The 64-electrode 10-10 montage in PhysioNet EEGMMIDB channel order.
pub fn default_montage() -> ElectrodeMontage {
    load_montage(SHIPPED_1010).expect("shipped montage is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_electrode() {
        let m = load_montage("label,x,y,z\nCz,0,0,1\n").unwrap();
        assert_eq!(m.labels, vec!["Cz"]);
        assert_eq!(m.coords3d, vec![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn duplicate_label() {
        let err = load_montage("label,x,y,z\nC3,0,0,1\nC3,1,0,0\n").unwrap_err();
        assert_eq!(err, IngestError::DuplicateLabel { label: "C3".into(), line: 3 });
    }

    #[test]
    fn bad_arity_and_non_finite() {
        assert!(matches!(load_montage("h\nCz,0,1\n"), Err(IngestError::BadArity { line: 2, found: 3 })));
        assert!(matches!(load_montage("h\nCz,0,nan,1\n"), Err(IngestError::NonFiniteCoordinate { .. })));
        assert!(matches!(load_montage("h\nCz,0,x,1\n"), Err(IngestError::NonFiniteCoordinate { .. })));
        assert!(matches!(load_montage("h\nCz,0,0,3\n"), Err(IngestError::CoordinateOutOfBand { .. })));
    }

    #[test]
    fn shipped_montage_has_64_unique_unit_electrodes() {
        let m = default_montage();
        assert_eq!(m.len(), 64);
        assert_eq!(m.labels[0], "FC5");
        assert_eq!(m.labels[63], "Iz");
        for p in &m.coords3d {
            let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-5);
        }
        assert_eq!(m.index_of("Fc5."), Some(0));
        assert_eq!(m.index_of("Cz.."), m.index_of("CZ"));
    }
}
