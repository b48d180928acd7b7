//! Synthetic motor-imagery-like data with a known, learnable class structure.
//!
//! Each class is a fixed spatial pattern over the electrodes modulating a
//! common sinusoid; white Gaussian noise is added per sample. With
//! `separation` s and noise σ, the per-electrode class means differ by s·σ.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand_distr::{Distribution, StandardNormal};

use crate::ingest::{
    default_montage, encode_tal, write_edf, EdfHeader, ElectrodeMontage, Epoch, Event, IngestError, SignalHeader,
    ANNOTATION_LABEL,
};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub epochs_per_subject: usize,
    pub n_electrodes: usize,
    pub sample_rate_hz: f64,
    pub window_samples: usize,
    pub freq_hz: f64,
    pub noise_sigma: f64,
    /// Class-mean separation in units of `noise_sigma`.
    pub separation: f64,
    /// First subject id. The default starts above the public dataset's ids so
    /// that no synthetic subject collides with an excluded id.
    pub first_subject: u32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_subjects: 40,
            epochs_per_subject: 10,
            n_electrodes: 32,
            sample_rate_hz: 160.0,
            window_samples: 320,
            freq_hz: 2.0,
            noise_sigma: 1.0,
            separation: 5.0,
            first_subject: 1000,
            seed: 0,
        }
    }
}

/// `n` electrodes spread evenly through the shipped 64-channel montage.
pub fn synthetic_montage(n: usize) -> Result<ElectrodeMontage, IngestError> {
    let full = default_montage();
    if n == 0 || n > full.len() {
        return Err(IngestError::EmptyMontage);
    }
    let idx: Vec<usize> = (0..n).map(|i| i * full.len() / n).collect();
    ElectrodeMontage::new(idx.iter().map(|&i| full.labels[i].clone()).collect(), idx.iter().map(|&i| full.coords3d[i]).collect())
}

/// Two-class amplitude patterns: class 0 is positive over the left
/// hemisphere (x ≤ 0) and negative over the right; class 1 is its negation.
pub fn class_patterns(montage: &ElectrodeMontage, half_gap: f64) -> [Vec<f64>; 2] {
    let m0: Vec<f64> = montage.coords3d.iter().map(|c| if c[0] <= 0.0 { half_gap } else { -half_gap }).collect();
    let m1 = m0.iter().map(|v| -v).collect();
    [m0, m1]
}

/// Balanced two-class epochs (labels alternate 0, 1, ...) for consecutive
/// subject ids, plus the montage they are defined on.
pub fn synthetic_epochs(cfg: &SyntheticConfig) -> Result<(ElectrodeMontage, Vec<Epoch>), IngestError> {
    let montage = synthetic_montage(cfg.n_electrodes)?;
    let patterns = class_patterns(&montage, 0.5 * cfg.separation * cfg.noise_sigma);
    let carrier: Vec<f64> =
        (0..cfg.window_samples).map(|t| (2.0 * PI * cfg.freq_hz * t as f64 / cfg.sample_rate_hz).sin()).collect();
    let mut epochs = Vec::with_capacity(cfg.n_subjects * cfg.epochs_per_subject);
    for s in 0..cfg.n_subjects {
        let subject_id = cfg.first_subject + s as u32;
        for k in 0..cfg.epochs_per_subject {
            let label = k % 2;
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[subject_id as u64, k as u64]));
            let signals = patterns[label]
                .iter()
                .map(|&amp| {
                    carrier
                        .iter()
                        .map(|&c| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            amp * c + cfg.noise_sigma * z
                        })
                        .collect()
                })
                .collect();
            epochs.push(Epoch { signals, label, subject_id });
        }
    }
    Ok((montage, epochs))
}

/// Layout of a synthetic PhysioNet-style recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEdfConfig {
    /// Cue count per task run (alternating T1/T2, each preceded by T0 rest).
    pub n_cues: usize,
    /// Seconds per cue cycle: rest then task, half each.
    pub cycle_s: usize,
    /// Task amplitude and noise level in microvolts.
    pub amplitude_uv: f64,
    /// Task carrier. Slow enough to survive the per-frame averaging of the
    /// map pipeline; a 10 Hz carrier cancels exactly over 0.3 s frames.
    pub carrier_hz: f64,
    pub noise_uv: f64,
    pub seed: u64,
}

impl Default for SyntheticEdfConfig {
    fn default() -> Self {
        SyntheticEdfConfig { n_cues: 6, cycle_s: 8, amplitude_uv: 40.0, carrier_hz: 1.0, noise_uv: 10.0, seed: 0 }
    }
}

const EDF_RATE: usize = 160;
const PHYS_RANGE: f64 = 1000.0;
/// Annotation channel size in samples per one-second record.
const ANNOT_SAMPLES: usize = 60;

/// One 64-channel, 160 Hz EDF+ file in the public dataset's layout for
/// `subject` and `run`. Task runs carry T0/T1/T2 cues; the task cues add
/// a class-specific spatial pattern on a sinusoidal carrier.
pub fn synthetic_edf(subject: u32, run: u32, cfg: &SyntheticEdfConfig) -> Vec<u8> {
    let montage = default_montage();
    let task = run != 1 && run != 2;
    // Enough tail after the last cue for a six-second window.
    let n_records = if task { cfg.n_cues * cfg.cycle_s + 8 } else { 60 };
    let n = n_records * EDF_RATE;
    let half = cfg.cycle_s as f64 / 2.0;

    let mut events = Vec::new();
    if task {
        for k in 0..cfg.n_cues {
            let t0 = (k * cfg.cycle_s) as f64;
            events.push(Event::new(t0, half, "T0"));
            events.push(Event::new(t0 + half, half, if k % 2 == 0 { "T1" } else { "T2" }));
        }
    } else {
        events.push(Event::new(0.0, n_records as f64, "T0"));
    }

    let left_right: Vec<f64> = montage.coords3d.iter().map(|c| if c[0] <= 0.0 { 1.0 } else { -1.0 }).collect();
    let front_back: Vec<f64> = montage.coords3d.iter().map(|c| if c[1] >= 0.0 { 1.0 } else { -1.0 }).collect();
    let feet_run = matches!(run, 5 | 6 | 9 | 10 | 13 | 14);
    let mut gain = vec![0.0; n];
    let mut which = vec![0u8; n];
    for e in events.iter().filter(|e| e.label != "T0") {
        let start = (e.onset_s * EDF_RATE as f64) as usize;
        let end = ((e.onset_s + e.duration_s) * EDF_RATE as f64) as usize;
        for t in start..end.min(n) {
            gain[t] = cfg.amplitude_uv * (2.0 * PI * cfg.carrier_hz * (t - start) as f64 / EDF_RATE as f64).sin();
            which[t] = match (feet_run, e.label.as_str()) {
                (false, "T1") => 1,
                (false, _) => 2,
                (true, "T1") => 3,
                (true, _) => 4,
            };
        }
    }

    let mut signals = Vec::with_capacity(montage.len() + 1);
    let mut digital = Vec::with_capacity(montage.len() + 1);
    for (ch, label) in montage.labels.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[subject as u64, run as u64, ch as u64]));
        let samples: Vec<i16> = (0..n)
            .map(|t| {
                let pattern = match which[t] {
                    1 => left_right[ch],
                    2 => -left_right[ch],
                    3 => 1.0,
                    4 => front_back[ch],
                    _ => 0.0,
                };
                let z: f64 = StandardNormal.sample(&mut rng);
                let uv = (pattern * gain[t] + cfg.noise_uv * z).clamp(-PHYS_RANGE, PHYS_RANGE);
                (uv / PHYS_RANGE * 32767.0).round() as i16
            })
            .collect();
        digital.push(samples);
        signals.push(SignalHeader {
            label: format!("{}.", capitalize(label)),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -PHYS_RANGE,
            physical_max: PHYS_RANGE,
            digital_min: -32767,
            digital_max: 32767,
            prefiltering: "HP:0Hz LP:0Hz N:0Hz".into(),
            samples_per_record: EDF_RATE,
            reserved: String::new(),
        });
    }
    signals.push(SignalHeader {
        label: ANNOTATION_LABEL.into(),
        transducer: String::new(),
        physical_dimension: String::new(),
        physical_min: -1.0,
        physical_max: 1.0,
        digital_min: -32768,
        digital_max: 32767,
        prefiltering: String::new(),
        samples_per_record: ANNOT_SAMPLES,
        reserved: String::new(),
    });
    digital.push(Vec::new());

    let annotations: Vec<Vec<u8>> = (0..n_records)
        .map(|r| {
            let in_record: Vec<Event> =
                events.iter().filter(|e| e.onset_s >= r as f64 && e.onset_s < (r + 1) as f64).cloned().collect();
            encode_tal(r as f64, &in_record)
        })
        .collect();

    let n_signals = signals.len();
    let header = EdfHeader {
        version: 0,
        patient_id: format!("S{subject:03} X X X"),
        recording_id: format!("Startdate 01-JAN-2009 X X R{run:02}"),
        start: NaiveDate::from_ymd_opt(2009, 8, 12).and_then(|d| d.and_hms_opt(16, 15, 0)).expect("valid date"),
        header_bytes: 256 * (n_signals + 1),
        reserved: "EDF+C".into(),
        n_records,
        record_duration: 1.0,
        signals,
    };
    write_edf(&header, &digital, &annotations)
}

/// PhysioNet-style electrode label casing ("Fc5", "Fp1", "Cz").
fn capitalize(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for (i, c) in label.chars().enumerate() {
        if i == 0 {
            out.push(c);
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Write `root/Sxxx/SxxxRyy.edf` for every subject and run.
pub fn write_synthetic_dataset(
    root: &Path,
    subjects: &[u32],
    runs: &[u32],
    cfg: &SyntheticEdfConfig,
) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &s in subjects {
        let dir = root.join(format!("S{s:03}"));
        fs::create_dir_all(&dir)?;
        for &r in runs {
            let path = dir.join(format!("S{s:03}R{r:02}.edf"));
            fs::write(&path, synthetic_edf(s, r, cfg))?;
            written.push(path);
        }
    }
    Ok(written)
}
