use std::fmt;
use std::str::FromStr;

use super::montage::{normalize_label, ElectrodeMontage};
use super::tal::Event;
use super::IngestError;

/// Continuous multichannel signal in physical units (microvolts).
#[derive(Debug, Clone, PartialEq)]
pub struct EEGRecording {
    pub channel_labels: Vec<String>,
    pub sample_rate_hz: f64,
    /// `samples[channel][t]`
    pub samples: Vec<Vec<f64>>,
}

impl EEGRecording {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    /// Reorder (and subset) channels to follow the montage's electrode order.
    pub fn aligned_to(&self, montage: &ElectrodeMontage) -> Result<EEGRecording, IngestError> {
        let keys: Vec<String> = self.channel_labels.iter().map(|l| normalize_label(l)).collect();
        let mut samples = Vec::with_capacity(montage.len());
        for label in &montage.labels {
            let want = normalize_label(label);
            let i = keys
                .iter()
                .position(|k| *k == want)
                .ok_or_else(|| IngestError::MissingChannel { label: label.clone() })?;
            samples.push(self.samples[i].clone());
        }
        Ok(EEGRecording {
            channel_labels: montage.labels.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples,
        })
    }

    /// Events whose window of `window_s` seconds lies inside the recording.
    pub fn events_within(&self, events: &[Event], window_s: f64) -> Vec<Event> {
        let ws = window_samples(window_s, self.sample_rate_hz);
        events
            .iter()
            .filter(|e| onset_sample(e.onset_s, self.sample_rate_hz) + ws <= self.n_samples())
            .cloned()
            .collect()
    }
}

/// Fixed-length labeled slice of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// `signals[channel][t]`, microvolts.
    pub signals: Vec<Vec<f64>>,
    pub label: usize,
    pub subject_id: u32,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.signals.len()
    }

    pub fn n_samples(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskClass {
    /// Imagined left fist.
    Left,
    /// Imagined right fist.
    Right,
    /// Baseline, eyes open.
    Open,
    /// Imagined both feet.
    Feet,
}

/// Class taxonomy; labels index into [`ClassScheme::classes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassScheme {
    LR,
    LRO,
    LROF,
}

impl ClassScheme {
    pub fn classes(self) -> &'static [TaskClass] {
        use TaskClass::*;
        match self {
            ClassScheme::LR => &[Left, Right],
            ClassScheme::LRO => &[Left, Right, Open],
            ClassScheme::LROF => &[Left, Right, Open, Feet],
        }
    }

    pub fn num_classes(self) -> usize {
        self.classes().len()
    }

    pub fn label_of(self, class: TaskClass) -> Option<usize> {
        self.classes().iter().position(|&c| c == class)
    }

    /// PhysioNet run numbers that contribute epochs under this scheme.
    pub fn runs(self) -> Vec<u32> {
        let mut runs = vec![4, 8, 12];
        if self.label_of(TaskClass::Open).is_some() {
            runs.insert(0, 1);
        }
        if self.label_of(TaskClass::Feet).is_some() {
            runs.extend([6, 10, 14]);
        }
        runs
    }
}

impl fmt::Display for ClassScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassScheme::LR => "lr",
            ClassScheme::LRO => "lro",
            ClassScheme::LROF => "lrof",
        })
    }
}

impl FromStr for ClassScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('/', "").as_str() {
            "lr" => Ok(ClassScheme::LR),
            "lro" => Ok(ClassScheme::LRO),
            "lrof" => Ok(ClassScheme::LROF),
            _ => Err(format!("unknown class scheme {s:?} (expected lr, lro or lrof)")),
        }
    }
}

/// What a PhysioNet EEGMMIDB run contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    BaselineEyesOpen,
    BaselineEyesClosed,
    /// Real left/right fist movement.
    ExecutedFist,
    /// Imagined left (T1) / right (T2) fist.
    ImageryFist,
    /// Real both-fists / both-feet movement.
    ExecutedFistsFeet,
    /// Imagined both fists (T1) / both feet (T2).
    ImageryFistsFeet,
}

impl RunKind {
    pub fn from_run(run: u32) -> Result<Self, IngestError> {
        Ok(match run {
            1 => RunKind::BaselineEyesOpen,
            2 => RunKind::BaselineEyesClosed,
            3 | 7 | 11 => RunKind::ExecutedFist,
            4 | 8 | 12 => RunKind::ImageryFist,
            5 | 9 | 13 => RunKind::ExecutedFistsFeet,
            6 | 10 | 14 => RunKind::ImageryFistsFeet,
            _ => return Err(IngestError::UnknownRunType(format!("run {run}"))),
        })
    }

    fn class_of(self, annotation: &str) -> Option<TaskClass> {
        match (self, annotation) {
            (RunKind::ImageryFist, "T1") => Some(TaskClass::Left),
            (RunKind::ImageryFist, "T2") => Some(TaskClass::Right),
            (RunKind::ImageryFistsFeet, "T2") => Some(TaskClass::Feet),
            _ => None,
        }
    }
}

/// Subject and run numbers of one recording file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunId {
    pub subject: u32,
    pub run: u32,
}

/// Parse the `SxxxRyy` file-name convention ("S001R04.edf").
pub fn parse_physionet_name(name: &str) -> Result<RunId, IngestError> {
    let stem = name.rsplit(['/', '\\']).next().unwrap_or(name);
    let stem = stem.split('.').next().unwrap_or(stem).to_ascii_uppercase();
    let bad = || IngestError::UnknownRunType(format!("file name {name:?} does not match SxxxRyy"));
    let rest = stem.strip_prefix('S').ok_or_else(bad)?;
    let (subject, run) = rest.split_once('R').ok_or_else(bad)?;
    let subject = subject.parse().map_err(|_| bad())?;
    let run = run.parse().map_err(|_| bad())?;
    RunKind::from_run(run)?;
    Ok(RunId { subject, run })
}

fn window_samples(window_s: f64, rate: f64) -> usize {
    (window_s * rate).round() as usize
}

fn onset_sample(onset_s: f64, rate: f64) -> usize {
    (onset_s * rate).round() as usize
}

fn cut(rec: &EEGRecording, start: usize, len: usize, label: usize, subject_id: u32) -> Epoch {
    Epoch {
        signals: rec.samples.iter().map(|ch| ch[start..start + len].to_vec()).collect(),
        label,
        subject_id,
    }
}

/// Cut labeled epochs of `window_s` seconds from one run.
///
/// Cue events start an epoch at their onset. The eyes-open baseline run has no
/// cues; it is cut into consecutive non-overlapping windows instead.
pub fn extract_epochs(
    rec: &EEGRecording,
    events: &[Event],
    run: RunId,
    scheme: ClassScheme,
    window_s: f64,
) -> Result<Vec<Epoch>, IngestError> {
    let kind = RunKind::from_run(run.run)?;
    let rate = rec.sample_rate_hz;
    let ws = window_samples(window_s, rate);
    let n = rec.n_samples();
    if ws == 0 {
        return Ok(Vec::new());
    }

    if kind == RunKind::BaselineEyesOpen {
        let Some(label) = scheme.label_of(TaskClass::Open) else {
            return Ok(Vec::new());
        };
        return Ok((0..n / ws).map(|k| cut(rec, k * ws, ws, label, run.subject)).collect());
    }

    let mut epochs = Vec::new();
    for e in events {
        let Some(label) = kind.class_of(&e.label).and_then(|c| scheme.label_of(c)) else {
            continue;
        };
        let start = onset_sample(e.onset_s, rate);
        if start + ws > n {
            return Err(IngestError::WindowOutOfBounds {
                start_s: e.onset_s,
                end_s: e.onset_s + window_s,
                duration_s: rec.duration_s(),
            });
        }
        epochs.push(cut(rec, start, ws, label, run.subject));
    }
    Ok(epochs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recording(seconds: usize, rate: usize) -> EEGRecording {
        let n = seconds * rate;
        EEGRecording {
            channel_labels: vec!["C3".into(), "C4".into()],
            sample_rate_hz: rate as f64,
            samples: vec![(0..n).map(|t| t as f64).collect(), vec![1.0; n]],
        }
    }

    #[test]
    fn six_seconds_at_160_hz_is_960_samples() {
        let rec = recording(30, 160);
        let events = vec![Event::new(2.0, 4.1, "T1"), Event::new(10.0, 4.1, "T2")];
        let run = RunId { subject: 7, run: 4 };
        let ep = extract_epochs(&rec, &events, run, ClassScheme::LR, 6.0).unwrap();
        assert_eq!(ep.len(), 2);
        for e in &ep {
            assert_eq!(e.n_samples(), 960);
            assert_eq!(e.subject_id, 7);
        }
        assert_eq!(ep[0].label, 0);
        assert_eq!(ep[1].label, 1);
        assert_eq!(ep[0].signals[0][0], 320.0);
    }

    #[test]
    fn feet_events_dropped_under_lr() {
        let rec = recording(30, 160);
        let events = vec![Event::new(2.0, 4.1, "T2"), Event::new(8.0, 4.1, "T1")];
        let run = RunId { subject: 1, run: 6 };
        assert!(extract_epochs(&rec, &events, run, ClassScheme::LR, 6.0).unwrap().is_empty());
        let four = extract_epochs(&rec, &events, run, ClassScheme::LROF, 6.0).unwrap();
        assert_eq!(four.len(), 1);
        assert_eq!(four[0].label, 3);
    }

    #[test]
    fn rest_annotations_are_not_classes() {
        let rec = recording(30, 160);
        let events = vec![Event::new(0.0, 4.2, "T0")];
        let ep = extract_epochs(&rec, &events, RunId { subject: 1, run: 4 }, ClassScheme::LROF, 6.0).unwrap();
        assert!(ep.is_empty());
    }

    #[test]
    fn window_past_the_end_is_an_error() {
        let rec = recording(30, 160);
        let events = vec![Event::new(29.0, 4.1, "T1")];
        let err = extract_epochs(&rec, &events, RunId { subject: 1, run: 4 }, ClassScheme::LR, 6.0);
        assert!(matches!(err, Err(IngestError::WindowOutOfBounds { .. })));
        assert!(rec.events_within(&events, 6.0).is_empty());
    }

    #[test]
    fn baseline_run_cut_into_non_overlapping_windows() {
        let rec = recording(61, 160);
        let run = RunId { subject: 3, run: 1 };
        let ep = extract_epochs(&rec, &[], run, ClassScheme::LRO, 6.0).unwrap();
        assert_eq!(ep.len(), 10);
        assert!(ep.iter().all(|e| e.label == 2 && e.n_samples() == 960));
        assert_eq!(ep[1].signals[0][0], 960.0);
        assert!(extract_epochs(&rec, &[], run, ClassScheme::LR, 6.0).unwrap().is_empty());
    }

    #[test]
    fn unknown_run() {
        let rec = recording(10, 160);
        let err = extract_epochs(&rec, &[], RunId { subject: 1, run: 15 }, ClassScheme::LR, 6.0);
        assert!(matches!(err, Err(IngestError::UnknownRunType(_))));
    }

    #[test]
    fn physionet_names() {
        assert_eq!(parse_physionet_name("S001R04.edf").unwrap(), RunId { subject: 1, run: 4 });
        assert_eq!(parse_physionet_name("/data/S109/S109R14.edf").unwrap(), RunId { subject: 109, run: 14 });
        assert!(parse_physionet_name("S001R15.edf").is_err());
        assert!(parse_physionet_name("foo.edf").is_err());
    }

    #[test]
    fn scheme_runs_and_parse() {
        assert_eq!(ClassScheme::LR.runs(), vec![4, 8, 12]);
        assert_eq!(ClassScheme::LROF.runs(), vec![1, 4, 8, 12, 6, 10, 14]);
        assert_eq!("L/R/O/F".parse::<ClassScheme>().unwrap(), ClassScheme::LROF);
    }

    #[test]
    fn align_to_montage_reorders_by_label() {
        let m = ElectrodeMontage::new(vec!["C4".into(), "C3".into()], vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let mut rec = recording(1, 4);
        rec.channel_labels = vec!["C3..".into(), "c4.".into()];
        let a = rec.aligned_to(&m).unwrap();
        assert_eq!(a.samples[0], vec![1.0; 4]);
        assert_eq!(a.channel_labels, vec!["C4", "C3"]);
    }
}
