//! EDF/EDF+ recordings, TAL annotations, electrode montages and epoching.

mod edf;
mod epochs;
mod montage;
mod tal;

pub use edf::{
    parse_edf, parse_edf_header, read_annotation_bytes, read_signals, write_edf, EdfFile,
    EdfHeader, SignalHeader, ANNOTATION_LABEL,
};
pub use epochs::{
    extract_epochs, parse_physionet_name, ClassScheme, EEGRecording, Epoch, RunId, RunKind,
    TaskClass,
};
pub use montage::{default_montage, load_montage, normalize_label, ElectrodeMontage};
pub use tal::{encode_tal, parse_annotations, Event};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("truncated header: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },
    #[error("non-numeric header field `{field}` at byte offset {offset}: {text:?}")]
    NonNumericField { field: &'static str, offset: usize, text: String },
    #[error("invalid header field `{field}` at byte offset {offset}: {reason}")]
    InvalidField { field: &'static str, offset: usize, reason: String },
    #[error("truncated data records: need {needed} bytes, have {available}")]
    TruncatedRecords { needed: usize, available: usize },
    #[error("signal {signal} ({label}) has digital_min == digital_max == {value}")]
    DegenerateCalibration { signal: usize, label: String, value: i32 },
    #[error("signals have differing sample rates ({first} Hz vs {other} Hz for {label})")]
    MixedSampleRates { first: f64, other: f64, label: String },
    #[error("malformed TAL at byte {offset}: {reason}")]
    MalformedTal { offset: usize, reason: &'static str },
    #[error("negative annotation onset {onset} s at byte {offset}")]
    NegativeOnset { onset: f64, offset: usize },
    #[error("duplicate electrode label {label:?} on line {line}")]
    DuplicateLabel { label: String, line: usize },
    #[error("line {line}: expected 4 comma-separated fields, found {found}")]
    BadArity { line: usize, found: usize },
    #[error("line {line}: non-finite or unparsable coordinate {text:?}")]
    NonFiniteCoordinate { line: usize, text: String },
    #[error("electrode {label:?} has norm {norm}, outside the [0.5, 1.5] head-model band")]
    CoordinateOutOfBand { label: String, norm: f64 },
    #[error("empty montage")]
    EmptyMontage,
    #[error("window [{start_s}, {end_s}) s exceeds recording length {duration_s} s")]
    WindowOutOfBounds { start_s: f64, end_s: f64, duration_s: f64 },
    #[error("unknown run type: {0}")]
    UnknownRunType(String),
    #[error("channel {label:?} required by the montage is missing from the recording")]
    MissingChannel { label: String },
}
