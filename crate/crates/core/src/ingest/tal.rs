//! EDF+ time-stamped annotation lists.
//!
//! Grammar of one TAL: `+onset[\x15duration]\x14[text\x14]*\x00`. Annotation
//! channels pad each record with NUL bytes after the last TAL.

use super::IngestError;

const DURATION_SEP: u8 = 0x15;
const FIELD_SEP: u8 = 0x14;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub onset_s: f64,
    pub duration_s: f64,
    pub label: String,
}

impl Event {
    pub fn new(onset_s: f64, duration_s: f64, label: impl Into<String>) -> Self {
        Event { onset_s, duration_s, label: label.into() }
    }
}

fn parse_seconds(bytes: &[u8], offset: usize) -> Result<f64, IngestError> {
    std::str::from_utf8(bytes)
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or(IngestError::MalformedTal { offset, reason: "unparsable time value" })
}

/// Parse a TAL byte stream into events, one per nonempty annotation text.
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<Event>, IngestError> {
    let mut events = Vec::new();
    let mut pos = 0;
    let n = bytes.len();
    loop {
        while pos < n && bytes[pos] == 0 {
            pos += 1;
        }
        if pos == n {
            return Ok(events);
        }
        let start = pos;
        if bytes[pos] != b'+' && bytes[pos] != b'-' {
            return Err(IngestError::MalformedTal { offset: pos, reason: "onset must start with '+' or '-'" });
        }
        let onset_end = bytes[pos..]
            .iter()
            .position(|&b| b == FIELD_SEP || b == DURATION_SEP || b == 0)
            .map(|i| pos + i)
            .ok_or(IngestError::MalformedTal { offset: start, reason: "onset not terminated" })?;
        let onset = parse_seconds(&bytes[pos..onset_end], pos)?;
        if onset < 0.0 {
            return Err(IngestError::NegativeOnset { onset, offset: start });
        }
        pos = onset_end;
        let mut duration = 0.0;
        if bytes[pos] == DURATION_SEP {
            pos += 1;
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == FIELD_SEP || b == 0)
                .map(|i| pos + i)
                .ok_or(IngestError::MalformedTal { offset: pos, reason: "duration not terminated" })?;
            duration = parse_seconds(&bytes[pos..end], pos)?;
            if duration < 0.0 {
                return Err(IngestError::MalformedTal { offset: pos, reason: "negative duration" });
            }
            pos = end;
        }
        if bytes[pos] != FIELD_SEP {
            return Err(IngestError::MalformedTal { offset: pos, reason: "missing 0x14 after onset" });
        }
        pos += 1;
        // Annotation texts, each closed by 0x14, until the terminating NUL.
        loop {
            if pos == n {
                return Err(IngestError::MalformedTal { offset: start, reason: "TAL not terminated by NUL" });
            }
            if bytes[pos] == 0 {
                pos += 1;
                break;
            }
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == FIELD_SEP || b == 0)
                .map(|i| pos + i)
                .ok_or(IngestError::MalformedTal { offset: start, reason: "TAL not terminated by NUL" })?;
            if bytes[end] == 0 {
                return Err(IngestError::MalformedTal { offset: end, reason: "annotation text not closed by 0x14" });
            }
            if end > pos {
                let label = bytes[pos..end]
                    .iter()
                    .map(|&b| if b.is_ascii() { b as char } else { '\u{FFFD}' })
                    .collect();
                events.push(Event { onset_s: onset, duration_s: duration, label });
            }
            pos = end + 1;
        }
    }
}

/// Encode events as TALs (one per event), preceded by a time-keeping TAL at
/// `record_onset_s`.
pub fn encode_tal(record_onset_s: f64, events: &[Event]) -> Vec<u8> {
    let mut out = format!("+{record_onset_s}\x14\x14\x00").into_bytes();
    for e in events {
        out.extend_from_slice(format!("+{}", e.onset_s).as_bytes());
        if e.duration_s > 0.0 {
            out.extend_from_slice(format!("\x15{}", e.duration_s).as_bytes());
        }
        out.extend_from_slice(format!("\x14{}\x14\x00", e.label).as_bytes());
    }
    out
}
