use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::epochs::EEGRecording;
use super::tal::{parse_annotations, Event};
use super::IngestError;

/// Signal label that marks an EDF+ annotation channel.
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

const GLOBAL_BYTES: usize = 256;
const SIGNAL_BYTES: usize = 256;

/// Per-signal header fields. Text fields are kept verbatim (trailing spaces
/// stripped) so a parsed header serializes back to the same bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl SignalHeader {
    pub fn is_annotation(&self) -> bool {
        self.label == ANNOTATION_LABEL
    }

    /// Physical units per digital count.
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }

    /// Linear calibration from a stored digital value to physical units.
    pub fn to_physical(&self, digital: i16) -> f64 {
        (digital as f64 - self.digital_min as f64) * self.gain() + self.physical_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: u32,
    pub patient_id: String,
    pub recording_id: String,
    pub start: NaiveDateTime,
    pub header_bytes: usize,
    /// "EDF+C" / "EDF+D" for EDF+, blank for plain EDF.
    pub reserved: String,
    pub n_records: usize,
    pub record_duration: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    /// Bytes in one data record across all signals.
    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    pub fn payload_bytes(&self) -> usize {
        self.n_records * self.record_bytes()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_records as f64 * self.record_duration
    }

    /// Serialize to the fixed-width ASCII layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_bytes);
        put(&mut out, &self.version.to_string(), 8);
        put(&mut out, &self.patient_id, 80);
        put(&mut out, &self.recording_id, 80);
        put(
            &mut out,
            &format!("{:02}.{:02}.{:02}", self.start.day(), self.start.month(), self.start.year() % 100),
            8,
        );
        put(
            &mut out,
            &format!("{:02}.{:02}.{:02}", self.start.hour(), self.start.minute(), self.start.second()),
            8,
        );
        put(&mut out, &self.header_bytes.to_string(), 8);
        put(&mut out, &self.reserved, 44);
        put(&mut out, &self.n_records.to_string(), 8);
        put(&mut out, &format_number(self.record_duration), 8);
        put(&mut out, &self.signals.len().to_string(), 4);
        type Field<'a> = (usize, &'a dyn Fn(&SignalHeader) -> String);
        let fields: [Field; 10] = [
            (16, &|s| s.label.clone()),
            (80, &|s| s.transducer.clone()),
            (8, &|s| s.physical_dimension.clone()),
            (8, &|s| format_number(s.physical_min)),
            (8, &|s| format_number(s.physical_max)),
            (8, &|s| s.digital_min.to_string()),
            (8, &|s| s.digital_max.to_string()),
            (80, &|s| s.prefiltering.clone()),
            (8, &|s| s.samples_per_record.to_string()),
            (32, &|s| s.reserved.clone()),
        ];
        for (width, get) in fields {
            for s in &self.signals {
                put(&mut out, &get(s), width);
            }
        }
        out
    }
}

fn put(out: &mut Vec<u8>, text: &str, width: usize) {
    let bytes: Vec<u8> = text.bytes().map(|b| if b.is_ascii() { b } else { b'?' }).collect();
    let n = bytes.len().min(width);
    out.extend_from_slice(&bytes[..n]);
    out.extend(std::iter::repeat_n(b' ', width - n));
}

/// Shortest decimal rendering that fits an 8-byte field.
fn format_number(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 8 {
        return s;
    }
    for prec in (0..8).rev() {
        let t = format!("{v:.prec$}");
        if t.len() <= 8 {
            return t;
        }
    }
    s[..8].to_string()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn text(&mut self, width: usize) -> (String, usize) {
        let offset = self.pos;
        let raw = &self.bytes[offset..offset + width];
        self.pos += width;
        let s: String = raw.iter().map(|&b| if b.is_ascii() { b as char } else { '\u{FFFD}' }).collect();
        (s.trim_end_matches([' ', '\0']).to_string(), offset)
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, field: &'static str) -> Result<T, IngestError> {
        let (s, offset) = self.text(width);
        s.trim().parse().map_err(|_| IngestError::NonNumericField { field, offset, text: s })
    }
}

fn parse_date_time(date: &str, time: &str, offset: usize) -> Result<NaiveDateTime, IngestError> {
    let bad = |field: &'static str, off: usize, text: &str| IngestError::NonNumericField {
        field,
        offset: off,
        text: text.to_string(),
    };
    let parts = |s: &str| -> Option<[u32; 3]> {
        let v: Vec<u32> = s.split('.').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
        v.try_into().ok()
    };
    let [d, m, y] = parts(date).ok_or_else(|| bad("startdate", offset, date))?;
    let [hh, mm, ss] = parts(time).ok_or_else(|| bad("starttime", offset + 8, time))?;
    // EDF clipping-date convention: 85-99 -> 19xx, 00-84 -> 20xx.
    let year = if y >= 85 { 1900 + y } else { 2000 + y } as i32;
    NaiveDate::from_ymd_opt(year, m, d)
        .and_then(|day| day.and_hms_opt(hh, mm, ss))
        .ok_or_else(|| IngestError::InvalidField {
            field: "startdate",
            offset,
            reason: format!("{date} {time} is not a calendar timestamp"),
        })
}

/// Decode the fixed-width header from the start of an EDF file.
pub fn parse_edf_header(bytes: &[u8]) -> Result<EdfHeader, IngestError> {
    if bytes.len() < GLOBAL_BYTES {
        return Err(IngestError::TruncatedHeader { needed: GLOBAL_BYTES, available: bytes.len() });
    }
    let mut c = Cursor { bytes, pos: 0 };
    let version = c.number::<u32>(8, "version")?;
    let (patient_id, _) = c.text(80);
    let (recording_id, _) = c.text(80);
    let (date, date_offset) = c.text(8);
    let (time, _) = c.text(8);
    let start = parse_date_time(&date, &time, date_offset)?;
    let header_bytes = c.number::<usize>(8, "header_bytes")?;
    let (reserved, _) = c.text(44);
    let n_records_offset = c.pos;
    let n_records = c.number::<i64>(8, "n_records")?;
    if n_records < 0 {
        return Err(IngestError::InvalidField {
            field: "n_records",
            offset: n_records_offset,
            reason: format!("{n_records} records (unknown length is not supported)"),
        });
    }
    let record_duration = c.number::<f64>(8, "record_duration")?;
    let ns_offset = c.pos;
    let n_signals = c.number::<usize>(4, "n_signals")?;

    let needed = GLOBAL_BYTES + SIGNAL_BYTES * n_signals;
    if bytes.len() < needed {
        return Err(IngestError::TruncatedHeader { needed, available: bytes.len() });
    }
    if header_bytes != needed {
        return Err(IngestError::InvalidField {
            field: "header_bytes",
            offset: 184,
            reason: format!("{header_bytes} does not equal 256*(n_signals+1) = {needed} (n_signals at byte {ns_offset})"),
        });
    }

    let texts = |c: &mut Cursor, width| (0..n_signals).map(|_| c.text(width).0).collect::<Vec<_>>();
    fn numbers<T: std::str::FromStr>(
        c: &mut Cursor,
        n: usize,
        width: usize,
        field: &'static str,
    ) -> Result<Vec<T>, IngestError> {
        (0..n).map(|_| c.number(width, field)).collect()
    }
    let labels = texts(&mut c, 16);
    let transducers = texts(&mut c, 80);
    let dims = texts(&mut c, 8);
    let pmin = numbers::<f64>(&mut c, n_signals, 8, "physical_min")?;
    let pmax = numbers::<f64>(&mut c, n_signals, 8, "physical_max")?;
    let dmin = numbers::<i32>(&mut c, n_signals, 8, "digital_min")?;
    let dmax = numbers::<i32>(&mut c, n_signals, 8, "digital_max")?;
    let prefilters = texts(&mut c, 80);
    let spr_offset = c.pos;
    let spr = numbers::<usize>(&mut c, n_signals, 8, "samples_per_record")?;
    let reserved_sig = texts(&mut c, 32);

    let mut signals = Vec::with_capacity(n_signals);
    for i in 0..n_signals {
        if dmax[i] == dmin[i] {
            return Err(IngestError::DegenerateCalibration {
                signal: i,
                label: labels[i].clone(),
                value: dmin[i],
            });
        }
        if dmax[i] < dmin[i] {
            return Err(IngestError::InvalidField {
                field: "digital_max",
                offset: GLOBAL_BYTES + n_signals * (16 + 80 + 8 + 8 + 8 + 8) + 8 * i,
                reason: format!("digital_max {} below digital_min {}", dmax[i], dmin[i]),
            });
        }
        if spr[i] == 0 {
            return Err(IngestError::InvalidField {
                field: "samples_per_record",
                offset: spr_offset + 8 * i,
                reason: "zero samples per record".into(),
            });
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i],
            digital_max: dmax[i],
            prefiltering: prefilters[i].clone(),
            samples_per_record: spr[i],
            reserved: reserved_sig[i].clone(),
        });
    }

    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start,
        header_bytes,
        reserved,
        n_records: n_records as usize,
        record_duration,
        signals,
    })
}

fn check_payload(header: &EdfHeader, payload: &[u8]) -> Result<(), IngestError> {
    let needed = header.payload_bytes();
    if payload.len() < needed {
        return Err(IngestError::TruncatedRecords { needed, available: payload.len() });
    }
    Ok(())
}

/// Decode the data records (everything after the header) into physical units.
/// Annotation channels are skipped.
pub fn read_signals(header: &EdfHeader, payload: &[u8]) -> Result<EEGRecording, IngestError> {
    check_payload(header, payload)?;
    let data: Vec<(usize, &SignalHeader)> =
        header.signals.iter().enumerate().filter(|(_, s)| !s.is_annotation()).collect();

    let mut sample_rate = None;
    for (i, s) in &data {
        if s.digital_max == s.digital_min {
            return Err(IngestError::DegenerateCalibration {
                signal: *i,
                label: s.label.clone(),
                value: s.digital_min,
            });
        }
        let rate = s.samples_per_record as f64 / header.record_duration;
        match sample_rate {
            None => sample_rate = Some(rate),
            Some(first) if (first - rate).abs() > 1e-9 => {
                return Err(IngestError::MixedSampleRates { first, other: rate, label: s.label.clone() })
            }
            _ => {}
        }
    }

    // Byte offset of each signal within a record.
    let mut offsets = Vec::with_capacity(header.signals.len());
    let mut acc = 0;
    for s in &header.signals {
        offsets.push(acc);
        acc += s.samples_per_record * 2;
    }
    let record_bytes = acc;

    let samples = data
        .iter()
        .map(|&(i, s)| {
            let mut out = Vec::with_capacity(header.n_records * s.samples_per_record);
            for r in 0..header.n_records {
                let base = r * record_bytes + offsets[i];
                let chunk = &payload[base..base + s.samples_per_record * 2];
                out.extend(
                    chunk.chunks_exact(2).map(|b| s.to_physical(i16::from_le_bytes([b[0], b[1]]))),
                );
            }
            out
        })
        .collect();

    Ok(EEGRecording {
        channel_labels: data.iter().map(|(_, s)| s.label.clone()).collect(),
        sample_rate_hz: sample_rate.unwrap_or(0.0),
        samples,
    })
}

/// Concatenated raw bytes of every annotation channel, record by record.
pub fn read_annotation_bytes(header: &EdfHeader, payload: &[u8]) -> Result<Vec<u8>, IngestError> {
    check_payload(header, payload)?;
    let record_bytes = header.record_bytes();
    let mut out = Vec::new();
    for r in 0..header.n_records {
        let mut off = r * record_bytes;
        for s in &header.signals {
            let len = s.samples_per_record * 2;
            if s.is_annotation() {
                out.extend_from_slice(&payload[off..off + len]);
            }
            off += len;
        }
    }
    Ok(out)
}

/// A fully decoded EDF/EDF+ file.
#[derive(Debug, Clone)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub recording: EEGRecording,
    pub events: Vec<Event>,
}

pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile, IngestError> {
    let header = parse_edf_header(bytes)?;
    let payload = &bytes[header.header_bytes..];
    let recording = read_signals(&header, payload)?;
    let events = if header.signals.iter().any(SignalHeader::is_annotation) {
        parse_annotations(&read_annotation_bytes(&header, payload)?)?
    } else {
        Vec::new()
    };
    Ok(EdfFile { header, recording, events })
}

/// Serialize a header plus digital samples into an EDF file.
///
/// `digital[i]` holds the full sample stream of signal `i` (annotation
/// channels included); `annotations[r]` are the TAL bytes for record `r`,
/// zero-padded into the annotation channel. Used for fixtures and synthetic
/// data, not as a general EDF writer.
pub fn write_edf(header: &EdfHeader, digital: &[Vec<i16>], annotations: &[Vec<u8>]) -> Vec<u8> {
    let mut out = header.to_bytes();
    for r in 0..header.n_records {
        for (i, s) in header.signals.iter().enumerate() {
            let n = s.samples_per_record;
            if s.is_annotation() {
                let mut block = annotations.get(r).cloned().unwrap_or_default();
                assert!(block.len() <= 2 * n, "annotation block for record {r} exceeds channel capacity");
                block.resize(2 * n, 0);
                out.extend_from_slice(&block);
            } else {
                for &d in &digital[i][r * n..(r + 1) * n] {
                    out.extend_from_slice(&d.to_le_bytes());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(label: &str, spr: usize) -> SignalHeader {
        SignalHeader {
            label: label.into(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -1000.0,
            physical_max: 1000.0,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: spr,
            reserved: String::new(),
        }
    }

    fn header(n_signals: usize) -> EdfHeader {
        EdfHeader {
            version: 0,
            patient_id: "X X X X".into(),
            recording_id: "Startdate X X X X".into(),
            start: NaiveDate::from_ymd_opt(2009, 8, 12).unwrap().and_hms_opt(16, 15, 0).unwrap(),
            header_bytes: 256 * (n_signals + 1),
            reserved: String::new(),
            n_records: 2,
            record_duration: 1.0,
            signals: (0..n_signals).map(|i| signal(&format!("S{i}"), 4)).collect(),
        }
    }

    #[test]
    fn version_field_decodes_to_zero() {
        let h = header(1);
        let bytes = h.to_bytes();
        assert!(bytes.starts_with(b"0       "));
        assert_eq!(parse_edf_header(&bytes).unwrap().version, 0);
    }

    #[test]
    fn sixty_four_signals_give_16640_header_bytes() {
        let h = header(64);
        let bytes = h.to_bytes();
        assert_eq!(&bytes[252..256], b"64  ");
        let parsed = parse_edf_header(&bytes).unwrap();
        assert_eq!(parsed.n_signals(), 64);
        assert_eq!(parsed.header_bytes, 16640);
    }

    #[test]
    fn truncated_header_is_reported() {
        let bytes = header(64).to_bytes();
        let err = parse_edf_header(&bytes[..300]).unwrap_err();
        assert_eq!(err, IngestError::TruncatedHeader { needed: 16640, available: 300 });
        assert!(matches!(parse_edf_header(&bytes[..100]), Err(IngestError::TruncatedHeader { .. })));
    }

    #[test]
    fn non_numeric_field_reports_offset() {
        let mut bytes = header(1).to_bytes();
        bytes[236..244].copy_from_slice(b"abc     ");
        match parse_edf_header(&bytes).unwrap_err() {
            IngestError::NonNumericField { field, offset, .. } => {
                assert_eq!(field, "n_records");
                assert_eq!(offset, 236);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn calibration_endpoints_and_midpoint() {
        let s = signal("C3", 1);
        assert_eq!(s.to_physical(-32768), -1000.0);
        assert_eq!(s.to_physical(32767), 1000.0);
        // 32768 * 2000 / 65535 - 1000, evaluated independently.
        let expected = 32768.0_f64 * 2000.0 / 65535.0 - 1000.0;
        assert!((s.to_physical(0) - expected).abs() < 1e-12);
        assert!((s.to_physical(0) - 0.015259).abs() < 1e-6);
    }

    #[test]
    fn degenerate_calibration_rejected() {
        let mut h = header(1);
        h.signals[0].digital_max = h.signals[0].digital_min;
        let payload = vec![0u8; h.payload_bytes()];
        assert!(matches!(read_signals(&h, &payload), Err(IngestError::DegenerateCalibration { .. })));
        assert!(matches!(
            parse_edf_header(&h.to_bytes()),
            Err(IngestError::DegenerateCalibration { .. })
        ));
    }

    #[test]
    fn truncated_records_rejected() {
        let h = header(2);
        let payload = vec![0u8; h.payload_bytes() - 1];
        assert!(matches!(read_signals(&h, &payload), Err(IngestError::TruncatedRecords { .. })));
    }

    #[test]
    fn write_then_parse_with_annotations() {
        let mut h = header(2);
        h.reserved = "EDF+C".into();
        h.signals.push(SignalHeader { samples_per_record: 30, ..signal(ANNOTATION_LABEL, 30) });
        h.header_bytes = 256 * 4;
        let digital = vec![vec![0, 1, 2, 3, 4, 5, 6, 7], vec![-1; 8], vec![]];
        let anns = vec![
            b"+0\x14\x14\x00+0.5\x150.25\x14T1\x14\x00".to_vec(),
            b"+1\x14\x14\x00".to_vec(),
        ];
        let bytes = write_edf(&h, &digital, &anns);
        let f = parse_edf(&bytes).unwrap();
        assert_eq!(f.header, h);
        assert_eq!(f.recording.channel_labels, vec!["S0", "S1"]);
        assert_eq!(f.recording.sample_rate_hz, 4.0);
        assert_eq!(f.recording.samples[0].len(), 8);
        assert_eq!(f.recording.samples[0][7], h.signals[0].to_physical(7));
        assert_eq!(f.events.len(), 1);
        assert_eq!(f.events[0].label, "T1");
        assert_eq!(f.events[0].onset_s, 0.5);
    }

    #[test]
    fn number_formatting_fits_field() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-8092.0), "-8092");
        assert_eq!(format_number(0.00625), "0.00625");
        assert!(format_number(-3276.123456789).len() <= 8);
    }
}
