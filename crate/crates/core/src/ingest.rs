//! Recording and annotation parsing, sampling-rate checks and supervisor trims.
//!
//! A recording is a CSV stream of `t_ms,x,y,z` rows. Annotations are a JSON
//! document of spans, each with the reported start/stop of an activity and
//! the head/tail trims a supervisor applied after looking at the trace.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NOMINAL_RATE_HZ: f64 = 25.0;
pub const RECORDING_HEADER: &str = "t_ms,x,y,z";

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamp {t_ms} does not increase past {prev_ms}")]
    NonMonotonicTimestamp { line: usize, prev_ms: i64, t_ms: i64 },
    #[error("recording has no samples")]
    EmptyRecording,
    #[error("malformed annotation descriptor: {0}")]
    MalformedDescriptor(String),
    #[error("span {index}: start {start_ms} is not before stop {stop_ms}")]
    InvertedSpan { index: usize, start_ms: i64, stop_ms: i64 },
    #[error("span {index}: trims {trim_head_ms}/{trim_tail_ms} leave an empty interval")]
    TrimCollapse {
        index: usize,
        trim_head_ms: i64,
        trim_tail_ms: i64,
    },
    #[error("span {index}: unknown label {label:?}")]
    UnknownLabel { index: usize, label: String },
    #[error("no samples survive the trimmed span [{from_ms}, {to_ms}]")]
    EmptySegment { from_ms: i64, to_ms: i64 },
    #[error("rate check needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t_ms: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sample {
    pub fn new(t_ms: i64, x: f64, y: f64, z: f64) -> Self {
        Self { t_ms, x, y, z }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub device_id: String,
    pub samples: Vec<Sample>,
    pub nominal_rate_hz: f64,
}

impl RawRecording {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self {
            device_id: String::new(),
            samples,
            nominal_rate_hz: NOMINAL_RATE_HZ,
        }
    }

    pub fn with_device_id(mut self, id: impl Into<String>) -> Self {
        self.device_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serializes back to the recording CSV format.
    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples)
    }
}

/// Writes samples in the recording CSV layout. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(RECORDING_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.t_ms, s.x, s.y, s.z);
    }
    out
}

/// Parses a recording CSV. The header line is required; blank lines are
/// ignored; line numbers in errors are 1-based.
pub fn parse_recording(text: &str) -> Result<RawRecording, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == RECORDING_HEADER => {}
        Some((_, header)) => {
            return Err(IngestError::MalformedRow {
                line: 1,
                reason: format!("expected header {RECORDING_HEADER:?}, found {header:?}"),
            })
        }
        None => return Err(IngestError::EmptyRecording),
    }

    let mut samples: Vec<Sample> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let t_ms: i64 = fields[0].parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("timestamp {:?} is not an integer", fields[0]),
        })?;
        if t_ms < 0 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("negative timestamp {t_ms}"),
            });
        }
        let mut axes = [0.0f64; 3];
        for (slot, field) in axes.iter_mut().zip(&fields[1..]) {
            let v: f64 = field.parse().map_err(|_| IngestError::MalformedRow {
                line,
                reason: format!("value {field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("value {field:?} is not finite"),
                });
            }
            *slot = v;
        }
        if let Some(prev) = samples.last() {
            if t_ms <= prev.t_ms {
                return Err(IngestError::NonMonotonicTimestamp {
                    line,
                    prev_ms: prev.t_ms,
                    t_ms,
                });
            }
        }
        samples.push(Sample::new(t_ms, axes[0], axes[1], axes[2]));
    }

    if samples.is_empty() {
        return Err(IngestError::EmptyRecording);
    }
    Ok(RawRecording {
        device_id: String::new(),
        samples,
        nominal_rate_hz: NOMINAL_RATE_HZ,
    })
}

/// The configured set of activity names. Lookups are case-insensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    names: BTreeSet<String>,
}

impl ClassSet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            names: names
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .collect(),
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.names.contains(&label.trim().to_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

impl Default for ClassSet {
    fn default() -> Self {
        Self::new(["eating", "smoking", "medication", "jogging", "other"])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub label: String,
    #[serde(rename = "start_ms")]
    pub reported_start_ms: i64,
    #[serde(rename = "stop_ms")]
    pub reported_stop_ms: i64,
    #[serde(default)]
    pub trim_head_ms: i64,
    #[serde(default)]
    pub trim_tail_ms: i64,
    #[serde(default)]
    pub confirmed: bool,
}

impl AnnotationSpan {
    pub fn new(label: &str, start_ms: i64, stop_ms: i64) -> Self {
        Self {
            label: label.to_lowercase(),
            reported_start_ms: start_ms,
            reported_stop_ms: stop_ms,
            trim_head_ms: 0,
            trim_tail_ms: 0,
            confirmed: true,
        }
    }

    pub fn with_trims(mut self, head_ms: i64, tail_ms: i64) -> Self {
        self.trim_head_ms = head_ms;
        self.trim_tail_ms = tail_ms;
        self
    }

    /// Inclusive `[from, to]` bounds after trimming.
    pub fn trimmed_bounds(&self) -> (i64, i64) {
        (
            self.reported_start_ms + self.trim_head_ms,
            self.reported_stop_ms - self.trim_tail_ms,
        )
    }

    fn validate(&self, index: usize) -> Result<(), IngestError> {
        if self.reported_start_ms >= self.reported_stop_ms {
            return Err(IngestError::InvertedSpan {
                index,
                start_ms: self.reported_start_ms,
                stop_ms: self.reported_stop_ms,
            });
        }
        let (from, to) = self.trimmed_bounds();
        if self.trim_head_ms < 0 || self.trim_tail_ms < 0 || from >= to {
            return Err(IngestError::TrimCollapse {
                index,
                trim_head_ms: self.trim_head_ms,
                trim_tail_ms: self.trim_tail_ms,
            });
        }
        Ok(())
    }
}

/// On-disk annotation descriptor: one per recording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recording: Option<String>,
    pub spans: Vec<AnnotationSpan>,
}

impl AnnotationDocument {
    pub fn new(spans: Vec<AnnotationSpan>) -> Self {
        Self {
            recording: None,
            spans,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation document serializes")
    }
}

/// Parses and validates an annotation descriptor. Any bad span rejects the
/// whole document. Labels are normalized to lower case.
pub fn parse_annotations(text: &str, classes: &ClassSet) -> Result<Vec<AnnotationSpan>, IngestError> {
    parse_annotation_document(text, classes).map(|doc| doc.spans)
}

pub fn parse_annotation_document(
    text: &str,
    classes: &ClassSet,
) -> Result<AnnotationDocument, IngestError> {
    let mut doc: AnnotationDocument =
        serde_json::from_str(text).map_err(|e| IngestError::MalformedDescriptor(e.to_string()))?;
    for (index, span) in doc.spans.iter_mut().enumerate() {
        span.label = span.label.trim().to_lowercase();
        span.validate(index)?;
        if !classes.contains(&span.label) {
            return Err(IngestError::UnknownLabel {
                index,
                label: span.label.clone(),
            });
        }
    }
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentSource {
    pub recording: String,
    pub span: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub label: String,
    pub samples: Vec<Sample>,
    pub source: SegmentSource,
}

impl LabeledSegment {
    pub fn new(label: impl Into<String>, samples: Vec<Sample>, source: SegmentSource) -> Self {
        Self {
            label: label.into(),
            samples,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cuts the samples inside the span's trimmed bounds, inclusive at both ends.
pub fn apply_trim(rec: &RawRecording, span: &AnnotationSpan) -> Result<LabeledSegment, IngestError> {
    apply_trim_indexed(rec, span, 0)
}

pub fn apply_trim_indexed(
    rec: &RawRecording,
    span: &AnnotationSpan,
    span_index: usize,
) -> Result<LabeledSegment, IngestError> {
    let (from_ms, to_ms) = span.trimmed_bounds();
    let range = trim_range(&rec.samples, from_ms, to_ms);
    if range.is_empty() {
        return Err(IngestError::EmptySegment { from_ms, to_ms });
    }
    Ok(LabeledSegment {
        label: span.label.to_lowercase(),
        samples: rec.samples[range].to_vec(),
        source: SegmentSource {
            recording: rec.device_id.clone(),
            span: span_index,
        },
    })
}

/// Index range of samples with `from_ms <= t <= to_ms`. Samples are sorted,
/// so the surviving set is always contiguous.
pub fn trim_range(samples: &[Sample], from_ms: i64, to_ms: i64) -> std::ops::Range<usize> {
    let start = samples.partition_point(|s| s.t_ms < from_ms);
    let end = samples.partition_point(|s| s.t_ms <= to_ms);
    start..end.max(start)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mean_rate_hz: f64,
    pub max_gap_ms: i64,
    pub gap_count_over_tol: usize,
}

/// Measured mean rate `(n-1)*1000/(t_last-t_first)` plus gap statistics.
pub fn validate_rate(samples: &[Sample], gap_tol_ms: i64) -> Result<RateReport, IngestError> {
    if samples.len() < 2 {
        return Err(IngestError::TooFewSamples(samples.len()));
    }
    let span_ms = samples[samples.len() - 1].t_ms - samples[0].t_ms;
    let mean_rate_hz = (samples.len() - 1) as f64 * 1000.0 / span_ms as f64;
    let mut max_gap_ms = 0;
    let mut gap_count_over_tol = 0;
    for pair in samples.windows(2) {
        let gap = pair[1].t_ms - pair[0].t_ms;
        max_gap_ms = max_gap_ms.max(gap);
        if gap > gap_tol_ms {
            gap_count_over_tol += 1;
        }
    }
    Ok(RateReport {
        mean_rate_hz,
        max_gap_ms,
        gap_count_over_tol,
    })
}
