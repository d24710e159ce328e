//! Gaze recording ingestion: CSV parsing, validation and cleaning.
//!
//! The default column layout is
//! `timestamp_ns,gaze_x_px,gaze_y_px,azimuth_deg,elevation_deg,confidence`.
//! Other exports can be read by remapping column names with [`SchemaMap`].
//! The confidence column is optional and defaults to 1.0 when absent.
//!
//! Rows that cannot be parsed are never dropped silently: each one produces a
//! line-numbered [`Diagnostic`] returned next to the session.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Share of data rows allowed to carry an unparseable timestamp before the
/// whole file is rejected.
pub const MAX_BAD_TIMESTAMP_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: column `{column}` not found in header")]
    MissingColumn { column: String },
    #[error("format error: {bad} of {total} rows have an unparseable timestamp")]
    BadTimestamps { bad: usize, total: usize },
    #[error("invalid session: {0}")]
    InvalidSession(String),
}

/// One timestamped gaze frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Nanoseconds since recording start.
    pub timestamp_ns: u64,
    /// Scene-camera horizontal position, pixels.
    pub x: f64,
    /// Scene-camera vertical position, pixels (down is positive).
    pub y: f64,
    /// Horizontal gaze angle in degrees, negative to the left.
    pub azimuth: f64,
    /// Vertical gaze angle in degrees, negative below straight ahead.
    pub elevation: f64,
    /// Tracker confidence in `[0, 1]`.
    pub confidence: f64,
}

impl GazeSample {
    pub fn new(timestamp_ns: u64, x: f64, y: f64, azimuth: f64, elevation: f64) -> Self {
        GazeSample {
            timestamp_ns,
            x,
            y,
            azimuth,
            elevation,
            confidence: 1.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.azimuth.is_finite() && self.elevation.is_finite()
    }
}

/// Scene camera frame size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: f64,
    pub height: f64,
}

impl FrameSize {
    pub fn new(width: f64, height: f64) -> Self {
        FrameSize { width, height }
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }
}

impl Default for FrameSize {
    fn default() -> Self {
        FrameSize::new(1600.0, 1200.0)
    }
}

/// Session-level metadata that does not come from the CSV body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub label: String,
    /// Nominal samples per second.
    pub nominal_rate: f64,
    pub frame_size: FrameSize,
}

impl Default for SessionMeta {
    fn default() -> Self {
        SessionMeta {
            label: String::from("session"),
            nominal_rate: 30.0,
            frame_size: FrameSize::default(),
        }
    }
}

/// A validated, time-ordered sequence of gaze samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    samples: Vec<GazeSample>,
    meta: SessionMeta,
}

impl SessionRecording {
    /// Builds a session from samples already sorted by strictly increasing timestamp.
    pub fn new(samples: Vec<GazeSample>, meta: SessionMeta) -> Result<Self, IngestError> {
        if !(meta.nominal_rate > 0.0 && meta.nominal_rate.is_finite()) {
            return Err(IngestError::InvalidSession(format!(
                "nominal rate must be positive, got {}",
                meta.nominal_rate
            )));
        }
        if !(meta.frame_size.width > 0.0 && meta.frame_size.height > 0.0) {
            return Err(IngestError::InvalidSession(
                "frame size components must be positive".into(),
            ));
        }
        if let Some(w) = samples.windows(2).position(|w| w[1].timestamp_ns <= w[0].timestamp_ns) {
            return Err(IngestError::InvalidSession(format!(
                "timestamps not strictly increasing at sample {}",
                w + 1
            )));
        }
        Ok(SessionRecording { samples, meta })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn label(&self) -> &str {
        &self.meta.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Nominal sample period in nanoseconds, rounded.
    pub fn sample_period_ns(&self) -> u64 {
        (1e9 / self.meta.nominal_rate).round() as u64
    }

    /// Time from the first to the last sample in nanoseconds (0 when empty).
    pub fn span_ns(&self) -> u64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp_ns - a.timestamp_ns,
            _ => 0,
        }
    }

    /// Adds the same offset to every timestamp.
    pub fn shifted(&self, offset_ns: u64) -> SessionRecording {
        let samples = self
            .samples
            .iter()
            .map(|s| GazeSample {
                timestamp_ns: s.timestamp_ns + offset_ns,
                ..*s
            })
            .collect();
        SessionRecording {
            samples,
            meta: self.meta.clone(),
        }
    }
}

/// Header names for each field of [`GazeSample`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaMap {
    pub timestamp: String,
    pub x: String,
    pub y: String,
    pub azimuth: String,
    pub elevation: String,
    pub confidence: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            timestamp: "timestamp_ns".into(),
            x: "gaze_x_px".into(),
            y: "gaze_y_px".into(),
            azimuth: "azimuth_deg".into(),
            elevation: "elevation_deg".into(),
            confidence: "confidence".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    FieldCount,
    BadTimestamp,
    BadValue,
    OutOfRange,
    DuplicateTimestamp,
}

/// A problem found on one input line (1-based, header is line 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: u64,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestWarning {
    /// The file had a header but no data rows.
    EmptyInput,
    /// Cleaning removed every sample.
    AllSamplesRemoved,
}

#[derive(Debug, Clone)]
pub struct ParsedSession {
    pub session: SessionRecording,
    pub diagnostics: Vec<Diagnostic>,
    pub warnings: Vec<IngestWarning>,
}

/// Reads a gaze CSV file. See [`parse_gaze_reader`].
pub fn parse_gaze_csv(
    path: impl AsRef<Path>,
    schema: &SchemaMap,
    meta: SessionMeta,
) -> Result<ParsedSession, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_gaze_reader(file, schema, meta)
}

struct Columns {
    timestamp: usize,
    x: usize,
    y: usize,
    azimuth: usize,
    elevation: usize,
    confidence: Option<usize>,
}

impl Columns {
    fn resolve(header: &csv::StringRecord, schema: &SchemaMap) -> Result<Self, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| {
            find(name).ok_or_else(|| IngestError::MissingColumn {
                column: name.to_string(),
            })
        };
        Ok(Columns {
            timestamp: need(&schema.timestamp)?,
            x: need(&schema.x)?,
            y: need(&schema.y)?,
            azimuth: need(&schema.azimuth)?,
            elevation: need(&schema.elevation)?,
            confidence: find(&schema.confidence),
        })
    }
}

enum RowError {
    Timestamp(String),
    Other(DiagnosticKind, String),
}

fn parse_coordinate(raw: &str, name: &str) -> Result<f64, RowError> {
    let raw = raw.trim();
    if raw.is_empty() {
        // Trackers leave coordinates blank during blinks; cleaning removes them.
        return Ok(f64::NAN);
    }
    raw.parse::<f64>()
        .map_err(|_| RowError::Other(DiagnosticKind::BadValue, format!("cannot parse {name} value `{raw}`")))
}

fn parse_row(record: &csv::StringRecord, cols: &Columns) -> Result<GazeSample, RowError> {
    let field = |i: usize| record.get(i).unwrap_or("");
    let ts_raw = field(cols.timestamp).trim();
    let timestamp_ns = ts_raw
        .parse::<u64>()
        .map_err(|_| RowError::Timestamp(format!("cannot parse timestamp `{ts_raw}`")))?;
    let x = parse_coordinate(field(cols.x), "x")?;
    let y = parse_coordinate(field(cols.y), "y")?;
    let azimuth = parse_coordinate(field(cols.azimuth), "azimuth")?;
    let elevation = parse_coordinate(field(cols.elevation), "elevation")?;
    let confidence = match cols.confidence.map(|i| field(i).trim()) {
        None | Some("") => 1.0,
        Some(raw) => raw
            .parse::<f64>()
            .map_err(|_| RowError::Other(DiagnosticKind::BadValue, format!("cannot parse confidence `{raw}`")))?,
    };

    if azimuth.is_finite() && !(-180.0..=180.0).contains(&azimuth) {
        return Err(RowError::Other(
            DiagnosticKind::OutOfRange,
            format!("azimuth {azimuth} outside [-180, 180]"),
        ));
    }
    if elevation.is_finite() && !(-90.0..=90.0).contains(&elevation) {
        return Err(RowError::Other(
            DiagnosticKind::OutOfRange,
            format!("elevation {elevation} outside [-90, 90]"),
        ));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(RowError::Other(
            DiagnosticKind::OutOfRange,
            format!("confidence {confidence} outside [0, 1]"),
        ));
    }
    Ok(GazeSample {
        timestamp_ns,
        x,
        y,
        azimuth,
        elevation,
        confidence,
    })
}

/// Parses gaze rows from any reader.
///
/// Samples come back sorted by timestamp. When several rows share a timestamp
/// the first one in file order is kept and the rest are reported as
/// duplicates. A header-only input yields an empty session and an
/// [`IngestWarning::EmptyInput`] warning.
pub fn parse_gaze_reader<R: Read>(
    reader: R,
    schema: &SchemaMap,
    meta: SessionMeta,
) -> Result<ParsedSession, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::resolve(&header, schema)?;

    let mut rows: Vec<(u64, GazeSample)> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut total = 0usize;
    let mut bad_timestamps = 0usize;

    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        total += 1;
        if record.len() != header.len() {
            diagnostics.push(Diagnostic {
                line,
                kind: DiagnosticKind::FieldCount,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
            continue;
        }
        match parse_row(&record, &cols) {
            Ok(sample) => rows.push((line, sample)),
            Err(RowError::Timestamp(message)) => {
                bad_timestamps += 1;
                diagnostics.push(Diagnostic {
                    line,
                    kind: DiagnosticKind::BadTimestamp,
                    message,
                });
            }
            Err(RowError::Other(kind, message)) => diagnostics.push(Diagnostic { line, kind, message }),
        }
    }

    if total > 0 && bad_timestamps as f64 > MAX_BAD_TIMESTAMP_FRACTION * total as f64 {
        return Err(IngestError::BadTimestamps {
            bad: bad_timestamps,
            total,
        });
    }

    // Stable sort keeps file order among equal timestamps.
    rows.sort_by_key(|(_, s)| s.timestamp_ns);
    let mut samples: Vec<GazeSample> = Vec::with_capacity(rows.len());
    for (line, sample) in rows {
        if samples
            .last()
            .is_some_and(|prev| prev.timestamp_ns == sample.timestamp_ns)
        {
            diagnostics.push(Diagnostic {
                line,
                kind: DiagnosticKind::DuplicateTimestamp,
                message: format!("duplicate timestamp {}", sample.timestamp_ns),
            });
            continue;
        }
        samples.push(sample);
    }
    diagnostics.sort_by_key(|d| d.line);

    let mut warnings = Vec::new();
    if total == 0 {
        warnings.push(IngestWarning::EmptyInput);
    }
    Ok(ParsedSession {
        session: SessionRecording::new(samples, meta)?,
        diagnostics,
        warnings,
    })
}

/// Writes a session in the default column layout.
pub fn write_gaze_csv<W: Write>(session: &SessionRecording, writer: W) -> Result<(), IngestError> {
    let schema = SchemaMap::default();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        &schema.timestamp,
        &schema.x,
        &schema.y,
        &schema.azimuth,
        &schema.elevation,
        &schema.confidence,
    ])?;
    for s in session.samples() {
        wtr.write_record([
            s.timestamp_ns.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.azimuth.to_string(),
            s.elevation.to_string(),
            s.confidence.to_string(),
        ])?;
    }
    wtr.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Per-reason removal counts from [`clean_session`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalCounts {
    pub non_finite: usize,
    pub out_of_frame: usize,
    pub low_confidence: usize,
}

impl RemovalCounts {
    pub fn total(&self) -> usize {
        self.non_finite + self.out_of_frame + self.low_confidence
    }
}

#[derive(Debug, Clone)]
pub struct CleanOutcome {
    pub session: SessionRecording,
    pub removed: RemovalCounts,
    pub warning: Option<IngestWarning>,
}

/// Drops non-finite, out-of-frame and low-confidence samples, keeping order.
pub fn clean_session(session: &SessionRecording, min_confidence: f64) -> CleanOutcome {
    let frame = session.meta().frame_size;
    let mut removed = RemovalCounts::default();
    let samples: Vec<GazeSample> = session
        .samples()
        .iter()
        .filter(|s| {
            if !s.is_finite() {
                removed.non_finite += 1;
                false
            } else if !frame.contains(s.x, s.y) {
                removed.out_of_frame += 1;
                false
            } else if s.confidence < min_confidence {
                removed.low_confidence += 1;
                false
            } else {
                true
            }
        })
        .copied()
        .collect();
    let warning = (samples.is_empty() && !session.is_empty()).then_some(IngestWarning::AllSamplesRemoved);
    CleanOutcome {
        session: SessionRecording {
            samples,
            meta: session.meta().clone(),
        },
        removed,
        warning,
    }
}
