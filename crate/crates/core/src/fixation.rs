//! Fixation detection and duration statistics.
//!
//! Fixations are found with a dispersion-threshold detector working in
//! angular space: a window of samples is a fixation when it lasts at least
//! `min_duration` and its azimuth range plus elevation range stays within
//! `max_dispersion` degrees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Point2;
use crate::ingest::{GazeSample, SessionRecording};
use crate::scalar::{self, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixationError {
    #[error("invalid fixation parameters: {0}")]
    InvalidParams(String),
    #[error("empty session")]
    EmptySession,
    #[error("coefficient of variation needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("undefined CV: mean is zero")]
    ZeroMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationParams {
    min_duration_ms: f64,
    max_dispersion_deg: f64,
}

impl FixationParams {
    pub fn new(min_duration_ms: f64, max_dispersion_deg: f64) -> Result<Self, FixationError> {
        if !(min_duration_ms > 0.0 && min_duration_ms.is_finite()) {
            return Err(FixationError::InvalidParams(format!(
                "min_duration must be positive, got {min_duration_ms} ms"
            )));
        }
        if !(max_dispersion_deg > 0.0 && max_dispersion_deg.is_finite()) {
            return Err(FixationError::InvalidParams(format!(
                "max_dispersion must be positive, got {max_dispersion_deg} deg"
            )));
        }
        Ok(FixationParams {
            min_duration_ms,
            max_dispersion_deg,
        })
    }

    pub fn min_duration_ms(&self) -> f64 {
        self.min_duration_ms
    }

    pub fn max_dispersion_deg(&self) -> f64 {
        self.max_dispersion_deg
    }

    fn min_duration_ns(&self) -> u64 {
        (self.min_duration_ms * 1e6).round() as u64
    }
}

impl Default for FixationParams {
    fn default() -> Self {
        FixationParams {
            min_duration_ms: 200.0,
            max_dispersion_deg: 1.0,
        }
    }
}

/// A contiguous interval of stable gaze.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    /// Timestamp of the first member sample.
    pub start_ns: u64,
    /// Timestamp of the last member sample.
    pub end_ns: u64,
    /// `(end_ns - start_ns)` in seconds.
    pub duration: f64,
    pub centroid_px: Point2<f64>,
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
    /// Index of the first member sample in the session.
    pub first_sample: usize,
    pub sample_count: usize,
}

#[derive(Clone, Copy)]
struct Extent {
    az_min: f64,
    az_max: f64,
    el_min: f64,
    el_max: f64,
}

impl Extent {
    fn of(s: &GazeSample) -> Self {
        Extent {
            az_min: s.azimuth,
            az_max: s.azimuth,
            el_min: s.elevation,
            el_max: s.elevation,
        }
    }

    fn with(self, s: &GazeSample) -> Self {
        Extent {
            az_min: self.az_min.min(s.azimuth),
            az_max: self.az_max.max(s.azimuth),
            el_min: self.el_min.min(s.elevation),
            el_max: self.el_max.max(s.elevation),
        }
    }

    fn dispersion(&self) -> f64 {
        (self.az_max - self.az_min) + (self.el_max - self.el_min)
    }
}

fn event_from(samples: &[GazeSample], first: usize, last: usize) -> FixationEvent {
    let members = &samples[first..=last];
    let n = members.len() as f64;
    let (mut sx, mut sy, mut saz, mut sel) = (0.0, 0.0, 0.0, 0.0);
    for s in members {
        sx += s.x;
        sy += s.y;
        saz += s.azimuth;
        sel += s.elevation;
    }
    let start_ns = members[0].timestamp_ns;
    let end_ns = members[members.len() - 1].timestamp_ns;
    FixationEvent {
        start_ns,
        end_ns,
        duration: (end_ns - start_ns) as f64 / 1e9,
        centroid_px: Point2::new(sx / n, sy / n),
        mean_azimuth: saz / n,
        mean_elevation: sel / n,
        first_sample: first,
        sample_count: members.len(),
    }
}

/// Dispersion-threshold fixation detection over (azimuth, elevation).
///
/// Starting at each candidate sample, the window is first stretched to span
/// `min_duration`. If its dispersion is within bounds it keeps growing one
/// sample at a time until the next sample would break the bound, and the
/// window is emitted as a fixation; otherwise the start slides forward by one
/// sample.
pub fn detect_fixations(
    session: &SessionRecording,
    params: &FixationParams,
) -> Result<Vec<FixationEvent>, FixationError> {
    let samples = session.samples();
    if samples.is_empty() {
        return Err(FixationError::EmptySession);
    }
    let min_ns = params.min_duration_ns();
    let max_disp = params.max_dispersion_deg;
    let n = samples.len();
    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        let target = samples[i].timestamp_ns + min_ns;
        let j = i + samples[i..].partition_point(|s| s.timestamp_ns < target);
        if j >= n {
            break;
        }
        let mut extent = samples[i + 1..=j].iter().fold(Extent::of(&samples[i]), Extent::with);
        if extent.dispersion() > max_disp {
            i += 1;
            continue;
        }
        let mut last = j;
        while last + 1 < n {
            let grown = extent.with(&samples[last + 1]);
            if grown.dispersion() > max_disp {
                break;
            }
            extent = grown;
            last += 1;
        }
        events.push(event_from(samples, i, last));
        i = last + 1;
    }
    Ok(events)
}

/// Outcome of [`remove_duration_outliers`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierFilter<T> {
    pub kept: Vec<T>,
    /// Positions of the kept values in the input.
    pub kept_indices: Vec<usize>,
    pub removed: usize,
    /// Q3 + 1.5 IQR; `None` for empty input.
    pub upper_fence: Option<T>,
}

/// Linear-interpolation quantile (the "type 7" estimator) of sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: T) -> Option<T> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let h = T::from_usize_lossy(n - 1) * q;
    let lo = h.floor();
    let lo_i = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_i = (lo_i + 1).min(n - 1);
    Some(sorted[lo_i] + (h - lo) * (sorted[hi_i] - sorted[lo_i]))
}

/// Drops values above the upper Tukey fence `Q3 + 1.5 IQR`.
///
/// Only the upper side is filtered: short fixations are already bounded by
/// the detector's minimum duration. The output preserves input order.
pub fn remove_duration_outliers<T: Scalar>(durations: &[T]) -> OutlierFilter<T> {
    let mut sorted = durations.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let fence = quantile_sorted(&sorted, T::lit(0.25))
        .zip(quantile_sorted(&sorted, T::lit(0.75)))
        .map(|(q1, q3)| q3 + T::lit(1.5) * (q3 - q1));
    let (kept_indices, kept): (Vec<usize>, Vec<T>) = durations
        .iter()
        .enumerate()
        .filter(|(_, &d)| fence.is_none_or(|f| d <= f))
        .map(|(i, &d)| (i, d))
        .unzip();
    OutlierFilter {
        removed: durations.len() - kept.len(),
        kept,
        kept_indices,
        upper_fence: fence,
    }
}

/// Mean fixation duration over one time segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMean {
    pub segment_index: usize,
    pub segment_start_ns: u64,
    pub mean_duration: f64,
    pub fixation_count: usize,
}

/// Bins fixations by start time into consecutive `segment_seconds` windows
/// starting at `origin_ns` and averages durations per window. Windows
/// without fixations are left out of the series.
pub fn segment_mean_durations(
    fixations: &[FixationEvent],
    segment_seconds: f64,
    origin_ns: u64,
) -> Result<Vec<SegmentMean>, FixationError> {
    if !(segment_seconds > 0.0 && segment_seconds.is_finite()) {
        return Err(FixationError::InvalidParams(format!(
            "segment length must be positive, got {segment_seconds} s"
        )));
    }
    let seg_ns = ((segment_seconds * 1e9).round() as u64).max(1);
    let mut bins: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for f in fixations {
        let k = f.start_ns.saturating_sub(origin_ns) / seg_ns;
        let e = bins.entry(k).or_insert((0.0, 0));
        e.0 += f.duration;
        e.1 += 1;
    }
    Ok(bins
        .into_iter()
        .map(|(k, (sum, count))| SegmentMean {
            segment_index: k as usize,
            segment_start_ns: origin_ns + k * seg_ns,
            mean_duration: sum / count as f64,
            fixation_count: count,
        })
        .collect())
}

/// Sample standard deviation divided by the mean.
pub fn coefficient_of_variation<T: Scalar>(values: &[T]) -> Result<T, FixationError> {
    let std = scalar::sample_std(values).ok_or(FixationError::TooFewValues(values.len()))?;
    let mean = scalar::mean(values).expect("non-empty");
    if mean == T::zero() {
        return Err(FixationError::ZeroMean);
    }
    Ok(std / mean)
}
