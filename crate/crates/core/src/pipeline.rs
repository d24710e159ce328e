//! End-to-end session analysis and cross-session comparison.
//!
//! ```text
//! ingest -> clean -> chunk -> cluster -> meta-cluster
//!        -> fixations -> outlier filter -> state assignment
//!        -> transition matrix -> statistics
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusteringError, Point2};
use crate::config::{AngleSource, PipelineConfig};
use crate::fixation::{self, FixationError, SegmentMean};
use crate::ingest::{self, IngestError, RemovalCounts, SessionRecording};
use crate::markov::{self, MarkovError, TransitionMatrix};
use crate::stats::{self, AngleSummary, Histogram2D, KsResult, StatsError};

/// Version string embedded in every report.
pub const TOOL_VERSION: &str = concat!("gazeshift ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("ingest stage: {0}")]
    Ingest(#[from] IngestError),
    #[error("ingest stage: {0}")]
    EmptySession(String),
    #[error("clustering stage: {0}")]
    Clustering(#[from] ClusteringError),
    #[error("fixation stage: {0}")]
    Fixation(#[from] FixationError),
    #[error("markov stage: {0}")]
    Markov(#[from] MarkovError),
    #[error("statistics stage: {0}")]
    Stats(#[from] StatsError),
    #[error("comparison: {0}")]
    Incompatible(String),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Ingest(_) | PipelineError::EmptySession(_) => "ingest",
            PipelineError::Clustering(_) => "clustering",
            PipelineError::Fixation(_) => "fixation",
            PipelineError::Markov(_) => "markov",
            PipelineError::Stats(_) => "statistics",
            PipelineError::Incompatible(_) => "comparison",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub samples_parsed: usize,
    pub diagnostics: usize,
    pub removed: RemovalCounts,
    pub samples_analyzed: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSummary {
    pub chunks: usize,
    pub chunk_clusters: usize,
    pub noise_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaClusterSummary {
    pub id: usize,
    pub label: String,
    pub center: Point2<f64>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    /// Display label per state, parallel to the matrix rows.
    pub labels: Vec<String>,
    pub matrix: TransitionMatrix<f64>,
    pub assigned_fixations: usize,
    pub dropped_fixations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationRecord {
    pub start_ns: u64,
    pub end_ns: u64,
    pub duration_s: f64,
    pub centroid_px: Point2<f64>,
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
    /// Meta-cluster id, `None` when beyond the assignment cutoff.
    pub state: Option<usize>,
    /// Removed from duration statistics by the outlier fence.
    pub outlier: bool,
}

/// Duration statistics over fixations that survived the outlier filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationStats {
    pub detected: usize,
    pub outliers_removed: usize,
    pub upper_fence_s: Option<f64>,
    pub count: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub tool_version: String,
    pub label: String,
    pub config: PipelineConfig,
    pub ingest: IngestSummary,
    pub chunking: ChunkSummary,
    pub meta_clusters: Vec<MetaClusterSummary>,
    pub transitions: TransitionReport,
    pub fixation_stats: FixationStats,
    pub fixations: Vec<FixationRecord>,
    pub segment_means: Vec<SegmentMean>,
    pub angles: AngleSummary<f64>,
    /// Raw (azimuth, elevation) pairs, present only when angle statistics
    /// come from samples rather than fixations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angle_samples: Vec<(f64, f64)>,
    pub angle_histogram: Histogram2D<f64>,
}

impl SessionReport {
    /// Durations that entered the statistics (outliers excluded).
    pub fn filtered_durations(&self) -> Vec<f64> {
        self.fixations
            .iter()
            .filter(|f| !f.outlier)
            .map(|f| f.duration_s)
            .collect()
    }

    /// The (azimuth, elevation) points behind the angle statistics.
    pub fn angle_points(&self) -> Vec<(f64, f64)> {
        match self.config.angle_source {
            AngleSource::Fixations => self
                .fixations
                .iter()
                .map(|f| (f.mean_azimuth, f.mean_elevation))
                .collect(),
            AngleSource::Samples => self.angle_samples.clone(),
        }
    }
}

/// Parses, cleans and analyzes a CSV file.
pub fn analyze_session(path: impl AsRef<Path>, config: &PipelineConfig) -> Result<SessionReport, PipelineError> {
    config.validate()?;
    let path = path.as_ref();
    let label = config.label.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "session".into())
    });
    let parsed = ingest::parse_gaze_csv(path, &config.schema, config.session_meta(label))?;
    analyze_recording(&parsed.session, parsed.diagnostics.len(), config)
}

/// Analyzes an in-memory session (cleaning included).
pub fn analyze_recording(
    raw: &SessionRecording,
    diagnostics: usize,
    config: &PipelineConfig,
) -> Result<SessionReport, PipelineError> {
    config.validate()?;
    if raw.is_empty() {
        return Err(PipelineError::EmptySession("input has no samples".into()));
    }
    let cleaned = ingest::clean_session(raw, config.min_confidence);
    if cleaned.warning.is_some() {
        return Err(PipelineError::EmptySession(format!(
            "all {} samples removed by cleaning",
            raw.len()
        )));
    }
    let session = cleaned.session;
    let resolved = config.resolved();

    let chunks = clustering::split_chunks(&session, config.chunk_seconds)?;
    let chunk_results = clustering::cluster_chunks(&chunks, &config.chunk_params()?)?;
    let centroids = clustering::pooled_centroids(&chunk_results);
    let mut metas = clustering::build_meta_clusters(&centroids, &config.meta_params()?)?;
    for m in &mut metas {
        m.user_label = config.meta_labels.get(&m.id).cloned();
    }

    let events = fixation::detect_fixations(&session, &config.fixation_params()?)?;
    let durations: Vec<f64> = events.iter().map(|e| e.duration).collect();
    let filter = fixation::remove_duration_outliers(&durations);
    let mut is_outlier = vec![true; events.len()];
    for &i in &filter.kept_indices {
        is_outlier[i] = false;
    }
    let mean_s = crate::scalar::mean(&filter.kept).ok_or(FixationError::TooFewValues(0))?;
    let cv = fixation::coefficient_of_variation(&filter.kept)?;
    let std_s = crate::scalar::sample_std(&filter.kept).expect("cv succeeded");
    let kept_events: Vec<_> = filter.kept_indices.iter().map(|&i| events[i]).collect();
    let origin = session.samples()[0].timestamp_ns;
    let segment_means = fixation::segment_mean_durations(&kept_events, config.segment_seconds, origin)?;

    let seq = markov::assign_meta_cluster_states(&events, &metas, config.max_distance_px)?;
    let matrix = markov::build_transition_matrix::<f64>(&seq, metas.len())?;
    let fixations: Vec<FixationRecord> = events
        .iter()
        .zip(&is_outlier)
        .map(|(e, &outlier)| {
            let state = markov::nearest_meta(&e.centroid_px, &metas)
                .filter(|&(_, d)| config.max_distance_px.is_none_or(|max| d <= max))
                .map(|(id, _)| id);
            FixationRecord {
                start_ns: e.start_ns,
                end_ns: e.end_ns,
                duration_s: e.duration,
                centroid_px: e.centroid_px,
                mean_azimuth: e.mean_azimuth,
                mean_elevation: e.mean_elevation,
                state,
                outlier,
            }
        })
        .collect();

    let angle_samples: Vec<(f64, f64)> = match config.angle_source {
        AngleSource::Fixations => Vec::new(),
        AngleSource::Samples => session.samples().iter().map(|s| (s.azimuth, s.elevation)).collect(),
    };
    let angle_points: Vec<(f64, f64)> = match config.angle_source {
        AngleSource::Fixations => events.iter().map(|e| (e.mean_azimuth, e.mean_elevation)).collect(),
        AngleSource::Samples => angle_samples.clone(),
    };
    let angles = stats::summarize_angles(&angle_points)?;
    let angle_histogram = stats::histogram_2d(&angle_points, config.bin_width_deg)?;

    Ok(SessionReport {
        tool_version: TOOL_VERSION.to_string(),
        label: session.label().to_string(),
        config: resolved,
        ingest: IngestSummary {
            samples_parsed: raw.len(),
            diagnostics,
            removed: cleaned.removed,
            samples_analyzed: session.len(),
            duration_s: (session.span_ns() + session.sample_period_ns()) as f64 / 1e9,
        },
        chunking: ChunkSummary {
            chunks: chunks.len(),
            chunk_clusters: centroids.len(),
            noise_points: chunk_results.iter().map(|c| c.noise_count).sum(),
        },
        meta_clusters: metas
            .iter()
            .map(|m| MetaClusterSummary {
                id: m.id,
                label: m.display_label(),
                center: m.center,
                member_count: m.member_count(),
            })
            .collect(),
        transitions: TransitionReport {
            labels: metas.iter().map(|m| m.display_label()).collect(),
            matrix,
            assigned_fixations: seq.len(),
            dropped_fixations: seq.dropped,
        },
        fixation_stats: FixationStats {
            detected: events.len(),
            outliers_removed: filter.removed,
            upper_fence_s: filter.upper_fence,
            count: filter.kept.len(),
            mean_s,
            std_s,
            cv,
        },
        fixations,
        segment_means,
        angles,
        angle_samples,
        angle_histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    /// `b - a` for each quantity.
    pub mean_duration_s: f64,
    pub cv: f64,
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tool_version: String,
    pub a: SessionReport,
    pub b: SessionReport,
    pub ks_durations: KsResult<f64>,
    pub ks_azimuth: KsResult<f64>,
    pub ks_elevation: KsResult<f64>,
    /// Jensen-Shannon distance between the joint angle histograms.
    pub jsd: f64,
    pub histogram_a: Histogram2D<f64>,
    pub histogram_b: Histogram2D<f64>,
    pub deltas: Deltas,
}

/// Compares two session reports produced with the same analysis settings.
pub fn compare_sessions(a: &SessionReport, b: &SessionReport) -> Result<ComparisonReport, PipelineError> {
    if a.config.analysis_settings() != b.config.analysis_settings() {
        return Err(PipelineError::Incompatible(
            "reports were produced with different analysis settings".into(),
        ));
    }
    let ks_durations = stats::ks_two_sample(&a.filtered_durations(), &b.filtered_durations())?;
    let (pa, pb) = (a.angle_points(), b.angle_points());
    let az = |p: &[(f64, f64)]| p.iter().map(|x| x.0).collect::<Vec<_>>();
    let el = |p: &[(f64, f64)]| p.iter().map(|x| x.1).collect::<Vec<_>>();
    let ks_azimuth = stats::ks_two_sample(&az(&pa), &az(&pb))?;
    let ks_elevation = stats::ks_two_sample(&el(&pa), &el(&pb))?;
    let (histogram_a, histogram_b) = stats::shared_histograms(&pa, &pb, a.config.bin_width_deg)?;
    let jsd = stats::jensen_shannon_distance(&histogram_a, &histogram_b)?;
    Ok(ComparisonReport {
        tool_version: TOOL_VERSION.to_string(),
        deltas: Deltas {
            mean_duration_s: b.fixation_stats.mean_s - a.fixation_stats.mean_s,
            cv: b.fixation_stats.cv - a.fixation_stats.cv,
            mean_azimuth: b.angles.mean_azimuth - a.angles.mean_azimuth,
            mean_elevation: b.angles.mean_elevation - a.angles.mean_elevation,
        },
        a: a.clone(),
        b: b.clone(),
        ks_durations,
        ks_azimuth,
        ks_elevation,
        jsd,
        histogram_a,
        histogram_b,
    })
}

/// Analyzes two files concurrently and compares them.
pub fn compare_paths(
    a: impl AsRef<Path> + Sync,
    b: impl AsRef<Path> + Sync,
    config: &PipelineConfig,
) -> Result<ComparisonReport, PipelineError> {
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| analyze_session(a.as_ref(), config));
        let rb = analyze_session(b.as_ref(), config);
        (ha.join().expect("analysis thread panicked"), rb)
    });
    compare_sessions(&ra?, &rb?)
}
