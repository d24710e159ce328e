//! Gaze-shift analysis for eye-tracking sessions.
//!
//! A session is a time series of gaze samples carrying both pixel
//! coordinates and head-relative angles. The pipeline finds recurring gaze
//! regions with two-stage density clustering, detects fixations by
//! dispersion thresholding, models region-to-region shifts as a first-order
//! Markov chain and summarizes duration and angle distributions. Two
//! sessions can be compared with two-sample Kolmogorov-Smirnov tests and the
//! Jensen-Shannon distance between angle histograms.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! pipeline itself runs in `f64`, and the aliases below name the concrete
//! types it uses.
//!
//! ```no_run
//! use gazeshift::{analyze_session, emit_report, PipelineConfig};
//!
//! let cfg = PipelineConfig::default();
//! let report = analyze_session("drive.csv", &cfg)?;
//! emit_report(&report, "out/")?;
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod clustering;
pub mod config;
pub mod fixation;
pub mod ingest;
pub mod markov;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod synth;

pub use clustering::{
    build_meta_clusters, cluster_chunks, dbscan, split_chunks, ClusterParams, ClusteringError, Dbscan, MetaCluster,
    Point2, TaggedCentroid,
};
pub use config::{AngleSource, PipelineConfig};
pub use fixation::{
    coefficient_of_variation, detect_fixations, remove_duration_outliers, segment_mean_durations, FixationError,
    FixationEvent, FixationParams, SegmentMean,
};
pub use ingest::{
    clean_session, parse_gaze_csv, parse_gaze_reader, write_gaze_csv, FrameSize, GazeSample, IngestError, SchemaMap,
    SessionMeta, SessionRecording,
};
pub use markov::{assign_meta_cluster_states, build_transition_matrix, MarkovError, StateSequence, TransitionMatrix};
pub use pipeline::{
    analyze_recording, analyze_session, compare_paths, compare_sessions, ComparisonReport, PipelineError, SessionReport,
};
pub use report::{emit_comparison, emit_report};
pub use scalar::Scalar;
pub use stats::{
    histogram_2d, jensen_shannon_distance, ks_two_sample, shared_histograms, Histogram2D, KsResult, StatsError,
};
pub use synth::{generate_synthetic_session, PlantedTruth, ScenarioSpec, SynthError};

/// Pixel-space point.
pub type Point = Point2<f64>;
/// Meta-cluster in pixel space.
pub type Region = MetaCluster<f64>;
pub type Transitions = TransitionMatrix<f64>;
pub type Histogram = Histogram2D<f64>;
pub type KsTest = KsResult<f64>;
