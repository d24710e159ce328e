//! Pipeline configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{
    ClusterParams, DEFAULT_CHUNK_EPS_FRACTION, DEFAULT_CHUNK_MIN_PTS, DEFAULT_META_EPS_FRACTION, DEFAULT_META_MIN_PTS,
};
use crate::fixation::FixationParams;
use crate::ingest::{FrameSize, SchemaMap, SessionMeta};
use crate::pipeline::PipelineError;

/// Which angles feed the azimuth/elevation statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSource {
    /// Mean angles of detected fixations.
    #[default]
    Fixations,
    /// Every cleaned gaze sample.
    Samples,
}

/// Every tunable of the analysis, with defaults.
///
/// Unset `chunk_eps_px` / `meta_eps_px` resolve to 5% / 7% of the frame
/// diagonal; unset `max_distance_px` means no assignment cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chunk_seconds: f64,
    pub segment_seconds: f64,
    pub chunk_eps_px: Option<f64>,
    pub chunk_min_pts: usize,
    pub meta_eps_px: Option<f64>,
    pub meta_min_pts: usize,
    pub min_fixation_ms: f64,
    pub max_dispersion_deg: f64,
    pub bin_width_deg: f64,
    pub min_confidence: f64,
    pub max_distance_px: Option<f64>,
    pub angle_source: AngleSource,
    pub frame_width: f64,
    pub frame_height: f64,
    pub nominal_rate: f64,
    /// Session label; defaults to the input file stem.
    pub label: Option<String>,
    pub schema: SchemaMap,
    /// Optional names for meta-clusters, keyed by id.
    pub meta_labels: BTreeMap<usize, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let frame = FrameSize::default();
        PipelineConfig {
            chunk_seconds: 10.0,
            segment_seconds: 30.0,
            chunk_eps_px: None,
            chunk_min_pts: DEFAULT_CHUNK_MIN_PTS,
            meta_eps_px: None,
            meta_min_pts: DEFAULT_META_MIN_PTS,
            min_fixation_ms: 200.0,
            max_dispersion_deg: 1.0,
            bin_width_deg: 1.0,
            min_confidence: 0.6,
            max_distance_px: None,
            angle_source: AngleSource::Fixations,
            frame_width: frame.width,
            frame_height: frame.height,
            nominal_rate: 30.0,
            label: None,
            schema: SchemaMap::default(),
            meta_labels: BTreeMap::new(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), PipelineError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        positive("chunk_seconds", self.chunk_seconds)?;
        positive("segment_seconds", self.segment_seconds)?;
        positive("min_fixation_ms", self.min_fixation_ms)?;
        positive("max_dispersion_deg", self.max_dispersion_deg)?;
        positive("bin_width_deg", self.bin_width_deg)?;
        positive("frame_width", self.frame_width)?;
        positive("frame_height", self.frame_height)?;
        positive("nominal_rate", self.nominal_rate)?;
        if let Some(e) = self.chunk_eps_px {
            positive("chunk_eps_px", e)?;
        }
        if let Some(e) = self.meta_eps_px {
            positive("meta_eps_px", e)?;
        }
        if let Some(d) = self.max_distance_px {
            positive("max_distance_px", d)?;
        }
        if self.chunk_min_pts == 0 || self.meta_min_pts == 0 {
            return Err(PipelineError::Config("min_pts values must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(PipelineError::Config(format!(
                "min_confidence must lie in [0, 1], got {}",
                self.min_confidence
            )));
        }
        Ok(())
    }

    pub fn frame(&self) -> FrameSize {
        FrameSize::new(self.frame_width, self.frame_height)
    }

    /// Copy with every derived default filled in, as echoed in reports.
    pub fn resolved(&self) -> Self {
        let diag = self.frame().diagonal();
        PipelineConfig {
            chunk_eps_px: Some(self.chunk_eps_px.unwrap_or(DEFAULT_CHUNK_EPS_FRACTION * diag)),
            meta_eps_px: Some(self.meta_eps_px.unwrap_or(DEFAULT_META_EPS_FRACTION * diag)),
            ..self.clone()
        }
    }

    pub fn chunk_params(&self) -> Result<ClusterParams<f64>, PipelineError> {
        let eps = self.resolved().chunk_eps_px.expect("resolved");
        ClusterParams::new(eps, self.chunk_min_pts).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn meta_params(&self) -> Result<ClusterParams<f64>, PipelineError> {
        let eps = self.resolved().meta_eps_px.expect("resolved");
        ClusterParams::new(eps, self.meta_min_pts).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn fixation_params(&self) -> Result<FixationParams, PipelineError> {
        FixationParams::new(self.min_fixation_ms, self.max_dispersion_deg)
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn session_meta(&self, label: String) -> SessionMeta {
        SessionMeta {
            label,
            nominal_rate: self.nominal_rate,
            frame_size: self.frame(),
        }
    }

    /// The settings that change numeric results; two reports can only be
    /// compared when these agree.
    pub fn analysis_settings(&self) -> Self {
        PipelineConfig {
            label: None,
            meta_labels: BTreeMap::new(),
            schema: SchemaMap::default(),
            ..self.resolved()
        }
    }
}
