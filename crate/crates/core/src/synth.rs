//! Seeded synthetic gaze sessions with planted ground truth.
//!
//! A scenario plants a set of attention regions and a Markov chain over
//! them. The generator walks the chain: every visit is a fixation whose
//! center is drawn around the region center, followed by a short saccade
//! that linearly interpolates to the next fixation. Everything planted
//! (state sequence, fixation intervals, saccade gaps) is returned next to
//! the session so the analysis pipeline can be checked against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Point2;
use crate::ingest::{FrameSize, GazeSample, SessionMeta, SessionRecording};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

/// One planted attention region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub center_px: Point2<f64>,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Standard deviation of fixation centers around the region center, pixels.
    pub spatial_sigma_px: f64,
}

/// Fixation duration model: `floor_s` plus a log-normal moment-matched so
/// the total has mean `mean_s` and standard deviation `std_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSpec {
    pub mean_s: f64,
    pub std_s: f64,
    #[serde(default)]
    pub floor_s: f64,
}

impl DwellSpec {
    pub fn new(mean_s: f64, std_s: f64) -> Self {
        DwellSpec {
            mean_s,
            std_s,
            floor_s: 0.0,
        }
    }

    pub fn with_floor(mut self, floor_s: f64) -> Self {
        self.floor_s = floor_s;
        self
    }

    fn sampler(&self) -> Result<DwellSampler, SynthError> {
        let excess = self.mean_s - self.floor_s;
        if self.std_s == 0.0 {
            return Ok(DwellSampler::Fixed(self.mean_s));
        }
        let sigma2 = (1.0 + (self.std_s / excess).powi(2)).ln();
        let mu = excess.ln() - sigma2 / 2.0;
        let dist = LogNormal::new(mu, sigma2.sqrt())
            .map_err(|e| SynthError::InvalidSpec(format!("dwell distribution: {e}")))?;
        Ok(DwellSampler::Shifted {
            floor: self.floor_s,
            dist,
        })
    }
}

enum DwellSampler {
    Fixed(f64),
    Shifted { floor: f64, dist: LogNormal<f64> },
}

impl DwellSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            DwellSampler::Fixed(d) => *d,
            DwellSampler::Shifted { floor, dist } => floor + dist.sample(rng),
        }
    }
}

fn default_saccade_gap_ms() -> f64 {
    80.0
}
fn default_rate() -> f64 {
    30.0
}
fn default_dpp() -> f64 {
    0.06
}
fn default_jitter() -> f64 {
    0.05
}
fn default_min_saccade() -> f64 {
    5.0
}
fn default_label() -> String {
    "synthetic".into()
}

/// Everything needed to generate a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub regions: Vec<RegionSpec>,
    /// Row-stochastic transition matrix over regions.
    pub chain: Vec<Vec<f64>>,
    /// One duration model per region.
    pub dwell: Vec<DwellSpec>,
    #[serde(default = "default_saccade_gap_ms")]
    pub saccade_gap_ms: f64,
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
    /// Linear pixel-to-angle scale around each region center.
    #[serde(default = "default_dpp")]
    pub degrees_per_pixel: f64,
    /// Per-sample angular noise within a fixation, degrees.
    #[serde(default = "default_jitter")]
    pub fixation_jitter_deg: f64,
    /// Minimum angular distance between consecutive fixation centers.
    #[serde(default = "default_min_saccade")]
    pub min_saccade_deg: f64,
    #[serde(default)]
    pub frame: FrameSize,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default = "default_label")]
    pub label: String,
}

/// False for NaN as well as negatives.
fn non_negative(v: f64) -> bool {
    v >= 0.0 && v.is_finite()
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        let k = self.regions.len();
        if k == 0 {
            return bad("at least one region is required".into());
        }
        if self.chain.len() != k || self.chain.iter().any(|r| r.len() != k) {
            return bad(format!("chain must be {k}x{k}"));
        }
        for (i, row) in self.chain.iter().enumerate() {
            if !row.iter().all(|&p| non_negative(p)) {
                return bad(format!("chain row {i} has a negative or NaN entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("chain row {i} sums to {s}"));
            }
        }
        if self.dwell.len() != k {
            return bad(format!("expected {k} dwell models, got {}", self.dwell.len()));
        }
        if !positive(self.rate_hz) {
            return bad("rate must be positive".into());
        }
        if !positive(self.duration_s) {
            return bad("duration must be positive".into());
        }
        if !non_negative(self.saccade_gap_ms) {
            return bad("saccade gap must be non-negative".into());
        }
        if !positive(self.degrees_per_pixel) {
            return bad("degrees_per_pixel must be positive".into());
        }
        if !(non_negative(self.fixation_jitter_deg) && non_negative(self.min_saccade_deg)) {
            return bad("jitter and saccade amplitude must be non-negative".into());
        }
        if !(positive(self.frame.width) && positive(self.frame.height)) {
            return bad("frame size must be positive".into());
        }
        if self.initial_state >= k {
            return bad(format!("initial state {} out of range", self.initial_state));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if !non_negative(r.spatial_sigma_px) {
                return bad(format!("region {i} sigma must be non-negative"));
            }
            if !self.frame.contains(r.center_px.x, r.center_px.y) {
                return bad(format!("region {i} center outside the frame"));
            }
        }
        let min_dwell = 2.0 / self.rate_hz;
        for (i, d) in self.dwell.iter().enumerate() {
            if !(d.std_s >= 0.0 && d.floor_s >= 0.0) {
                return bad(format!("dwell {i}: std and floor must be non-negative"));
            }
            let above_floor = d.mean_s > d.floor_s || (d.std_s == 0.0 && d.mean_s >= d.floor_s);
            if !above_floor {
                return bad(format!("dwell {i}: mean must exceed floor"));
            }
            if d.mean_s < min_dwell {
                return Err(SynthError::Infeasible(format!(
                    "dwell {i}: mean {} s is shorter than two sample periods ({min_dwell} s)",
                    d.mean_s
                )));
            }
        }
        Ok(())
    }
}

/// One planted fixation; `start_ns`/`end_ns` are its first and last sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedFixation {
    pub state: usize,
    pub start_ns: u64,
    pub end_ns: u64,
    pub first_sample: usize,
    pub sample_count: usize,
    pub center_px: Point2<f64>,
    pub center_azimuth: f64,
    pub center_elevation: f64,
    /// Means over the emitted (jittered) samples.
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
}

impl PlantedFixation {
    pub fn duration(&self) -> f64 {
        (self.end_ns - self.start_ns) as f64 / 1e9
    }
}

/// Samples between two fixations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedGap {
    pub start_ns: u64,
    pub end_ns: u64,
    pub first_sample: usize,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub seed: u64,
    pub chain: Vec<Vec<f64>>,
    pub regions: Vec<RegionSpec>,
    /// State of every fixation in order.
    pub states: Vec<usize>,
    pub fixations: Vec<PlantedFixation>,
    pub saccades: Vec<PlantedGap>,
    pub sample_count: usize,
}

impl PlantedTruth {
    pub fn durations(&self) -> Vec<f64> {
        self.fixations.iter().map(PlantedFixation::duration).collect()
    }

    /// Row-normalised pair frequencies of the planted state sequence.
    pub fn empirical_chain(&self) -> Vec<Vec<f64>> {
        let k = self.chain.len();
        let mut counts = vec![vec![0u64; k]; k];
        for w in self.states.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

struct Generator<'a> {
    spec: &'a ScenarioSpec,
    rng: ChaCha8Rng,
    samples: Vec<GazeSample>,
}

impl Generator<'_> {
    fn timestamp(&self, tick: usize) -> u64 {
        (tick as f64 * 1e9 / self.spec.rate_hz).round() as u64
    }

    fn normal(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sigma).expect("sigma validated").sample(&mut self.rng)
    }

    /// Draws a fixation center in pixels and degrees.
    fn place(&mut self, state: usize, prev: Option<(f64, f64)>) -> Result<(Point2<f64>, f64, f64), SynthError> {
        let region = &self.spec.regions[state];
        let dpp = self.spec.degrees_per_pixel;
        let margin = 3.0 * self.spec.fixation_jitter_deg / dpp;
        let frame = self.spec.frame;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let dx = self.normal(region.spatial_sigma_px);
            let dy = self.normal(region.spatial_sigma_px);
            let px = Point2::new(region.center_px.x + dx, region.center_px.y + dy);
            let in_frame =
                px.x >= margin && px.y >= margin && px.x <= frame.width - margin && px.y <= frame.height - margin;
            let az = region.azimuth_deg + dx * dpp;
            let el = region.elevation_deg - dy * dpp;
            let far_enough = prev.is_none_or(|(paz, pel)| (az - paz).hypot(el - pel) >= self.spec.min_saccade_deg);
            if in_frame && far_enough {
                return Ok((px, az, el));
            }
        }
        Err(SynthError::Infeasible(format!(
            "could not place a fixation in region {state} at least {} deg from the previous one",
            self.spec.min_saccade_deg
        )))
    }

    fn push(&mut self, tick: usize, x: f64, y: f64, azimuth: f64, elevation: f64) {
        let frame = self.spec.frame;
        let ts = self.timestamp(tick);
        self.samples.push(GazeSample {
            timestamp_ns: ts,
            x: x.clamp(0.0, frame.width),
            y: y.clamp(0.0, frame.height),
            azimuth,
            elevation,
            confidence: 1.0,
        });
    }

    fn next_state(&mut self, state: usize) -> usize {
        let row = &self.spec.chain[state];
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // Rounding in the row sum; fall back to the last reachable state.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(state)
    }
}

/// Generates a session and its planted truth. Deterministic per seed.
///
/// Each fixation lasts `round(d * rate) + 1` samples for a drawn duration
/// `d` (at least 3 samples), so its first-to-last span is `d` rounded to the
/// sample grid. Generation stops at the last fixation that fits entirely
/// inside `duration_s`.
pub fn generate_synthetic_session(spec: &ScenarioSpec) -> Result<(SessionRecording, PlantedTruth), SynthError> {
    spec.validate()?;
    let samplers = spec
        .dwell
        .iter()
        .map(DwellSpec::sampler)
        .collect::<Result<Vec<_>, _>>()?;
    let total_ticks = (spec.duration_s * spec.rate_hz).round() as usize;
    let gap_ticks = if spec.saccade_gap_ms == 0.0 {
        0
    } else {
        ((spec.saccade_gap_ms / 1000.0 * spec.rate_hz).round() as usize).max(1)
    };

    let mut gen = Generator {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        samples: Vec::with_capacity(total_ticks),
    };
    let mut truth = PlantedTruth {
        seed: spec.seed,
        chain: spec.chain.clone(),
        regions: spec.regions.clone(),
        states: Vec::new(),
        fixations: Vec::new(),
        saccades: Vec::new(),
        sample_count: 0,
    };

    let mut state = spec.initial_state;
    let mut tick = 0usize;
    let mut prev: Option<PlantedFixation> = None;
    loop {
        let d = samplers[state].sample(&mut gen.rng);
        let n = ((d * spec.rate_hz).round() as usize + 1).max(3);
        let gap = if prev.is_some() { gap_ticks } else { 0 };
        if tick + gap + n > total_ticks {
            break;
        }
        let (center_px, caz, cel) = gen.place(state, prev.map(|p| (p.center_azimuth, p.center_elevation)))?;

        if let Some(p) = prev {
            let first_sample = gen.samples.len();
            for m in 1..=gap {
                let f = m as f64 / (gap + 1) as f64;
                let lerp = |a: f64, b: f64| a + (b - a) * f;
                gen.push(
                    tick,
                    lerp(p.center_px.x, center_px.x),
                    lerp(p.center_px.y, center_px.y),
                    lerp(p.center_azimuth, caz),
                    lerp(p.center_elevation, cel),
                );
                tick += 1;
            }
            if gap > 0 {
                truth.saccades.push(PlantedGap {
                    start_ns: gen.samples[first_sample].timestamp_ns,
                    end_ns: gen.samples[gen.samples.len() - 1].timestamp_ns,
                    first_sample,
                    sample_count: gap,
                });
            }
        }

        let first_sample = gen.samples.len();
        let (mut saz, mut sel) = (0.0, 0.0);
        for _ in 0..n {
            let jaz = gen.normal(spec.fixation_jitter_deg);
            let jel = gen.normal(spec.fixation_jitter_deg);
            let (az, el) = (caz + jaz, cel + jel);
            gen.push(
                tick,
                center_px.x + jaz / spec.degrees_per_pixel,
                center_px.y - jel / spec.degrees_per_pixel,
                az,
                el,
            );
            saz += az;
            sel += el;
            tick += 1;
        }
        let fixation = PlantedFixation {
            state,
            start_ns: gen.samples[first_sample].timestamp_ns,
            end_ns: gen.samples[gen.samples.len() - 1].timestamp_ns,
            first_sample,
            sample_count: n,
            center_px,
            center_azimuth: caz,
            center_elevation: cel,
            mean_azimuth: saz / n as f64,
            mean_elevation: sel / n as f64,
        };
        truth.states.push(state);
        truth.fixations.push(fixation);
        prev = Some(fixation);
        state = gen.next_state(state);
    }

    truth.sample_count = gen.samples.len();
    let meta = SessionMeta {
        label: spec.label.clone(),
        nominal_rate: spec.rate_hz,
        frame_size: spec.frame,
    };
    let session = SessionRecording::new(gen.samples, meta).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok((session, truth))
}

/// Ready-made scenarios on a 1600x1200 scene camera.
pub mod presets {
    use super::*;

    /// Angles for a pixel position under the presets' shared camera model.
    fn angles(x: f64, y: f64) -> (f64, f64) {
        ((x - 800.0) * 0.06, (600.0 - y) * 0.06 - 10.0)
    }

    /// A region at pixel `(x, y)` with 40 px spread, angles from the shared camera model.
    pub fn region(x: f64, y: f64) -> RegionSpec {
        let (azimuth_deg, elevation_deg) = angles(x, y);
        RegionSpec {
            center_px: Point2::new(x, y),
            azimuth_deg,
            elevation_deg,
            spatial_sigma_px: 40.0,
        }
    }

    /// Road, rear-view mirror, dashboard and upper-left windshield.
    pub fn driving_regions() -> Vec<RegionSpec> {
        vec![
            region(800.0, 550.0),
            region(1300.0, 200.0),
            region(800.0, 1080.0),
            region(300.0, 200.0),
        ]
    }

    /// Road-dominant chain over [`driving_regions`].
    pub fn driving_chain() -> Vec<Vec<f64>> {
        vec![
            vec![0.70, 0.10, 0.10, 0.10],
            vec![0.45, 0.40, 0.05, 0.10],
            vec![0.45, 0.05, 0.40, 0.10],
            vec![0.45, 0.10, 0.05, 0.40],
        ]
    }

    /// Four-region drive where every state shares one dwell model.
    pub fn four_region_drive(duration_s: f64, dwell: DwellSpec, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            regions: driving_regions(),
            chain: driving_chain(),
            dwell: vec![dwell; 4],
            saccade_gap_ms: default_saccade_gap_ms(),
            duration_s,
            rate_hz: default_rate(),
            seed,
            degrees_per_pixel: default_dpp(),
            fixation_jitter_deg: default_jitter(),
            min_saccade_deg: default_min_saccade(),
            frame: FrameSize::default(),
            initial_state: 0,
            label: default_label(),
        }
    }

    /// Clear-weather analog: fixations of 0.25 s mean, 0.12 s std, none
    /// shorter than 200 ms.
    pub fn clear_weather(duration_s: f64, seed: u64) -> ScenarioSpec {
        let mut s = four_region_drive(duration_s, DwellSpec::new(0.25, 0.12).with_floor(0.2), seed);
        s.label = "clear".into();
        s
    }

    /// Rainy-weather analog: fixations of 0.53 s mean, 0.19 s std.
    pub fn rainy_weather(duration_s: f64, seed: u64) -> ScenarioSpec {
        let mut s = four_region_drive(duration_s, DwellSpec::new(0.53, 0.19).with_floor(0.2), seed);
        s.label = "rainy".into();
        s
    }
}
