use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gazeshift::config::AngleSource;
use gazeshift::synth::ScenarioSpec;
use gazeshift::{PipelineConfig, PipelineError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gazeshift",
    version,
    about = "Gaze-region clustering, transition and fixation statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one session and write its report files.
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze two sessions with the same settings and compare them.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        opts: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic session from a scenario file.
    Synth {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the planted truth as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

/// Config file plus per-field overrides; flags win over the file.
#[derive(Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    chunk_seconds: Option<f64>,
    #[arg(long)]
    segment_seconds: Option<f64>,
    #[arg(long)]
    chunk_eps_px: Option<f64>,
    #[arg(long)]
    chunk_min_pts: Option<usize>,
    #[arg(long)]
    meta_eps_px: Option<f64>,
    #[arg(long)]
    meta_min_pts: Option<usize>,
    #[arg(long)]
    min_fixation_ms: Option<f64>,
    #[arg(long)]
    max_dispersion_deg: Option<f64>,
    #[arg(long)]
    bin_width_deg: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    max_distance_px: Option<f64>,
    #[arg(long, value_parser = parse_angle_source)]
    angle_source: Option<AngleSource>,
    #[arg(long)]
    frame_width: Option<f64>,
    #[arg(long)]
    frame_height: Option<f64>,
    #[arg(long)]
    nominal_rate: Option<f64>,
    #[arg(long)]
    label: Option<String>,
    /// Name a meta-cluster, e.g. `--meta-label 0=road`. Repeatable.
    #[arg(long = "meta-label", value_parser = parse_meta_label)]
    meta_labels: Vec<(usize, String)>,
    #[arg(long)]
    timestamp_column: Option<String>,
    #[arg(long)]
    x_column: Option<String>,
    #[arg(long)]
    y_column: Option<String>,
    #[arg(long)]
    azimuth_column: Option<String>,
    #[arg(long)]
    elevation_column: Option<String>,
    #[arg(long)]
    confidence_column: Option<String>,
}

fn parse_angle_source(s: &str) -> Result<AngleSource, String> {
    match s {
        "fixations" => Ok(AngleSource::Fixations),
        "samples" => Ok(AngleSource::Samples),
        _ => Err(format!("expected `fixations` or `samples`, got `{s}`")),
    }
}

fn parse_meta_label(s: &str) -> Result<(usize, String), String> {
    let (id, name) = s.split_once('=').ok_or("expected ID=NAME")?;
    let id = id
        .trim()
        .parse()
        .map_err(|e| format!("bad meta-cluster id `{id}`: {e}"))?;
    Ok((id, name.to_string()))
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $( if let Some(v) = $args.$field.clone() { $cfg.$field = v; } )*
    };
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => PipelineConfig::default(),
        };
        apply!(
            cfg,
            self,
            chunk_seconds,
            segment_seconds,
            chunk_min_pts,
            meta_min_pts,
            min_fixation_ms,
            max_dispersion_deg,
            bin_width_deg,
            min_confidence,
            angle_source,
            frame_width,
            frame_height,
            nominal_rate
        );
        if self.chunk_eps_px.is_some() {
            cfg.chunk_eps_px = self.chunk_eps_px;
        }
        if self.meta_eps_px.is_some() {
            cfg.meta_eps_px = self.meta_eps_px;
        }
        if self.max_distance_px.is_some() {
            cfg.max_distance_px = self.max_distance_px;
        }
        if self.label.is_some() {
            cfg.label = self.label.clone();
        }
        cfg.meta_labels.extend(self.meta_labels.iter().cloned());
        let schema = &mut cfg.schema;
        for (flag, slot) in [
            (&self.timestamp_column, &mut schema.timestamp),
            (&self.x_column, &mut schema.x),
            (&self.y_column, &mut schema.y),
            (&self.azimuth_column, &mut schema.azimuth),
            (&self.elevation_column, &mut schema.elevation),
            (&self.confidence_column, &mut schema.confidence),
        ] {
            if let Some(name) = flag {
                *slot = name.clone();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(msg) => Failure::Usage(msg),
            other => Failure::Data(other.into()),
        }
    }
}

fn write_failure(e: std::io::Error, out: &Path) -> Failure {
    Failure::Internal(anyhow::Error::new(e).context(format!("writing output to {}", out.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { input, opts, out } => {
            let cfg = opts.build()?;
            let report = gazeshift::analyze_session(&input, &cfg)?;
            gazeshift::emit_report(&report, &out).map_err(|e| write_failure(e, &out))?;
            eprintln!(
                "{}: {} meta-clusters, {} fixations, report in {}",
                report.label,
                report.meta_clusters.len(),
                report.fixation_stats.detected,
                out.display()
            );
        }
        Command::Compare { a, b, opts, out } => {
            let cfg = opts.build()?;
            // Labels default to each file's stem; a shared --label would make them collide.
            let report = gazeshift::compare_paths(&a, &b, &cfg)?;
            gazeshift::emit_comparison(&report, &out).map_err(|e| write_failure(e, &out))?;
            eprintln!(
                "durations: D = {:.4}, p = {:.3e}; angle JSD = {:.4}; report in {}",
                report.ks_durations.statistic,
                report.ks_durations.p_value,
                report.jsd,
                out.display()
            );
        }
        Command::Synth {
            scenario,
            out,
            seed,
            truth,
        } => {
            let text = fs::read_to_string(&scenario)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", scenario.display())))?;
            let mut spec: ScenarioSpec = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("invalid scenario {}: {e}", scenario.display())))?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let (session, planted) =
                gazeshift::generate_synthetic_session(&spec).map_err(|e| Failure::Data(e.into()))?;
            let file = fs::File::create(&out).map_err(|e| write_failure(e, &out))?;
            gazeshift::write_gaze_csv(&session, std::io::BufWriter::new(file))
                .context("writing session CSV")
                .map_err(Failure::Internal)?;
            if let Some(path) = truth {
                let json = serde_json::to_string_pretty(&planted)
                    .context("serializing planted truth")
                    .map_err(Failure::Internal)?;
                fs::write(&path, json + "\n").map_err(|e| write_failure(e, &path))?;
            }
            eprintln!(
                "{} samples, {} planted fixations written to {}",
                session.len(),
                planted.fixations.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Data(e) | Failure::Internal(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
