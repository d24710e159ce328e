//! Writing analysis results to disk.
//!
//! Every file is rendered in memory first, written into a scratch directory
//! inside the destination and then renamed into place, so an interrupted run
//! never leaves a half-written report next to a complete one.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::pipeline::{ComparisonReport, SessionReport};
use crate::stats::Histogram2D;

pub const REPORT_JSON: &str = "report.json";
pub const TRANSITION_CSV: &str = "transition_matrix.csv";
pub const FIXATIONS_CSV: &str = "fixation_durations.csv";
pub const SEGMENTS_CSV: &str = "segment_means.csv";
pub const HISTOGRAM_CSV: &str = "angle_histogram.csv";
pub const META_CSV: &str = "meta_clusters.csv";

type Rendered = Vec<(PathBuf, Vec<u8>)>;

fn to_io(e: impl std::error::Error + Send + Sync + 'static) -> io::Error {
    io::Error::other(e)
}

fn json_bytes<S: Serialize>(value: &S) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(to_io)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> io::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(to_io)?;
    for row in rows {
        wtr.write_record(row).map_err(to_io)?;
    }
    wtr.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format histogram: one row per cell.
pub fn histogram_csv(h: &Histogram2D<f64>) -> io::Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (i, col) in h.mass.iter().enumerate() {
        for (j, m) in col.iter().enumerate() {
            rows.push(vec![
                h.az_edges[i].to_string(),
                h.az_edges[i + 1].to_string(),
                h.el_edges[j].to_string(),
                h.el_edges[j + 1].to_string(),
                m.to_string(),
            ]);
        }
    }
    csv_bytes(&["az_lo", "az_hi", "el_lo", "el_hi", "mass"], rows)
}

fn render_session(r: &SessionReport, prefix: &Path) -> io::Result<Rendered> {
    let fixations = r.fixations.iter().map(|f| {
        vec![
            f.start_ns.to_string(),
            f.end_ns.to_string(),
            f.duration_s.to_string(),
            f.centroid_px.x.to_string(),
            f.centroid_px.y.to_string(),
            f.mean_azimuth.to_string(),
            f.mean_elevation.to_string(),
            opt(f.state),
            f.outlier.to_string(),
        ]
    });
    let segments = r.segment_means.iter().map(|s| {
        vec![
            s.segment_index.to_string(),
            s.segment_start_ns.to_string(),
            s.mean_duration.to_string(),
            s.fixation_count.to_string(),
        ]
    });
    let metas = r.meta_clusters.iter().map(|m| {
        vec![
            m.id.to_string(),
            m.label.clone(),
            m.center.x.to_string(),
            m.center.y.to_string(),
            m.member_count.to_string(),
        ]
    });
    Ok(vec![
        (prefix.join(REPORT_JSON), json_bytes(r)?),
        (
            prefix.join(TRANSITION_CSV),
            r.transitions.matrix.to_csv(&r.transitions.labels).into_bytes(),
        ),
        (
            prefix.join(FIXATIONS_CSV),
            csv_bytes(
                &[
                    "start_ns",
                    "end_ns",
                    "duration_s",
                    "centroid_x_px",
                    "centroid_y_px",
                    "mean_azimuth_deg",
                    "mean_elevation_deg",
                    "state",
                    "outlier",
                ],
                fixations,
            )?,
        ),
        (
            prefix.join(SEGMENTS_CSV),
            csv_bytes(
                &["segment_index", "segment_start_ns", "mean_duration_s", "fixation_count"],
                segments,
            )?,
        ),
        (prefix.join(HISTOGRAM_CSV), histogram_csv(&r.angle_histogram)?),
        (
            prefix.join(META_CSV),
            csv_bytes(&["id", "label", "center_x_px", "center_y_px", "member_count"], metas)?,
        ),
    ])
}

fn commit(files: Rendered, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let scratch = tempfile::Builder::new().prefix(".gazeshift-").tempdir_in(out_dir)?;
    for (rel, bytes) in &files {
        let tmp = scratch.path().join(rel);
        if let Some(parent) = tmp.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&tmp, bytes)?;
    }
    let mut written = Vec::with_capacity(files.len());
    for (rel, _) in &files {
        let dest = out_dir.join(rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(scratch.path().join(rel), &dest)?;
        written.push(dest);
    }
    Ok(written)
}

/// Writes the single-session report files into `out_dir`, returning their paths.
pub fn emit_report(report: &SessionReport, out_dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    commit(render_session(report, Path::new(""))?, out_dir.as_ref())
}

/// Writes a comparison: top-level `report.json` and shared-grid histogram,
/// plus each session's full report under `session_a/` and `session_b/`.
pub fn emit_comparison(report: &ComparisonReport, out_dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let mut files = vec![(PathBuf::from(REPORT_JSON), json_bytes(report)?)];
    let mut shared = Vec::new();
    for (tag, h) in [("a", &report.histogram_a), ("b", &report.histogram_b)] {
        for (i, col) in h.mass.iter().enumerate() {
            for (j, m) in col.iter().enumerate() {
                shared.push(vec![
                    tag.to_string(),
                    h.az_edges[i].to_string(),
                    h.az_edges[i + 1].to_string(),
                    h.el_edges[j].to_string(),
                    h.el_edges[j + 1].to_string(),
                    m.to_string(),
                ]);
            }
        }
    }
    files.push((
        PathBuf::from(HISTOGRAM_CSV),
        csv_bytes(&["session", "az_lo", "az_hi", "el_lo", "el_hi", "mass"], shared)?,
    ));
    files.extend(render_session(&report.a, Path::new("session_a"))?);
    files.extend(render_session(&report.b, Path::new("session_b"))?);
    commit(files, out_dir.as_ref())
}
