//! Density-based clustering of gaze points.
//!
//! The session is cut into fixed-duration chunks, DBSCAN runs inside each
//! chunk on scene-camera pixel coordinates, and the resulting cluster
//! centroids are pooled and clustered a second time into meta-clusters:
//! regions the driver keeps coming back to over the whole drive.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SessionRecording;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusteringError {
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(String),
    #[error("input contains a non-finite point at index {0}")]
    NonFinitePoint(usize),
    #[error("empty session")]
    EmptySession,
    #[error("chunk length must be positive, got {0} s")]
    InvalidChunkLength(f64),
    #[error("no chunk clusters found")]
    NoChunkClusters,
    #[error("no meta-clusters under given parameters")]
    NoMetaClusters,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Self) -> T {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Arithmetic mean of a non-empty set of points.
    pub fn mean<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Point2<T>>,
    {
        let mut n = 0usize;
        let (mut sx, mut sy) = (T::zero(), T::zero());
        for p in points {
            sx = sx + p.x;
            sy = sy + p.y;
            n += 1;
        }
        (n > 0).then(|| {
            let n = T::from_usize_lossy(n);
            Point2::new(sx / n, sy / n)
        })
    }

    /// Orders by x, then y.
    fn lexical_cmp(&self, other: &Self) -> Ordering {
        self.x
            .partial_cmp(&other.x)
            .unwrap_or(Ordering::Equal)
            .then(self.y.partial_cmp(&other.y).unwrap_or(Ordering::Equal))
    }
}

/// DBSCAN neighbourhood radius and density threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams<T> {
    eps: T,
    min_pts: usize,
}

impl<T: Scalar> ClusterParams<T> {
    pub fn new(eps: T, min_pts: usize) -> Result<Self, ClusteringError> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(ClusteringError::InvalidParams(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        if min_pts == 0 {
            return Err(ClusteringError::InvalidParams("min_pts must be at least 1".into()));
        }
        Ok(ClusterParams { eps, min_pts })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn min_pts(&self) -> usize {
        self.min_pts
    }
}

/// Point labelling produced by [`dbscan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dbscan {
    labels: Vec<Option<usize>>,
    core: Vec<bool>,
    n_clusters: usize,
}

impl Dbscan {
    /// Cluster id per input point, `None` for noise.
    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn is_core(&self, i: usize) -> bool {
        self.core[i]
    }

    pub fn noise(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_none).collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.n_clusters
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Member indices of every cluster, in cluster-id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }

    /// Materialises clusters with centroids for the given points.
    pub fn clusters<T: Scalar>(&self, points: &[Point2<T>], chunk_index: usize) -> Vec<Cluster<T>> {
        self.members()
            .into_iter()
            .map(|member_indices| {
                let centroid =
                    Point2::mean(member_indices.iter().map(|&i| &points[i])).expect("clusters are non-empty");
                Cluster {
                    member_indices,
                    centroid,
                    chunk_index,
                }
            })
            .collect()
    }
}

/// Uniform grid with cell side `eps`, so every neighbour of a point lies in
/// the 3x3 block of cells around it.
struct GridIndex<'a, T> {
    points: &'a [Point2<T>],
    eps: T,
    eps_sq: T,
    origin: Point2<T>,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a, T: Scalar> GridIndex<'a, T> {
    /// Returns `None` when cell coordinates would not fit in an `i64`.
    fn build(points: &'a [Point2<T>], eps: T) -> Option<Self> {
        let mut origin = *points.first()?;
        for p in points {
            origin.x = origin.x.min(p.x);
            origin.y = origin.y.min(p.y);
        }
        let mut index = GridIndex {
            points,
            eps,
            eps_sq: eps * eps,
            origin,
            cells: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let key = index.cell(p)?;
            index.cells.entry(key).or_default().push(i);
        }
        Some(index)
    }

    fn cell(&self, p: &Point2<T>) -> Option<(i64, i64)> {
        let limit = T::lit(1e15);
        let cx = ((p.x - self.origin.x) / self.eps).floor();
        let cy = ((p.y - self.origin.y) / self.eps).floor();
        if cx > limit || cy > limit {
            return None;
        }
        Some((cx.to_i64()?, cy.to_i64()?))
    }

    fn neighbours(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &self.points[i];
        let (cx, cy) = self.cell(p).expect("indexed point has a cell");
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| self.points[j].dist_sq(p) <= self.eps_sq),
                    );
                }
            }
        }
    }
}

enum Neighbours<'a, T> {
    Grid(GridIndex<'a, T>),
    Scan { points: &'a [Point2<T>], eps_sq: T },
}

impl<T: Scalar> Neighbours<'_, T> {
    fn query(&self, i: usize, out: &mut Vec<usize>) {
        match self {
            Neighbours::Grid(g) => g.neighbours(i, out),
            Neighbours::Scan { points, eps_sq } => {
                out.clear();
                let p = &points[i];
                out.extend((0..points.len()).filter(|&j| points[j].dist_sq(p) <= *eps_sq));
            }
        }
    }
}

/// DBSCAN over 2-D points with Euclidean distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within distance `eps`. Points are scanned in input order and a new
/// cluster is opened at each unassigned core point; a border point reachable
/// from several clusters belongs to the first one that reaches it.
pub fn dbscan<T: Scalar>(points: &[Point2<T>], params: &ClusterParams<T>) -> Result<Dbscan, ClusteringError> {
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(ClusteringError::NonFinitePoint(i));
    }
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut core = vec![false; n];
    let mut visited = vec![false; n];
    let mut n_clusters = 0usize;

    let index = match GridIndex::build(points, params.eps) {
        Some(g) => Neighbours::Grid(g),
        None => Neighbours::Scan {
            points,
            eps_sq: params.eps * params.eps,
        },
    };

    let mut nb = Vec::new();
    let mut queue = VecDeque::new();
    for i in 0..n {
        if visited[i] || labels[i].is_some() {
            continue;
        }
        visited[i] = true;
        index.query(i, &mut nb);
        if nb.len() < params.min_pts {
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        labels[i] = Some(c);
        core[i] = true;
        for &k in &nb {
            if labels[k].is_none() {
                labels[k] = Some(c);
                queue.push_back(k);
            }
        }
        while let Some(j) = queue.pop_front() {
            if visited[j] {
                continue;
            }
            visited[j] = true;
            index.query(j, &mut nb);
            if nb.len() < params.min_pts {
                continue;
            }
            core[j] = true;
            for &k in &nb {
                if labels[k].is_none() {
                    labels[k] = Some(c);
                    queue.push_back(k);
                }
            }
        }
    }

    Ok(Dbscan {
        labels,
        core,
        n_clusters,
    })
}

/// A dense gaze region inside one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster<T> {
    pub member_indices: Vec<usize>,
    pub centroid: Point2<T>,
    pub chunk_index: usize,
}

/// A fixed-duration window of the gaze stream, `[start_ns, end_ns)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk<T> {
    pub index: usize,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Range of session sample indices covered by the chunk.
    pub samples: std::ops::Range<usize>,
    pub points: Vec<Point2<T>>,
}

/// Cuts a session into consecutive windows of `chunk_seconds`, aligned to
/// the first timestamp.
///
/// The session is taken to last from its first sample to one nominal sample
/// period past its last. A trailing partial window is kept only when it
/// covers at least half of `chunk_seconds`; samples past the last kept
/// window are not assigned to any chunk.
pub fn split_chunks(session: &SessionRecording, chunk_seconds: f64) -> Result<Vec<Chunk<f64>>, ClusteringError> {
    if !(chunk_seconds > 0.0 && chunk_seconds.is_finite()) {
        return Err(ClusteringError::InvalidChunkLength(chunk_seconds));
    }
    let samples = session.samples();
    let Some(first) = samples.first() else {
        return Err(ClusteringError::EmptySession);
    };
    let t0 = first.timestamp_ns;
    let chunk_ns = ((chunk_seconds * 1e9).round() as u64).max(1);
    let duration_ns = session.span_ns() + session.sample_period_ns();
    let full = duration_ns / chunk_ns;
    let remainder = duration_ns % chunk_ns;
    let n_chunks = full + u64::from(remainder * 2 >= chunk_ns);

    let mut chunks: Vec<Chunk<f64>> = (0..n_chunks)
        .map(|k| Chunk {
            index: k as usize,
            start_ns: t0 + k * chunk_ns,
            end_ns: t0 + (k + 1) * chunk_ns,
            samples: 0..0,
            points: Vec::new(),
        })
        .collect();
    let mut start = 0usize;
    for chunk in &mut chunks {
        let end = start
            + samples[start..]
                .iter()
                .take_while(|s| s.timestamp_ns < chunk.end_ns)
                .count();
        chunk.samples = start..end;
        chunk.points = samples[start..end].iter().map(|s| Point2::new(s.x, s.y)).collect();
        start = end;
    }
    Ok(chunks)
}

/// DBSCAN result for one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkClustering<T> {
    pub chunk_index: usize,
    pub start_ns: u64,
    pub end_ns: u64,
    pub clusters: Vec<Cluster<T>>,
    pub noise_count: usize,
}

/// A chunk-level centroid tagged with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedCentroid<T> {
    pub centroid: Point2<T>,
    pub chunk_index: usize,
    /// Number of gaze points in the originating cluster.
    pub weight: usize,
}

/// Clusters every chunk independently (in parallel).
pub fn cluster_chunks<T: Scalar>(
    chunks: &[Chunk<T>],
    params: &ClusterParams<T>,
) -> Result<Vec<ChunkClustering<T>>, ClusteringError> {
    chunks
        .par_iter()
        .map(|chunk| {
            let result = dbscan(&chunk.points, params)?;
            Ok(ChunkClustering {
                chunk_index: chunk.index,
                start_ns: chunk.start_ns,
                end_ns: chunk.end_ns,
                noise_count: result.noise_count(),
                clusters: result.clusters(&chunk.points, chunk.index),
            })
        })
        .collect()
}

/// Runs DBSCAN per chunk and returns every cluster centroid tagged by chunk.
/// Noise points contribute nothing.
pub fn chunk_cluster_centroids<T: Scalar>(
    chunks: &[Chunk<T>],
    params: &ClusterParams<T>,
) -> Result<Vec<TaggedCentroid<T>>, ClusteringError> {
    Ok(pooled_centroids(&cluster_chunks(chunks, params)?))
}

pub fn pooled_centroids<T: Scalar>(clusterings: &[ChunkClustering<T>]) -> Vec<TaggedCentroid<T>> {
    clusterings
        .iter()
        .flat_map(|cc| {
            cc.clusters.iter().map(|c| TaggedCentroid {
                centroid: c.centroid,
                chunk_index: c.chunk_index,
                weight: c.member_indices.len(),
            })
        })
        .collect()
}

/// A stable attention region aggregated over the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCluster<T> {
    /// 0 is the meta-cluster with the most member centroids.
    pub id: usize,
    /// Unweighted mean of the member centroids.
    pub center: Point2<T>,
    pub members: Vec<TaggedCentroid<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_label: Option<String>,
}

impl<T> MetaCluster<T> {
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// User label if one was attached, otherwise `M<id>`.
    pub fn display_label(&self) -> String {
        self.user_label.clone().unwrap_or_else(|| format!("M{}", self.id))
    }
}

/// Second-stage DBSCAN over pooled chunk centroids.
///
/// Centroids labelled noise are discarded. Ids are assigned by descending
/// member count, ties broken by ascending center x then y.
pub fn build_meta_clusters<T: Scalar>(
    centroids: &[TaggedCentroid<T>],
    params: &ClusterParams<T>,
) -> Result<Vec<MetaCluster<T>>, ClusteringError> {
    if centroids.is_empty() {
        return Err(ClusteringError::NoChunkClusters);
    }
    let points: Vec<Point2<T>> = centroids.iter().map(|c| c.centroid).collect();
    let result = dbscan(&points, params)?;
    if result.cluster_count() == 0 {
        return Err(ClusteringError::NoMetaClusters);
    }
    let mut metas: Vec<MetaCluster<T>> = result
        .members()
        .into_iter()
        .map(|idx| {
            let members: Vec<TaggedCentroid<T>> = idx.iter().map(|&i| centroids[i]).collect();
            MetaCluster {
                id: 0,
                center: Point2::mean(members.iter().map(|m| &m.centroid)).expect("non-empty"),
                members,
                user_label: None,
            }
        })
        .collect();
    metas.sort_by(|a, b| {
        b.member_count()
            .cmp(&a.member_count())
            .then_with(|| a.center.lexical_cmp(&b.center))
    });
    for (id, m) in metas.iter_mut().enumerate() {
        m.id = id;
    }
    Ok(metas)
}

/// Default chunk-level radius: 5% of the frame diagonal.
pub const DEFAULT_CHUNK_EPS_FRACTION: f64 = 0.05;
/// Default chunk-level density: about a third of a second at 30 Hz.
pub const DEFAULT_CHUNK_MIN_PTS: usize = 10;
/// Default meta-level radius: 7% of the frame diagonal.
pub const DEFAULT_META_EPS_FRACTION: f64 = 0.07;
/// Default meta-level density, in chunks.
pub const DEFAULT_META_MIN_PTS: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{GazeSample, SessionMeta};

    fn pts(raw: &[(f64, f64)]) -> Vec<Point2<f64>> {
        raw.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn params_validation() {
        assert!(ClusterParams::new(0.0_f64, 3).is_err());
        assert!(ClusterParams::new(f64::NAN, 3).is_err());
        assert!(ClusterParams::new(1.0_f64, 0).is_err());
        assert!(ClusterParams::new(1.0_f32, 1).is_ok());
    }

    #[test]
    fn empty_input_has_no_clusters() {
        let r = dbscan::<f64>(&[], &ClusterParams::new(1.0, 2).unwrap()).unwrap();
        assert_eq!(r.cluster_count(), 0);
        assert_eq!(r.noise_count(), 0);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let p = pts(&[(3.0, 4.0); 5]);
        let r = dbscan(&p, &ClusterParams::new(0.5, 5).unwrap()).unwrap();
        assert_eq!(r.cluster_count(), 1);
        assert_eq!(r.labels(), &[Some(0); 5]);
    }

    #[test]
    fn two_triangles() {
        let p = pts(&[(0., 0.), (0., 1.), (1., 0.), (10., 10.), (10., 11.), (11., 10.)]);
        let r = dbscan(&p, &ClusterParams::new(2.0, 3).unwrap()).unwrap();
        let clusters = r.clusters(&p, 0);
        assert_eq!(clusters.len(), 2);
        approx::assert_relative_eq!(clusters[0].centroid.x, 1.0 / 3.0, epsilon = 1e-12);
        approx::assert_relative_eq!(clusters[0].centroid.y, 1.0 / 3.0, epsilon = 1e-12);
        approx::assert_relative_eq!(clusters[1].centroid.x, 31.0 / 3.0, epsilon = 1e-12);
        approx::assert_relative_eq!(clusters[1].centroid.y, 31.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let p: Vec<Point2<f32>> = [(0., 0.), (0., 1.), (1., 0.), (9., 9.)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let r = dbscan(&p, &ClusterParams::new(1.5_f32, 3).unwrap()).unwrap();
        assert_eq!(r.labels(), &[Some(0), Some(0), Some(0), None]);
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // Point 3 sits within eps of the edge cores of both clusters but is not core itself.
        let p = pts(&[(0., 0.), (0.5, 0.), (1., 0.), (2., 0.), (3., 0.), (3.5, 0.), (4., 0.)]);
        let r = dbscan(&p, &ClusterParams::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(r.cluster_count(), 2);
        assert!(r.is_core(2) && r.is_core(4));
        assert!(!r.is_core(3));
        assert_eq!(r.labels()[3], Some(0));
    }

    #[test]
    fn rejects_non_finite() {
        let p = pts(&[(0., 0.), (f64::NAN, 1.)]);
        assert_eq!(
            dbscan(&p, &ClusterParams::new(1.0, 1).unwrap()),
            Err(ClusteringError::NonFinitePoint(1))
        );
    }

    fn session_of(seconds: f64, rate: f64) -> SessionRecording {
        let n = (seconds * rate).round() as u64;
        let samples = (0..n)
            .map(|k| GazeSample::new((k as f64 * 1e9 / rate).round() as u64, 10.0, 10.0, 0.0, 0.0))
            .collect();
        SessionRecording::new(samples, SessionMeta::default()).unwrap()
    }

    #[test]
    fn sixty_seconds_make_six_full_chunks() {
        let chunks = split_chunks(&session_of(60.0, 30.0), 10.0).unwrap();
        assert_eq!(chunks.len(), 6);
        assert!(chunks.iter().all(|c| c.points.len() == 300));
    }

    #[test]
    fn short_session_keeps_half_chunk() {
        let chunks = split_chunks(&session_of(5.0, 30.0), 10.0).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].points.len(), 150);
        let chunks = split_chunks(&session_of(4.0, 30.0), 10.0).unwrap();
        assert!(chunks.is_empty());
    }

    #[test]
    fn ninety_five_seconds_keeps_remainder() {
        let chunks = split_chunks(&session_of(95.0, 30.0), 10.0).unwrap();
        assert_eq!(chunks.len(), 10);
        assert_eq!(chunks[9].points.len(), 150);
        assert_eq!(chunks[9].start_ns, 90_000_000_000);
    }

    #[test]
    fn split_errors() {
        let empty = SessionRecording::new(vec![], SessionMeta::default()).unwrap();
        assert_eq!(split_chunks(&empty, 10.0).unwrap_err(), ClusteringError::EmptySession);
        assert!(split_chunks(&session_of(5.0, 30.0), 0.0).is_err());
    }

    #[test]
    fn all_noise_chunk_contributes_nothing() {
        let chunk = Chunk {
            index: 0,
            start_ns: 0,
            end_ns: 1,
            samples: 0..3,
            points: pts(&[(0., 0.), (100., 0.), (200., 0.)]),
        };
        let c = chunk_cluster_centroids(&[chunk], &ClusterParams::new(10.0, 2).unwrap()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn repeated_point_chunk_gives_that_centroid() {
        let chunk = Chunk {
            index: 4,
            start_ns: 0,
            end_ns: 1,
            samples: 0..12,
            points: pts(&[(812.5, 407.0); 12]),
        };
        let c = chunk_cluster_centroids(&[chunk], &ClusterParams::new(10.0, 10).unwrap()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].centroid, Point2::new(812.5, 407.0));
        assert_eq!(c[0].chunk_index, 4);
        assert_eq!(c[0].weight, 12);
    }

    fn tagged(raw: &[(f64, f64)]) -> Vec<TaggedCentroid<f64>> {
        raw.iter()
            .enumerate()
            .map(|(i, &(x, y))| TaggedCentroid {
                centroid: Point2::new(x, y),
                chunk_index: i,
                weight: 1,
            })
            .collect()
    }

    #[test]
    fn identical_centroids_one_meta() {
        let metas = build_meta_clusters(&tagged(&[(5.0, 6.0); 4]), &ClusterParams::new(1.0, 3).unwrap()).unwrap();
        assert_eq!(metas.len(), 1);
        assert_eq!(metas[0].center, Point2::new(5.0, 6.0));
        assert_eq!(metas[0].member_count(), 4);
    }

    #[test]
    fn meta_errors() {
        let params = ClusterParams::new(1.0, 3).unwrap();
        assert_eq!(
            build_meta_clusters::<f64>(&[], &params),
            Err(ClusteringError::NoChunkClusters)
        );
        assert_eq!(
            build_meta_clusters(&tagged(&[(0.0, 0.0), (0.1, 0.0)]), &params),
            Err(ClusteringError::NoMetaClusters)
        );
    }

    #[test]
    fn meta_ids_by_size_then_position() {
        let raw = [
            (100.0, 0.0),
            (100.0, 0.1),
            (100.1, 0.0),
            (0.0, 0.0),
            (0.0, 0.1),
            (0.1, 0.0),
            (50.0, 50.0),
            (50.0, 50.1),
            (50.1, 50.0),
            (50.1, 50.1),
        ];
        let metas = build_meta_clusters(&tagged(&raw), &ClusterParams::new(1.0, 3).unwrap()).unwrap();
        assert_eq!(metas.len(), 3);
        assert_eq!(metas[0].member_count(), 4);
        assert!(metas[1].center.x < 1.0);
        assert!(metas[2].center.x > 99.0);
        assert_eq!(metas.iter().map(|m| m.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(metas[1].display_label(), "M1");
    }
}
