//! Meta-cluster state sequences and first-order transition matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{MetaCluster, Point2};
use crate::fixation::FixationEvent;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("no meta-clusters to assign fixations to")]
    NoMetaClusters,
    #[error("insufficient transitions: sequence has {0} states, need at least 2")]
    InsufficientTransitions(usize),
    #[error("state {state} out of range for {k} states")]
    StateOutOfRange { state: usize, k: usize },
    #[error("invalid permutation of {0} states")]
    InvalidPermutation(usize),
}

/// Time-ordered meta-cluster labels, one per assigned fixation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    pub labels: Vec<usize>,
    /// Fixation start times, parallel to `labels`.
    pub timestamps: Vec<u64>,
    /// Positions `i` where the pair `(i - 1, i)` must not be counted because
    /// fixations between them were dropped.
    pub breaks: Vec<usize>,
    /// Fixations farther than the assignment cutoff from every center.
    pub dropped: usize,
}

impl StateSequence {
    /// A sequence without breaks; timestamps are the positions.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        StateSequence {
            timestamps: (0..labels.len() as u64).collect(),
            labels,
            breaks: Vec::new(),
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Consecutive label pairs that count as transitions.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.labels.len())
            .filter(|i| self.breaks.binary_search(i).is_err())
            .map(|i| (self.labels[i - 1], self.labels[i]))
    }
}

/// Nearest meta-cluster center; equal distances go to the lowest id.
pub fn nearest_meta<T: Scalar>(p: &Point2<T>, metas: &[MetaCluster<T>]) -> Option<(usize, T)> {
    metas
        .iter()
        .map(|m| (m.id, m.center.dist_sq(p)))
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .map(|(id, d2)| (id, d2.sqrt()))
}

/// Maps every fixation centroid to its nearest meta-cluster.
///
/// Fixations farther than `max_distance` pixels from every center are
/// dropped, and the chain is broken at their position so no transition
/// spans them.
pub fn assign_meta_cluster_states(
    fixations: &[FixationEvent],
    metas: &[MetaCluster<f64>],
    max_distance: Option<f64>,
) -> Result<StateSequence, MarkovError> {
    if metas.is_empty() {
        return Err(MarkovError::NoMetaClusters);
    }
    let mut seq = StateSequence {
        labels: Vec::with_capacity(fixations.len()),
        timestamps: Vec::with_capacity(fixations.len()),
        breaks: Vec::new(),
        dropped: 0,
    };
    let mut broken = false;
    for f in fixations {
        let (id, d) = nearest_meta(&f.centroid_px, metas).expect("metas non-empty");
        if max_distance.is_some_and(|max| d > max) {
            seq.dropped += 1;
            broken = true;
            continue;
        }
        if broken && !seq.labels.is_empty() {
            seq.breaks.push(seq.labels.len());
        }
        broken = false;
        seq.labels.push(id);
        seq.timestamps.push(f.start_ns);
    }
    Ok(seq)
}

/// Row-stochastic transition matrix: row = source state, column = destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix<T> {
    pub states: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub probs: Vec<Vec<T>>,
    /// Rows without outgoing transitions; their probabilities are all zero.
    pub zero_rows: Vec<usize>,
}

impl<T: Scalar> TransitionMatrix<T> {
    /// Row-normalises a count table.
    pub fn from_counts(states: Vec<usize>, counts: Vec<Vec<u64>>) -> Self {
        let mut zero_rows = Vec::new();
        let probs = counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    zero_rows.push(i);
                    vec![T::zero(); row.len()]
                } else {
                    let denom = T::lit(total as f64);
                    row.iter().map(|&c| T::lit(c as f64) / denom).collect()
                }
            })
            .collect();
        TransitionMatrix {
            states,
            counts,
            probs,
            zero_rows,
        }
    }

    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Relabels states: old index `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, MarkovError> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(MarkovError::InvalidPermutation(k));
        }
        let mut states = vec![0; k];
        let mut counts = vec![vec![0; k]; k];
        let mut probs = vec![vec![T::zero(); k]; k];
        for i in 0..k {
            states[perm[i]] = self.states[i];
            for j in 0..k {
                counts[perm[i]][perm[j]] = self.counts[i][j];
                probs[perm[i]][perm[j]] = self.probs[i][j];
            }
        }
        let mut zero_rows: Vec<usize> = self.zero_rows.iter().map(|&r| perm[r]).collect();
        zero_rows.sort_unstable();
        Ok(TransitionMatrix {
            states,
            counts,
            probs,
            zero_rows,
        })
    }

    /// CSV table of probabilities, one row per source state.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once("from").chain(labels.iter().map(String::as_str));
        wtr.write_record(header).expect("in-memory write");
        for (label, row) in labels.iter().zip(&self.probs) {
            let cells = std::iter::once(label.clone()).chain(row.iter().map(|p| p.to_string()));
            wtr.write_record(cells).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Counts consecutive state pairs (self-transitions included) and
/// normalises each row.
pub fn build_transition_matrix<T: Scalar>(seq: &StateSequence, k: usize) -> Result<TransitionMatrix<T>, MarkovError> {
    if seq.len() < 2 {
        return Err(MarkovError::InsufficientTransitions(seq.len()));
    }
    if let Some(&state) = seq.labels.iter().find(|&&l| l >= k) {
        return Err(MarkovError::StateOutOfRange { state, k });
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (a, b) in seq.pairs() {
        counts[a][b] += 1;
    }
    Ok(TransitionMatrix::from_counts((0..k).collect(), counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: usize, x: f64, y: f64) -> MetaCluster<f64> {
        MetaCluster {
            id,
            center: Point2::new(x, y),
            members: Vec::new(),
            user_label: None,
        }
    }

    fn fix_at(x: f64, y: f64, start_ns: u64) -> FixationEvent {
        FixationEvent {
            start_ns,
            end_ns: start_ns + 200_000_000,
            duration: 0.2,
            centroid_px: Point2::new(x, y),
            mean_azimuth: 0.0,
            mean_elevation: 0.0,
            first_sample: 0,
            sample_count: 7,
        }
    }

    #[test]
    fn exact_center_and_tie_break() {
        let metas = [meta(0, 0.0, 0.0), meta(1, 10.0, 0.0)];
        let seq = assign_meta_cluster_states(&[fix_at(10.0, 0.0, 0), fix_at(5.0, 3.0, 1)], &metas, None).unwrap();
        assert_eq!(seq.labels, vec![1, 0]);
        // Same tie-break regardless of slice order.
        let rev = [meta(1, 10.0, 0.0), meta(0, 0.0, 0.0)];
        let seq = assign_meta_cluster_states(&[fix_at(5.0, 0.0, 0)], &rev, None).unwrap();
        assert_eq!(seq.labels, vec![0]);
    }

    #[test]
    fn no_metas_is_error() {
        assert_eq!(
            assign_meta_cluster_states(&[fix_at(0.0, 0.0, 0)], &[], None),
            Err(MarkovError::NoMetaClusters)
        );
    }

    #[test]
    fn far_fixations_break_the_chain() {
        let metas = [meta(0, 0.0, 0.0), meta(1, 10.0, 0.0)];
        let f = [
            fix_at(0.0, 0.0, 0),
            fix_at(500.0, 500.0, 1),
            fix_at(10.0, 0.0, 2),
            fix_at(0.0, 1.0, 3),
        ];
        let seq = assign_meta_cluster_states(&f, &metas, Some(20.0)).unwrap();
        assert_eq!(seq.labels, vec![0, 1, 0]);
        assert_eq!(seq.timestamps, vec![0, 2, 3]);
        assert_eq!(seq.breaks, vec![1]);
        assert_eq!(seq.dropped, 1);
        let m = build_transition_matrix::<f64>(&seq, 2).unwrap();
        assert_eq!(m.total_transitions(), 1);
        assert_eq!(m.counts[1][0], 1);
        assert_eq!(m.zero_rows, vec![0]);
    }

    #[test]
    fn single_state_chain() {
        let m = build_transition_matrix::<f64>(&StateSequence::from_labels(vec![0, 0, 0]), 2).unwrap();
        assert_eq!(m.probs[0], vec![1.0, 0.0]);
        assert_eq!(m.zero_rows, vec![1]);
        assert_eq!(m.probs[1], vec![0.0, 0.0]);
    }

    #[test]
    fn alternation() {
        let m = build_transition_matrix::<f32>(&StateSequence::from_labels(vec![0, 1, 0, 1]), 2).unwrap();
        assert_eq!(m.probs, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(m.counts, vec![vec![0, 2], vec![1, 0]]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            build_transition_matrix::<f64>(&StateSequence::from_labels(vec![0]), 1),
            Err(MarkovError::InsufficientTransitions(1))
        );
        assert_eq!(
            build_transition_matrix::<f64>(&StateSequence::from_labels(vec![0, 3]), 2),
            Err(MarkovError::StateOutOfRange { state: 3, k: 2 })
        );
    }

    #[test]
    fn csv_table() {
        let m = build_transition_matrix::<f64>(&StateSequence::from_labels(vec![0, 1, 1]), 2).unwrap();
        let csv = m.to_csv(&["road".into(), "mirror".into()]);
        assert_eq!(csv, "from,road,mirror\nroad,0,1\nmirror,0,1\n");
        let quoted = m.to_csv(&["a,b".into(), "c".into()]);
        assert!(quoted.starts_with("from,\"a,b\",c\n"));
    }

    #[test]
    fn bad_permutation() {
        let m = build_transition_matrix::<f64>(&StateSequence::from_labels(vec![0, 1]), 2).unwrap();
        assert!(m.permuted(&[0, 0]).is_err());
        assert!(m.permuted(&[0]).is_err());
    }
}
