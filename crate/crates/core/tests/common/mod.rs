//! Test-only reference implementations shared by several test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use gazeshift::clustering::Point2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Quadratic reference: core flags from full neighbour counts, clusters as
/// connected components of the core graph ranked by their lowest core
/// index, border points to the lowest-ranked adjacent component.
pub fn reference_dbscan(points: &[Point2<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let eps2 = eps * eps;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| points[i].dist_sq(&points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = adj.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if core[j] && comp[j] == usize::MAX {
                    comp[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }

    (0..n)
        .map(|i| {
            if core[i] {
                Some(comp[i])
            } else {
                adj[i].iter().filter(|&&j| core[j]).map(|&j| comp[j]).min()
            }
        })
        .collect()
}

/// Partition as a set of member sets, so label values do not matter.
pub fn partition(labels: &[Option<usize>]) -> BTreeSet<BTreeSet<usize>> {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups = vec![BTreeSet::new(); k];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            groups[*c].insert(i);
        }
    }
    groups.into_iter().collect()
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Point2<f64>>, f64, usize) {
    let n = rng.random_range(0..=500);
    let blobs = rng.random_range(1..=6);
    let centers: Vec<(f64, f64)> = (0..blobs)
        .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
        .collect();
    let spread = Normal::new(0.0, rng.random_range(0.5..6.0)).unwrap();
    // Integer coordinates half the time, to hit distances exactly equal to eps.
    let snap = rng.random_bool(0.5);
    let points = (0..n)
        .map(|_| {
            let (x, y) = if rng.random_bool(0.15) {
                (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))
            } else {
                let c = centers[rng.random_range(0..blobs)];
                (c.0 + spread.sample(rng), c.1 + spread.sample(rng))
            };
            if snap {
                Point2::new(x.round(), y.round())
            } else {
                Point2::new(x, y)
            }
        })
        .collect();
    let eps = if snap {
        f64::from(rng.random_range(1..=5))
    } else {
        rng.random_range(0.5..6.0)
    };
    (points, eps, rng.random_range(1..=12))
}
