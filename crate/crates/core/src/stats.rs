//! Distribution comparison: two-sample Kolmogorov-Smirnov test, 2-D angle
//! histograms, Jensen-Shannon distance and angle summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{self, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(f64),
    #[error("histograms do not share bin edges")]
    MismatchedEdges,
}

/// Two-sample Kolmogorov-Smirnov test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult<T> {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: T,
    pub p_value: T,
    pub n1: usize,
    pub n2: usize,
}

fn sorted_finite<T: Scalar>(values: &[T]) -> Result<Vec<T>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(v)
}

/// Largest gap between the empirical CDFs of two samples, found by a merged
/// sweep over both sorted samples. Ties advance both samples together.
pub fn ks_statistic<T: Scalar>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (n1, n2) = (T::from_usize_lossy(a.len()), T::from_usize_lossy(b.len()));
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = T::zero();
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        let gap = (T::from_usize_lossy(i) / n1 - T::from_usize_lossy(j) / n2).abs();
        d = d.max(gap);
    }
    Ok(d)
}

const SERIES_TOL: f64 = 1e-10;

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
///
/// Small arguments use the theta-function form of the CDF, which converges
/// quickly there; larger ones use the alternating series
/// `2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`. Both are truncated once a term
/// drops below 1e-10.
pub fn kolmogorov_survival<T: Scalar>(lambda: T) -> T {
    if lambda <= T::zero() {
        return T::one();
    }
    let tol = T::lit(SERIES_TOL);
    let p = if lambda < T::lit(1.18) {
        let pi = T::lit(std::f64::consts::PI);
        let scale = (T::lit(2.0) * pi).sqrt() / lambda;
        let denom = T::lit(8.0) * lambda * lambda;
        let mut cdf = T::zero();
        for k in 1..=100 {
            let m = T::lit((2 * k - 1) as f64);
            let term = scale * (-(m * m * pi * pi) / denom).exp();
            cdf = cdf + term;
            if term < tol {
                break;
            }
        }
        T::one() - cdf
    } else {
        let mut sum = T::zero();
        let mut sign = T::one();
        for k in 1..=100 {
            let kk = T::lit((k * k) as f64);
            let term = (T::lit(-2.0) * kk * lambda * lambda).exp();
            sum = sum + sign * term;
            sign = -sign;
            if term < tol {
                break;
            }
        }
        T::lit(2.0) * sum
    };
    p.max(T::zero()).min(T::one())
}

/// Two-sample K-S test with the asymptotic p-value at effective size
/// `n1 n2 / (n1 + n2)`.
pub fn ks_two_sample<T: Scalar>(a: &[T], b: &[T]) -> Result<KsResult<T>, StatsError> {
    let statistic = ks_statistic(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let ne = T::lit((n1 as f64 * n2 as f64) / (n1 + n2) as f64);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_survival(ne.sqrt() * statistic),
        n1,
        n2,
    })
}

/// Uniform bin layout over (azimuth, elevation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid<T> {
    pub az_lo: T,
    pub el_lo: T,
    pub bin_width: T,
    pub n_az: usize,
    pub n_el: usize,
}

impl<T: Scalar> HistogramGrid<T> {
    /// Smallest grid aligned to multiples of `bin_width` that covers every
    /// sample. A sample on the upper edge falls into the last bin.
    pub fn covering<'a, I>(samples: I, bin_width: T) -> Result<Self, StatsError>
    where
        I: IntoIterator<Item = &'a (T, T)>,
    {
        if !(bin_width > T::zero() && bin_width.is_finite()) {
            return Err(StatsError::InvalidBinWidth(bin_width.as_f64()));
        }
        let mut iter = samples.into_iter();
        let &(az0, el0) = iter.next().ok_or(StatsError::EmptySample)?;
        let (mut az_min, mut az_max, mut el_min, mut el_max) = (az0, az0, el0, el0);
        for &(az, el) in iter {
            if !(az.is_finite() && el.is_finite()) {
                return Err(StatsError::NonFinite);
            }
            az_min = az_min.min(az);
            az_max = az_max.max(az);
            el_min = el_min.min(el);
            el_max = el_max.max(el);
        }
        if !(az0.is_finite() && el0.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let az_lo = (az_min / bin_width).floor() * bin_width;
        let el_lo = (el_min / bin_width).floor() * bin_width;
        let bins = |lo: T, hi: T| ((hi - lo) / bin_width).ceil().to_usize().unwrap_or(0).max(1);
        Ok(HistogramGrid {
            az_lo,
            el_lo,
            bin_width,
            n_az: bins(az_lo, az_max),
            n_el: bins(el_lo, el_max),
        })
    }

    pub fn az_edges(&self) -> Vec<T> {
        (0..=self.n_az)
            .map(|k| self.az_lo + T::from_usize_lossy(k) * self.bin_width)
            .collect()
    }

    pub fn el_edges(&self) -> Vec<T> {
        (0..=self.n_el)
            .map(|k| self.el_lo + T::from_usize_lossy(k) * self.bin_width)
            .collect()
    }

    fn bin(&self, lo: T, v: T, n: usize) -> Option<usize> {
        let k = ((v - lo) / self.bin_width).floor();
        if k < T::zero() {
            return None;
        }
        let k = k.to_usize()?;
        // Values on the closing edge belong to the last bin.
        if k == n {
            let hi = lo + T::from_usize_lossy(n) * self.bin_width;
            return (v <= hi).then_some(n - 1);
        }
        (k < n).then_some(k)
    }

    /// Normalised histogram of the samples on this grid. Samples outside the
    /// grid are ignored.
    pub fn histogram(&self, samples: &[(T, T)]) -> Result<Histogram2D<T>, StatsError> {
        let mut counts = vec![vec![0usize; self.n_el]; self.n_az];
        let mut total = 0usize;
        for &(az, el) in samples {
            if !(az.is_finite() && el.is_finite()) {
                return Err(StatsError::NonFinite);
            }
            if let (Some(i), Some(j)) = (self.bin(self.az_lo, az, self.n_az), self.bin(self.el_lo, el, self.n_el)) {
                counts[i][j] += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(StatsError::EmptySample);
        }
        let denom = T::from_usize_lossy(total);
        Ok(Histogram2D {
            az_edges: self.az_edges(),
            el_edges: self.el_edges(),
            mass: counts
                .iter()
                .map(|row| row.iter().map(|&c| T::from_usize_lossy(c) / denom).collect())
                .collect(),
            count: total,
        })
    }
}

/// Normalised 2-D histogram; `mass[i][j]` is the azimuth bin `i`,
/// elevation bin `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D<T> {
    pub az_edges: Vec<T>,
    pub el_edges: Vec<T>,
    pub mass: Vec<Vec<T>>,
    /// Number of samples binned.
    pub count: usize,
}

impl<T: Scalar> Histogram2D<T> {
    pub fn total_mass(&self) -> T {
        self.mass.iter().flatten().copied().sum()
    }

    pub fn flat_mass(&self) -> Vec<T> {
        self.mass.iter().flatten().copied().collect()
    }

    pub fn same_edges(&self, other: &Self) -> bool {
        self.az_edges == other.az_edges && self.el_edges == other.el_edges
    }
}

/// Histogram over the samples' own range.
pub fn histogram_2d<T: Scalar>(samples: &[(T, T)], bin_width: T) -> Result<Histogram2D<T>, StatsError> {
    HistogramGrid::covering(samples, bin_width)?.histogram(samples)
}

/// Histograms of two samples on a common grid covering both.
pub fn shared_histograms<T: Scalar>(
    a: &[(T, T)],
    b: &[(T, T)],
    bin_width: T,
) -> Result<(Histogram2D<T>, Histogram2D<T>), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let grid = HistogramGrid::covering(a.iter().chain(b), bin_width)?;
    Ok((grid.histogram(a)?, grid.histogram(b)?))
}

fn kl_to_mixture<T: Scalar>(p: T, m: T) -> T {
    if p > T::zero() {
        p * (p / m).log2()
    } else {
        T::zero()
    }
}

/// Base-2 Jensen-Shannon divergence of two mass vectors of equal length.
pub fn js_divergence<T: Scalar>(p: &[T], q: &[T]) -> T {
    let half = T::lit(0.5);
    let d: T = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            let m = half * (pi + qi);
            half * (kl_to_mixture(pi, m) + kl_to_mixture(qi, m))
        })
        .sum();
    // Rounding can push identical inputs a hair below zero.
    d.max(T::zero()).min(T::one())
}

/// Square root of the base-2 Jensen-Shannon divergence; lies in `[0, 1]`.
pub fn jensen_shannon_distance<T: Scalar>(p: &Histogram2D<T>, q: &Histogram2D<T>) -> Result<T, StatsError> {
    if !p.same_edges(q) {
        return Err(StatsError::MismatchedEdges);
    }
    Ok(js_divergence(&p.flat_mass(), &q.flat_mass()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSummary<T> {
    pub count: usize,
    pub mean_azimuth: T,
    pub std_azimuth: T,
    pub mean_elevation: T,
    pub std_elevation: T,
}

/// Means and sample standard deviations of (azimuth, elevation) pairs. The
/// standard deviation of a single value is reported as 0.
pub fn summarize_angles<T: Scalar>(angles: &[(T, T)]) -> Result<AngleSummary<T>, StatsError> {
    if angles.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let az: Vec<T> = angles.iter().map(|a| a.0).collect();
    let el: Vec<T> = angles.iter().map(|a| a.1).collect();
    if az.iter().chain(&el).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(AngleSummary {
        count: angles.len(),
        mean_azimuth: scalar::mean(&az).expect("non-empty"),
        std_azimuth: scalar::sample_std(&az).unwrap_or_else(T::zero),
        mean_elevation: scalar::mean(&el).expect("non-empty"),
        std_elevation: scalar::sample_std(&el).unwrap_or_else(T::zero),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_identity() {
        let a = [0.3, 0.1, 0.7, 0.7, 1.2];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_disjoint() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        // lambda = sqrt(1.5)
        approx::assert_abs_diff_eq!(r.p_value, kolmogorov_survival(1.5f64.sqrt()), epsilon = 1e-15);
        let a: Vec<f64> = (0..50).map(f64::from).collect();
        let b: Vec<f64> = (100..150).map(f64::from).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-10);
    }

    #[test]
    fn ks_interleaved_fixture() {
        // Explicit ECDF evaluation: F_a - F_b at 1, 1.5, 2, ... is 0.25, 0, 0.25, 0, ...
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.5, 2.5, 3.5, 4.5];
        assert_eq!(ks_statistic(&a, &b).unwrap(), 0.25);
        assert_eq!(ks_statistic(&b, &a).unwrap(), 0.25);
    }

    #[test]
    fn ks_empty_and_nan() {
        assert_eq!(ks_two_sample::<f64>(&[], &[1.0]).unwrap_err(), StatsError::EmptySample);
        assert_eq!(ks_two_sample(&[f64::NAN], &[1.0]).unwrap_err(), StatsError::NonFinite);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Standard tabulated values of the Kolmogorov distribution.
        assert_relative_eq!(kolmogorov_survival(1.36_f64), 0.0494, epsilon = 2e-4);
        assert_relative_eq!(kolmogorov_survival(1.63_f64), 0.0098, epsilon = 2e-4);
        assert_relative_eq!(kolmogorov_survival(0.5_f64), 0.9639, epsilon = 2e-4);
        // Both branches agree at the switch point.
        let lo = kolmogorov_survival(1.18_f64 - 1e-12);
        let hi = kolmogorov_survival(1.18_f64);
        assert_relative_eq!(lo, hi, epsilon = 1e-9);
        assert_eq!(kolmogorov_survival(0.0_f64), 1.0);
    }

    #[test]
    fn histogram_point_mass() {
        let h = histogram_2d(&[(3.3, -7.2)], 1.0).unwrap();
        assert_eq!(h.mass, vec![vec![1.0]]);
        assert_eq!(h.az_edges, vec![3.0, 4.0]);
        assert_eq!(h.el_edges, vec![-8.0, -7.0]);
    }

    #[test]
    fn histogram_four_bins() {
        let h = histogram_2d(&[(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)], 1.0).unwrap();
        assert_eq!(h.mass, vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        assert_eq!(h.total_mass(), 1.0);
    }

    #[test]
    fn histogram_hand_tally() {
        // Grid: az edges -2,0,2,4 ; el edges 0,2,4.
        let pts = [
            (-1.5, 0.5),
            (-0.1, 1.9),
            (0.0, 0.0),
            (1.0, 3.0),
            (1.99, 2.0),
            (2.0, 0.1),
            (3.5, 3.5),
            (4.0, 4.0),
            (3.0, 1.0),
            (-2.0, 3.9),
        ];
        let h = histogram_2d::<f64>(&pts, 2.0).unwrap();
        assert_eq!(h.az_edges, vec![-2.0, 0.0, 2.0, 4.0]);
        assert_eq!(h.el_edges, vec![0.0, 2.0, 4.0]);
        let counts: Vec<Vec<f64>> = h
            .mass
            .iter()
            .map(|r| r.iter().map(|m| (m * 10.0f64).round()).collect())
            .collect();
        assert_eq!(counts, vec![vec![2.0, 1.0], vec![1.0, 2.0], vec![2.0, 2.0]]);
    }

    #[test]
    fn histogram_errors() {
        assert_eq!(histogram_2d::<f64>(&[], 1.0).unwrap_err(), StatsError::EmptySample);
        assert!(matches!(
            histogram_2d(&[(0.0, 0.0)], 0.0),
            Err(StatsError::InvalidBinWidth(_))
        ));
    }

    #[test]
    fn jsd_cases() {
        let a = [(0.5, 0.5), (1.5, 0.5)];
        let (p, q) = shared_histograms(&a, &a, 1.0).unwrap();
        assert_eq!(jensen_shannon_distance(&p, &q).unwrap(), 0.0);

        let (p, q) = shared_histograms(&[(0.5, 0.5)], &[(5.5, 5.5)], 1.0).unwrap();
        assert_relative_eq!(jensen_shannon_distance(&p, &q).unwrap(), 1.0, epsilon = 1e-12);

        // P = (0.5, 0.5), Q = (1, 0) on a 2x1 grid.
        let (p, q) = shared_histograms(&[(0.5, 0.5), (1.5, 0.5)], &[(0.5, 0.5)], 1.0).unwrap();
        assert_relative_eq!(jensen_shannon_distance(&p, &q).unwrap(), 0.55793, epsilon = 1e-4);
    }

    #[test]
    fn jsd_rejects_mismatched_edges() {
        let p = histogram_2d(&[(0.5, 0.5)], 1.0).unwrap();
        let q = histogram_2d(&[(2.5, 0.5)], 1.0).unwrap();
        assert_eq!(
            jensen_shannon_distance(&p, &q).unwrap_err(),
            StatsError::MismatchedEdges
        );
    }

    #[test]
    fn angle_summary() {
        let s = summarize_angles(&[(-1.0, 4.0), (-2.0, 4.0), (-3.0, 4.0)]).unwrap();
        assert_eq!(s.mean_azimuth, -2.0);
        assert_eq!(s.std_azimuth, 1.0);
        assert_eq!(s.mean_elevation, 4.0);
        assert_eq!(s.std_elevation, 0.0);
        assert_eq!(summarize_angles::<f64>(&[]).unwrap_err(), StatsError::EmptySample);
        let one = summarize_angles(&[(1.5_f32, -2.5)]).unwrap();
        assert_eq!(one.std_azimuth, 0.0);
    }
}
