//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar used by the clustering, Markov and statistics code: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`; used for literals.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum: T = values.iter().copied().sum();
    Some(sum / T::from_usize_lossy(values.len()))
}

/// Sample standard deviation (n - 1 denominator); `None` for fewer than two values.
pub fn sample_std<T: Scalar>(values: &[T]) -> Option<T> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / T::from_usize_lossy(values.len() - 1)).sqrt())
}
