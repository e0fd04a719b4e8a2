//! Scalar abstraction so the same kernels run in single and double precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumCast};

pub trait Real: Float + Send + Sync + Debug + Display + Sum + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        <f32 as NumCast>::from(x).unwrap_or(f32::NAN)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

/// Plain left-to-right dot product.
#[inline]
pub fn dot_seq<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Dot product with four interleaved accumulators. The summation order is
/// fixed, so results are reproducible for a given length.
#[inline]
pub fn dot_lanes<T: Real>(a: &[T], b: &[T]) -> T {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [T::zero(); 4];
    let chunks = len / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..len {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
