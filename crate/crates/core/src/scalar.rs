use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point sample type used by the signal, activity and quantizer stages.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_usize(xs.len())?)
}

/// Population (divide-by-N) standard deviation.
pub fn population_std<T: Scalar>(xs: &[T]) -> Option<T> {
    let mu = mean(xs)?;
    let var = xs.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / T::from_usize(xs.len())?;
    Some(var.sqrt())
}

/// Median; even lengths average the two central order statistics.
pub fn median<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_statistics() {
        assert_eq!(mean(&[1.0f64, 3.0]), Some(2.0));
        assert_eq!(population_std(&[1.0f64, 3.0]), Some(1.0));
        assert_eq!(median(&[1.0f64, 5.0, 2.0, 8.0]), Some(3.5));
        assert_eq!(median(&[3.0f32, 1.0, 2.0]), Some(2.0));
        assert_eq!(mean::<f64>(&[]), None);
    }
}
