//! Smoothing chain: polynomial least-squares (Savitzky-Golay) smoothing,
//! Gaussian convolution, optional EWMA and mean subtraction.
//!
//! Both convolutions pad with half-sample symmetric reflection
//! (`d c b a | a b c d | d c b a`), which keeps constants fixed and preserves
//! the total mass of the signal under a unit-sum kernel.
//!
//! Note: a 3-sample window with a degree-2 polynomial interpolates its three
//! points exactly, so the whole-data smoothing stage is an identity transform.
//! It is kept configurable rather than dropped.

use super::{Modality, SignalError};
use crate::scalar::{mean, Scalar};

/// Where mean subtraction runs relative to the smoothing filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanSubtraction {
    #[default]
    None,
    BeforeFiltering,
    AfterFiltering,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterChainConfig<T> {
    pub sg_window: usize,
    pub sg_degree: usize,
    pub gaussian_sigma: T,
    pub ewma_alpha: Option<T>,
    pub mean_subtract: MeanSubtraction,
}

impl<T: Scalar> FilterChainConfig<T> {
    pub fn new(
        sg_window: usize,
        sg_degree: usize,
        gaussian_sigma: T,
        ewma_alpha: Option<T>,
        mean_subtract: MeanSubtraction,
    ) -> Result<Self, SignalError> {
        let cfg = Self {
            sg_window,
            sg_degree,
            gaussian_sigma,
            ewma_alpha,
            mean_subtract,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.sg_window.is_multiple_of(2) {
            return Err(SignalError::InvalidFilter("smoothing window must be odd"));
        }
        if self.sg_degree >= self.sg_window {
            return Err(SignalError::InvalidFilter("polynomial degree must be below the window length"));
        }
        if !self.gaussian_sigma.is_finite() || self.gaussian_sigma <= T::zero() {
            return Err(SignalError::InvalidFilter("gaussian sigma must be positive"));
        }
        if let Some(a) = self.ewma_alpha {
            if !(a > T::zero() && a <= T::one()) {
                return Err(SignalError::InvalidFilter("ewma alpha must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// First pass over an entire recording: SG(3, 2) then Gaussian(1.4).
    pub fn whole_data() -> Self {
        Self {
            sg_window: 3,
            sg_degree: 2,
            gaussian_sigma: T::lit(1.4),
            ewma_alpha: None,
            mean_subtract: MeanSubtraction::None,
        }
    }

    /// Second pass over a single window: SG(5, 3), Gaussian(1.4), then EWMA for
    /// the acceleration channels; altitude is mean-subtracted first.
    pub fn window(modality: Modality) -> Self {
        let (ewma_alpha, mean_subtract) = match modality {
            Modality::Acv => (Some(T::lit(0.16)), MeanSubtraction::None),
            Modality::Ach => (Some(T::lit(0.2)), MeanSubtraction::None),
            Modality::Gyr => (None, MeanSubtraction::None),
            Modality::Bar => (None, MeanSubtraction::BeforeFiltering),
        };
        Self {
            sg_window: 5,
            sg_degree: 3,
            gaussian_sigma: T::lit(1.4),
            ewma_alpha,
            mean_subtract,
        }
    }
}

pub fn apply_filter_chain<T: Scalar>(x: &[T], cfg: &FilterChainConfig<T>) -> Result<Vec<T>, SignalError> {
    cfg.validate()?;
    if x.len() < cfg.sg_window {
        return Err(SignalError::WindowTooShort {
            len: x.len(),
            sg_window: cfg.sg_window,
        });
    }
    let mut y = x.to_vec();
    if cfg.mean_subtract == MeanSubtraction::BeforeFiltering {
        subtract_mean(&mut y);
    }
    y = convolve_reflect(&y, &savitzky_golay_kernel::<T>(cfg.sg_window, cfg.sg_degree));
    y = convolve_reflect(&y, &gaussian_kernel(cfg.gaussian_sigma));
    if let Some(alpha) = cfg.ewma_alpha {
        ewma_in_place(&mut y, alpha);
    }
    if cfg.mean_subtract == MeanSubtraction::AfterFiltering {
        subtract_mean(&mut y);
    }
    Ok(y)
}

fn subtract_mean<T: Scalar>(y: &mut [T]) {
    if let Some(mu) = mean(y) {
        y.iter_mut().for_each(|v| *v = *v - mu);
    }
}

/// Forward exponentially weighted moving average, seeded with the first sample.
pub fn ewma_in_place<T: Scalar>(y: &mut [T], alpha: T) {
    for i in 1..y.len() {
        y[i] = alpha * y[i] + (T::one() - alpha) * y[i - 1];
    }
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Centered convolution with an odd-length kernel (kernel is symmetric in
/// every use here, so correlation and convolution coincide).
pub fn convolve_reflect<T: Scalar>(x: &[T], kernel: &[T]) -> Vec<T> {
    let n = x.len();
    let half = (kernel.len() / 2) as isize;
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, &w)| w * x[reflect(i + k as isize - half, n)])
                .sum()
        })
        .collect()
}

/// Sampled Gaussian truncated at 4 sigma and renormalized to unit sum.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Vec<T> {
    let s = sigma.as_f64();
    let radius = (4.0 * s + 0.5) as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * s * s)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| T::lit(w / total)).collect()
}

/// Center-sample least-squares smoothing weights for a window of `window`
/// samples and a polynomial of degree `degree`.
pub fn savitzky_golay_kernel<T: Scalar>(window: usize, degree: usize) -> Vec<T> {
    let half = (window / 2) as isize;
    let cols = degree + 1;
    let positions: Vec<f64> = (-half..=half).map(|j| j as f64).collect();
    // Normal equations (AᵀA) z = e₀; the weights are then A z.
    let mut ata = vec![vec![0.0f64; cols + 1]; cols];
    for (r, row) in ata.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().take(cols).enumerate() {
            *cell = positions.iter().map(|&p| p.powi((r + c) as i32)).sum();
        }
        row[cols] = if r == 0 { 1.0 } else { 0.0 };
    }
    let z = solve_dense(ata);
    positions
        .iter()
        .map(|&p| T::lit((0..cols).map(|k| z[k] * p.powi(k as i32)).sum()))
        .collect()
}

/// Gauss-Jordan elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap_or(col);
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        let pivot = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != 0.0 {
                for (x, &p) in row[col..=n].iter_mut().zip(&pivot[col..=n]) {
                    *x -= f * p;
                }
            }
        }
    }
    m.into_iter().map(|row| row[n]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_only(sigma: f64) -> FilterChainConfig<f64> {
        FilterChainConfig::new(1, 0, sigma, None, MeanSubtraction::None).unwrap()
    }

    #[test]
    fn sg_kernels() {
        let k: Vec<f64> = savitzky_golay_kernel(3, 2);
        assert!((k[0]).abs() < 1e-12 && (k[1] - 1.0).abs() < 1e-12 && k[2].abs() < 1e-12);
        // Classic 5-point quadratic/cubic smoother: (-3, 12, 17, 12, -3) / 35.
        let k: Vec<f64> = savitzky_golay_kernel(5, 3);
        let expected = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_survive_any_chain() {
        let x = vec![5.0f64; 40];
        for m in Modality::ALL {
            let cfg = FilterChainConfig::window(m);
            let y = apply_filter_chain(&x, &cfg).unwrap();
            if m == Modality::Bar {
                assert!(y.iter().all(|v| v.abs() < 1e-12));
            } else {
                assert!(y.iter().all(|v| (v - 5.0).abs() < 1e-12), "{m}");
            }
        }
        let y = apply_filter_chain(&x, &FilterChainConfig::whole_data()).unwrap();
        assert!(y.iter().all(|v| (v - 5.0).abs() < 1e-12));
        let cfg = FilterChainConfig { mean_subtract: MeanSubtraction::AfterFiltering, ..FilterChainConfig::whole_data() };
        assert!(apply_filter_chain(&x, &cfg).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gaussian_impulse_is_symmetric_and_unit_mass() {
        let y = apply_filter_chain(&[0.0, 0.0, 1.0, 0.0, 0.0], &gaussian_only(1.4)).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for i in 0..5 {
            assert!((y[i] - y[4 - i]).abs() < 1e-12);
        }
        assert!(y[2] > y[1] && y[1] > y[0]);
    }

    #[test]
    fn kernel_truncation() {
        let k: Vec<f64> = gaussian_kernel(1.4);
        assert_eq!(k.len(), 13);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ewma_recursion() {
        let mut y = vec![1.0f64, 0.0, 0.0];
        ewma_in_place(&mut y, 0.5);
        assert_eq!(y, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn rejects_short_windows_and_bad_configs() {
        let cfg = FilterChainConfig::<f64>::window(Modality::Acv);
        assert_eq!(
            apply_filter_chain(&[1.0, 2.0], &cfg),
            Err(SignalError::WindowTooShort { len: 2, sg_window: 5 })
        );
        assert!(FilterChainConfig::new(4, 2, 1.0f64, None, MeanSubtraction::None).is_err());
        assert!(FilterChainConfig::new(3, 3, 1.0f64, None, MeanSubtraction::None).is_err());
        assert!(FilterChainConfig::new(3, 2, 0.0f64, None, MeanSubtraction::None).is_err());
        assert!(FilterChainConfig::new(3, 2, 1.0f64, Some(1.5), MeanSubtraction::None).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = (0..50).map(|i| (i as f32 * 0.3).sin()).collect();
        let y32 = apply_filter_chain(&x, &FilterChainConfig::window(Modality::Acv)).unwrap();
        let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let y64 = apply_filter_chain(&x64, &FilterChainConfig::window(Modality::Acv)).unwrap();
        for (a, b) in y32.iter().zip(&y64) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn chain_is_homogeneous(
            x in proptest::collection::vec(-10.0f64..10.0, 8..64),
            a in -5.0f64..5.0,
            m in 0usize..3,
        ) {
            let cfg = FilterChainConfig::window(Modality::ALL[m]);
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            let lhs = apply_filter_chain(&ax, &cfg).unwrap();
            let rhs: Vec<f64> = apply_filter_chain(&x, &cfg).unwrap().iter().map(|v| a * v).collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }
    }
}
