//! Small statistical helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Scalar;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Standard normal quantile function Φ⁻¹.
pub fn normal_quantile<T: Scalar>(p: T) -> T {
    T::lit(std_normal().inverse_cdf(p.as_f64()))
}

/// Standard normal distribution function Φ.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(std_normal().cdf(x.as_f64()))
}

/// Standard normal density φ.
#[inline]
pub fn normal_pdf<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) / T::lit(2.0)).exp()
}

/// One-based rank used for the empirical quantile of probability `prob` among
/// `len` sorted values: `ceil(prob · len)`, clamped to `1..=len`.
pub fn order_statistic_rank(prob: f64, len: usize) -> usize {
    let k = (prob * len as f64).ceil() as usize;
    k.clamp(1, len)
}

/// Empirical quantile by order statistic on already sorted data.
pub fn sorted_quantile<T: Scalar>(sorted: &[T], prob: f64) -> T {
    sorted[order_statistic_rank(prob, sorted.len()) - 1]
}

pub fn sort_values<T: Scalar>(values: &mut [T]) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

pub fn quantile<T: Scalar>(values: &[T], prob: f64) -> T {
    let mut v = values.to_vec();
    sort_values(&mut v);
    sorted_quantile(&v, prob)
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len())
}

/// Unbiased sample variance.
pub fn variance<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    let ss: T = values.iter().map(|&x| (x - m) * (x - m)).sum();
    ss / T::from_usize_lossy(values.len() - 1)
}

/// Pearson correlation of two equally long samples.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Map an angle into (−π, π].
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let tau = T::TAU();
    let mut r = a - tau * (a / tau).round();
    if r <= -T::PI() {
        r += tau;
    } else if r > T::PI() {
        r -= tau;
    }
    r
}

/// Circular median: the sample angle minimising the summed arc distance to
/// all others. Ties resolve to the earliest sample.
pub fn circular_median<T: Scalar>(angles: &[T]) -> T {
    let mut best = angles[0];
    let mut best_cost = T::infinity();
    for &c in angles {
        let cost: T = angles.iter().map(|&a| wrap_angle(a - c).abs()).sum();
        if cost < best_cost {
            best_cost = cost;
            best = c;
        }
    }
    best
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_oracle_values() {
        assert!((normal_quantile(0.25_f64) + 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!((normal_quantile(0.9_f64) - 1.281_551_565_544_6).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5_f64), 0.0);
    }

    #[test]
    fn order_statistics() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(sorted_quantile(&v, 0.05), 5.0);
        assert_eq!(sorted_quantile(&v, 0.95), 95.0);
        assert_eq!(sorted_quantile(&v, 0.5), 50.0);
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(order_statistic_rank(0.05, 10), 1);
    }

    #[test]
    fn wrap_and_circular_median() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        let a = [PI - 0.1, -PI + 0.1, PI - 0.05];
        let c = circular_median(&a);
        assert!((c - (PI - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn slope_of_a_line() {
        let (s, i) = ols_slope(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14);
    }
}
