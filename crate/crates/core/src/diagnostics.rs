//! Independent oracles and Monte-Carlo checks for the estimator.
//!
//! Every check is deterministic for a fixed seed and returns a serializable
//! report with an explicit `pass` flag.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{pointwise_bands, replicate_ensemble, ConfidenceBands, EstimationConfig};
use crate::local_gaussian::objective::{penalty_reduced, WeightedMoments};
use crate::local_gaussian::{fit_local_gaussian, penalty, penalty_gradient, Bandwidth, GaussianParam, Order, Point};
use crate::scalar::Scalar;
use crate::simulate::{replicate_rng, ModelSpec, Simulator};
use crate::stats::{ols_slope, variance};
use crate::timeseries::{lag_pairs, pseudo_normalize, LagPairSet};

/// Exhaustive minimisation of the `p = 1` penalty over `ρ ∈ (−0.999, 0.999)`
/// on a grid of spacing `step`.
pub fn grid_oracle_p1<T: Scalar>(pairs: &LagPairSet<T>, v: Point<T>, b: Bandwidth<T>, step: f64) -> T {
    let moments = WeightedMoments::new(pairs, v, b);
    let steps = (0.999 / step).floor() as i64;
    let mut best = (T::infinity(), T::zero());
    for i in -steps..=steps {
        let rho = T::lit(i as f64 * step);
        if rho.abs() >= T::lit(0.999) {
            continue;
        }
        let value = penalty_reduced(&moments, v, b, &GaussianParam::One { rho }).0;
        if value < best.0 {
            best = (value, rho);
        }
    }
    best.1
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub order: Order,
    pub trials: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Analytic penalty gradient against five-point central differences of the
/// pair-by-pair penalty at `trials` random parameter values.
pub fn finite_difference_check(
    pairs: &LagPairSet<f64>,
    v: Point<f64>,
    b: Bandwidth<f64>,
    order: Order,
    trials: usize,
    seed: u64,
) -> Result<GradientCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let theta = random_param(&mut rng, order);
        let analytic = penalty_gradient(pairs, v, b, &theta)?;
        let x = theta.free();
        for (i, a) in analytic.iter().enumerate() {
            let at = |d: f64| {
                let mut y = x.clone();
                y[i] += d;
                penalty(pairs, v, b, &GaussianParam::from_free(order, &y))
            };
            let fd = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
            worst = worst.max(rel_err(*a, fd));
        }
    }
    let tolerance = 1e-5;
    Ok(GradientCheckReport {
        order,
        trials,
        max_relative_error: worst,
        tolerance,
        pass: worst < tolerance,
    })
}

fn random_param(rng: &mut ChaCha8Rng, order: Order) -> GaussianParam<f64> {
    match order {
        Order::One => GaussianParam::One {
            rho: rng.random_range(-0.9..0.9),
        },
        Order::Five => GaussianParam::Five {
            mu1: rng.random_range(-0.5..0.5),
            mu2: rng.random_range(-0.5..0.5),
            sigma1: rng.random_range(0.5..1.5),
            sigma2: rng.random_range(0.5..1.5),
            rho: rng.random_range(-0.9..0.9),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCoincidence {
    pub point: Point<f64>,
    /// max over the grid of |median local co − median global co|
    pub max_gap: f64,
    /// fraction of frequencies where the true value lies in the local band
    pub coverage_co: f64,
    pub coverage_quad: f64,
    pub coverage_phase: f64,
    /// fraction of frequencies where the local band is wider than the global one
    pub wider_co: f64,
    pub wider_quad: f64,
    pub excluded_replicates: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub n: usize,
    pub rho: f64,
    pub replicates: usize,
    pub tolerance: f64,
    pub points: Vec<PointCoincidence>,
    pub pass: bool,
}

/// For Gaussian white noise the local and global spectra coincide: the local
/// median co-curve at each point is compared with the global one and the true
/// constants `co = ρ`, `quad = 0`, `phase = 0` are located in the bands.
pub fn gaussian_coincidence_check(
    n: usize,
    rho: f64,
    config: &EstimationConfig<f64>,
    replicates: usize,
    seed: u64,
    probs: (f64, f64),
    tolerance: f64,
) -> Result<CoincidenceReport> {
    if !(rho.abs() < 1.0) {
        return Err(Error::RhoOutOfRange(rho));
    }
    let run = replicate_ensemble(&ModelSpec::GaussianWn { rho }, replicates, n, config, seed, None)?;
    let global = pointwise_bands(&run.global, probs)?;
    let points = config
        .points
        .iter()
        .zip(&run.local)
        .map(|(&point, ensemble)| {
            let local = pointwise_bands(ensemble, probs)?;
            Ok(coincidence_at(point, &local, &global, rho, tolerance))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoincidenceReport {
        n,
        rho,
        replicates,
        tolerance,
        pass: points.iter().all(|p| p.pass),
        points,
    })
}

fn coincidence_at(
    point: Point<f64>,
    local: &ConfidenceBands<f64>,
    global: &ConfidenceBands<f64>,
    rho: f64,
    tolerance: f64,
) -> PointCoincidence {
    let max_gap = local
        .co
        .median
        .iter()
        .zip(&global.co.median)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    PointCoincidence {
        point,
        max_gap,
        coverage_co: local.co.coverage(|_| rho),
        coverage_quad: local.quad.coverage(|_| 0.0),
        coverage_phase: local.phase.coverage(|_| 0.0),
        wider_co: local.co.wider_fraction(&global.co),
        wider_quad: local.quad.wider_fraction(&global.quad),
        excluded_replicates: local.excluded,
        pass: max_gap <= tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub sizes: Vec<usize>,
    /// Monte-Carlo variance of ρ̂(h) at each size
    pub variances: Vec<f64>,
    /// converged replicates used at each size
    pub used: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    /// delta-method standard error of the slope
    pub slope_se: f64,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Monte-Carlo variance of the lag-`h` local correlation at fixed bandwidth
/// for each sample size, and the least-squares slope of log-variance against
/// log n. The asymptotic rate `√(n (b1 b2)^{(p+1)/2})` predicts slope −1.
#[allow(clippy::too_many_arguments)]
pub fn clt_rate_diagnostic(
    model: &ModelSpec,
    point: Point<f64>,
    lag: usize,
    order: Order,
    b: Bandwidth<f64>,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
    tolerance: f64,
) -> Result<RateReport> {
    if sizes.len() < 3 {
        return Err(Error::InvalidParameter("need at least three sample sizes".into()));
    }
    let (lo, hi) = sizes
        .iter()
        .fold((usize::MAX, 0), |(lo, hi), &n| (lo.min(n), hi.max(n)));
    if (hi as f64) < 10.0 * lo as f64 {
        return Err(Error::InvalidParameter("sample sizes must span at least one decade".into()));
    }
    if replicates < 3 {
        return Err(Error::InvalidParameter("need at least 3 replicates".into()));
    }
    let mut variances = Vec::with_capacity(sizes.len());
    let mut used = Vec::with_capacity(sizes.len());
    for (s, &n) in sizes.iter().enumerate() {
        let estimates: Vec<Option<f64>> = (0..replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(seed, (s * replicates + i) as u64);
                let series = model.simulate::<f64>(n, &mut rng).ok()?;
                let z = pseudo_normalize(&series);
                let pairs = lag_pairs(z.column(0), z.column(1), lag).ok()?;
                let fit = fit_local_gaussian(&pairs, point, b, order, None).ok()?;
                fit.converged.then(|| fit.theta.rho())
            })
            .collect();
        let ok: Vec<f64> = estimates.into_iter().flatten().collect();
        if ok.len() < 3 {
            return Err(Error::TooFewReplicates {
                usable: ok.len(),
                needed: 3,
            });
        }
        variances.push(variance(&ok));
        used.push(ok.len());
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ols_slope(&x, &y);
    // Var(ln s²) ≈ 2/(R − 1) for Gaussian-like estimators.
    let xbar = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|xi| (xi - xbar).powi(2)).sum();
    let slope_var: f64 = x
        .iter()
        .zip(&used)
        .map(|(xi, &r)| ((xi - xbar) / sxx).powi(2) * 2.0 / (r as f64 - 1.0))
        .sum();
    let expected_slope = -1.0;
    Ok(RateReport {
        sizes: sizes.to_vec(),
        variances,
        used,
        slope,
        intercept,
        slope_se: slope_var.sqrt(),
        expected_slope,
        tolerance,
        pass: (slope - expected_slope).abs() <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub omega: f64,
    pub amplitude: f64,
    pub phase_spread: f64,
    pub amplitude_spread: f64,
    /// phase_spread / amplitude_spread
    pub ratio: f64,
    /// 1 / amplitude
    pub expected: f64,
}

/// Soft consistency check between phase and amplitude band widths at the
/// frequency of the largest median amplitude (excluding ω = 0): to first order
/// the phase spread is the amplitude spread divided by the amplitude.
/// Reported only, never gated.
pub fn spread_ratio(bands: &ConfidenceBands<f64>) -> Option<SpreadReport> {
    let i = (0..bands.omega.len())
        .filter(|&i| bands.omega[i] > 0.0)
        .max_by(|&a, &b| bands.amplitude.median[a].total_cmp(&bands.amplitude.median[b]))?;
    let amplitude = bands.amplitude.median[i];
    let phase_spread = bands.phase.width(i);
    let amplitude_spread = bands.amplitude.width(i);
    Some(SpreadReport {
        omega: bands.omega[i],
        amplitude,
        phase_spread,
        amplitude_spread,
        ratio: phase_spread / amplitude_spread,
        expected: 1.0 / amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{FrequencyGrid, LagWindow};
    use crate::timeseries::PairOrder;

    fn pairs(points: Vec<[f64; 2]>) -> LagPairSet<f64> {
        LagPairSet {
            pairs: points,
            lag: 0,
            order: PairOrder::KL,
        }
    }

    #[test]
    fn oracle_is_zero_without_cross_product() {
        // product lattice of normal quantiles: symmetric and uncorrelated
        let q: Vec<f64> = (1..=40).map(|i| crate::stats::normal_quantile(i as f64 / 41.0)).collect();
        let p = pairs(q.iter().flat_map(|&x| q.iter().map(move |&y| [x, y])).collect());
        let b = Bandwidth::uniform(0.6).unwrap();
        let rho = grid_oracle_p1(&p, Point::new(0.0, 0.0), b, 1e-4);
        assert!(rho.abs() < 1e-4, "{rho}");
    }

    #[test]
    fn oracle_stable_under_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = pairs(
            (0..300)
                .map(|_| {
                    let x: f64 = rng.random_range(-2.0..2.0);
                    [x, 0.5 * x + rng.random_range(-1.0..1.0)]
                })
                .collect(),
        );
        let b = Bandwidth::uniform(0.6).unwrap();
        let v = Point::new(0.2, 0.1);
        let coarse = grid_oracle_p1(&p, v, b, 1e-4);
        let fine = grid_oracle_p1(&p, v, b, 1e-5);
        assert!((coarse - fine).abs() < 1e-4);
    }

    #[test]
    fn gradient_check_passes_and_handles_empty_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = pairs((0..100).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect());
        let b = Bandwidth::uniform(0.6).unwrap();
        for order in [Order::One, Order::Five] {
            let r = finite_difference_check(&p, Point::new(0.1, -0.3), b, order, 20, 11).unwrap();
            assert!(r.pass, "{r:?}");
            let empty = finite_difference_check(&pairs(vec![]), Point::new(0.0, 0.0), b, order, 5, 1).unwrap();
            assert!(empty.pass, "{empty:?}");
        }
    }

    #[test]
    fn rate_rejects_bad_sizes() {
        let model = ModelSpec::GaussianWn { rho: 0.0 };
        let b = Bandwidth::uniform(0.6).unwrap();
        let v = Point::new(0.0, 0.0);
        assert!(clt_rate_diagnostic(&model, v, 1, Order::One, b, &[100, 200], 10, 0, 0.3).is_err());
        assert!(clt_rate_diagnostic(&model, v, 1, Order::One, b, &[100, 200, 500], 10, 0, 0.3).is_err());
    }

    #[test]
    fn smaller_bandwidth_has_larger_variance() {
        let model = ModelSpec::GaussianWn { rho: 0.3 };
        let v = Point::new(0.0, 0.0);
        let sizes = [500, 1500, 5000];
        let wide = clt_rate_diagnostic(&model, v, 1, Order::One, Bandwidth::uniform(1.0).unwrap(), &sizes, 40, 4, 1.0)
            .unwrap();
        let narrow =
            clt_rate_diagnostic(&model, v, 1, Order::One, Bandwidth::uniform(0.4).unwrap(), &sizes, 40, 4, 1.0)
                .unwrap();
        for (w, n) in wide.variances.iter().zip(&narrow.variances) {
            assert!(n > w, "{n} <= {w}");
        }
    }

    // The slope error shrinks like 1/√R, so doubling R divides it by √2.
    #[test]
    fn doubling_replicates_shrinks_slope_error() {
        let model = ModelSpec::GaussianWn { rho: 0.3 };
        let (v, b) = (Point::new(0.0, 0.0), Bandwidth::uniform(0.6).unwrap());
        let sizes = [300, 1000, 3000];
        let spread = |r: usize| {
            let runs: Vec<RateReport> = (0..16)
                .map(|s| clt_rate_diagnostic(&model, v, 1, Order::One, b, &sizes, r, 100 + s, 1.0).unwrap())
                .collect();
            let slopes: Vec<f64> = runs.iter().map(|x| x.slope).collect();
            (variance(&slopes).sqrt(), runs[0].slope_se)
        };
        let (sd1, se1) = spread(30);
        let (sd2, se2) = spread(60);
        assert!((se2 / se1 - 0.5f64.sqrt()).abs() < 0.03, "{}", se2 / se1);
        assert!(sd2 < sd1, "{sd2} >= {sd1}");
        // the delta-method error should be of the right size
        assert!(sd1 / se1 > 0.5 && sd1 / se1 < 2.0, "{sd1} vs {se1}");
    }

    #[test]
    fn coincidence_check_harness() {
        let config = EstimationConfig {
            pair: (0, 1),
            points: vec![Point::new(0.0, 0.0)],
            bandwidth: Bandwidth::uniform(0.6).unwrap(),
            truncation: 3,
            order: Order::One,
            window: LagWindow::TukeyHanning,
            grid: FrequencyGrid::uniform(33).unwrap(),
        };
        let r = gaussian_coincidence_check(400, 0.0, &config, 8, 1, (0.05, 0.95), 0.2).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.points[0].max_gap < 0.2);
        let strict = gaussian_coincidence_check(400, 0.0, &config, 8, 1, (0.05, 0.95), 0.0).unwrap();
        assert!(!strict.pass);
        assert_eq!(r, gaussian_coincidence_check(400, 0.0, &config, 8, 1, (0.05, 0.95), 0.2).unwrap());
        assert!(gaussian_coincidence_check(400, 1.0, &config, 8, 1, (0.05, 0.95), 0.2).is_err());
    }
}
