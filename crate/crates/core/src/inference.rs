//! Replicate ensembles (model simulation or circular block bootstrap),
//! pointwise quantile bands, and per-frequency complex summaries.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_gaussian::{local_cross_correlations, Bandwidth, LocalCorrelationSet, Order, Point};
use crate::scalar::Scalar;
use crate::simulate::{replicate_rng, Simulator};
use crate::spectra::{
    global_correlations, local_cross_spectrum, synthesize, CorrelationSet, FrequencyGrid, LagWindow,
    SpectrumEstimate, SpectrumKind, SpectrumMeta,
};
use crate::stats::{circular_median, sort_values, sorted_quantile, wrap_angle};
use crate::timeseries::{pseudo_normalize, PseudoNormalizedSeries};

/// Everything needed to turn one normalized series into spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig<T> {
    pub pair: (usize, usize),
    pub points: Vec<Point<T>>,
    pub bandwidth: Bandwidth<T>,
    pub truncation: usize,
    pub order: Order,
    pub window: LagWindow,
    pub grid: FrequencyGrid<T>,
}

/// Local correlation sets (one per point) and the global correlations of one
/// series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCorrelations<T> {
    pub local: Vec<LocalCorrelationSet<T>>,
    pub global: CorrelationSet<T>,
}

impl<T: Scalar> SeriesCorrelations<T> {
    pub fn local_spectrum(&self, point: usize, config: &EstimationConfig<T>) -> Result<SpectrumEstimate<T>> {
        local_cross_spectrum(&self.local[point], config.window, &config.grid, config.pair)
    }

    pub fn global_spectrum(&self, config: &EstimationConfig<T>) -> Result<SpectrumEstimate<T>> {
        let meta = SpectrumMeta {
            kind: SpectrumKind::Global,
            pair: config.pair,
            truncation: config.truncation,
            window: config.window,
            point: None,
            bandwidth: None,
            order: None,
        };
        synthesize(&self.global, config.window, &config.grid, meta, true)
    }
}

/// Correlations for every configured point plus the global ones.
pub fn estimate_correlations<T: Scalar>(
    z: &PseudoNormalizedSeries<T>,
    config: &EstimationConfig<T>,
) -> Result<SeriesCorrelations<T>> {
    let (k, l) = config.pair;
    if k >= z.dim() || l >= z.dim() {
        return Err(Error::InvalidParameter(format!(
            "pair ({k}, {l}) out of range for {} columns",
            z.dim()
        )));
    }
    let (zk, zl) = (z.column(k), z.column(l));
    let local = config
        .points
        .iter()
        .map(|&v| local_cross_correlations(zk, zl, v, config.bandwidth, config.truncation, config.order))
        .collect::<Result<Vec<_>>>()?;
    let global = global_correlations(zk, zl, config.truncation)?;
    Ok(SeriesCorrelations { local, global })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleSource {
    Model,
    Bootstrap,
}

/// Replicate spectra sharing one grid and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEnsemble<T> {
    pub replicates: Vec<SpectrumEstimate<T>>,
    pub source: EnsembleSource,
    pub seed: u64,
    /// replicates that could not be estimated at all
    pub failures: usize,
}

impl<T: Scalar> BandEnsemble<T> {
    pub fn new(replicates: Vec<SpectrumEstimate<T>>, source: EnsembleSource, seed: u64) -> Result<Self> {
        if replicates.len() < 2 {
            return Err(Error::TooFewReplicates {
                usable: replicates.len(),
                needed: 2,
            });
        }
        let first = &replicates[0];
        if replicates
            .iter()
            .any(|r| r.grid != first.grid || r.meta != first.meta)
        {
            return Err(Error::InvalidParameter(
                "ensemble replicates must share grid and configuration".into(),
            ));
        }
        Ok(Self {
            replicates,
            source,
            seed,
            failures: 0,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.replicates[0].grid
    }

    fn usable(&self) -> impl Iterator<Item = &SpectrumEstimate<T>> {
        self.replicates.iter().filter(|r| r.converged)
    }

    /// Replicates with at least one non-converged fit.
    pub fn flagged(&self) -> usize {
        self.replicates.iter().filter(|r| !r.converged).count()
    }
}

/// Result of running every replicate of an ensemble through the estimator.
#[derive(Debug, Clone)]
pub struct EnsembleRun<T> {
    /// one ensemble per configured point
    pub local: Vec<BandEnsemble<T>>,
    pub global: BandEnsemble<T>,
    /// per replicate correlations; `None` where estimation failed
    pub correlations: Vec<Option<SeriesCorrelations<T>>>,
}

fn assemble<T: Scalar>(
    results: Vec<Result<SeriesCorrelations<T>>>,
    config: &EstimationConfig<T>,
    source: EnsembleSource,
    seed: u64,
) -> Result<EnsembleRun<T>> {
    let failures = results.iter().filter(|r| r.is_err()).count();
    let correlations: Vec<Option<SeriesCorrelations<T>>> = results.into_iter().map(|r| r.ok()).collect();
    let ok: Vec<&SeriesCorrelations<T>> = correlations.iter().flatten().collect();
    let mut local = Vec::with_capacity(config.points.len());
    for p in 0..config.points.len() {
        let reps = ok
            .iter()
            .map(|c| c.local_spectrum(p, config))
            .collect::<Result<Vec<_>>>()?;
        let mut e = BandEnsemble::new(reps, source, seed)?;
        e.failures = failures;
        local.push(e);
    }
    let reps = ok.iter().map(|c| c.global_spectrum(config)).collect::<Result<Vec<_>>>()?;
    let mut global = BandEnsemble::new(reps, source, seed)?;
    global.failures = failures;
    Ok(EnsembleRun {
        local,
        global,
        correlations,
    })
}

/// `replicates` independent realisations of `model`, each pseudo-normalized
/// and estimated with `config`. Replicate `i` draws from stream `i` of `seed`.
pub fn replicate_ensemble<T: Scalar, M: Simulator>(
    model: &M,
    replicates: usize,
    n: usize,
    config: &EstimationConfig<T>,
    seed: u64,
    progress: Option<&AtomicUsize>,
) -> Result<EnsembleRun<T>> {
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    let results: Vec<Result<SeriesCorrelations<T>>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let series = model.simulate::<T>(n, &mut rng)?;
            let out = estimate_correlations(&pseudo_normalize(&series), config);
            if let Some(p) = progress {
                p.fetch_add(1, Ordering::Relaxed);
            }
            out
        })
        .collect();
    assemble(results, config, EnsembleSource::Model, seed)
}

/// Circular moving-block bootstrap over multivariate rows.
///
/// Blocks of `block_len` consecutive rows start at uniformly drawn indices and
/// wrap around the end; blocks are concatenated and cut to length `n`.
pub fn block_bootstrap<T: Scalar>(
    series: &PseudoNormalizedSeries<T>,
    block_len: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<PseudoNormalizedSeries<T>>> {
    let n = series.len();
    if block_len == 0 || block_len > n {
        return Err(Error::InvalidParameter(format!(
            "block length {block_len} outside 1..={n}"
        )));
    }
    (0..replicates)
        .map(|i| {
            let idx = bootstrap_indices(n, block_len, seed, i as u64);
            let cols = series
                .columns()
                .iter()
                .map(|c| idx.iter().map(|&t| c[t]).collect())
                .collect();
            PseudoNormalizedSeries::from_columns(series.names().to_vec(), cols)
        })
        .collect()
}

/// Row indices of bootstrap replicate `index`.
pub fn bootstrap_indices(n: usize, block_len: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = replicate_rng(seed, index);
    let mut idx = Vec::with_capacity(n + block_len);
    while idx.len() < n {
        let start = rng.random_range(0..n);
        idx.extend((0..block_len).map(|j| (start + j) % n));
    }
    idx.truncate(n);
    idx
}

/// Block-bootstrap ensemble of an observed (already normalized) series.
pub fn bootstrap_ensemble<T: Scalar>(
    z: &PseudoNormalizedSeries<T>,
    config: &EstimationConfig<T>,
    block_len: usize,
    replicates: usize,
    seed: u64,
    progress: Option<&AtomicUsize>,
) -> Result<EnsembleRun<T>> {
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    let n = z.len();
    if block_len == 0 || block_len > n {
        return Err(Error::InvalidParameter(format!(
            "block length {block_len} outside 1..={n}"
        )));
    }
    let results: Vec<Result<SeriesCorrelations<T>>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let idx = bootstrap_indices(n, block_len, seed, i as u64);
            let cols = z.columns().iter().map(|c| idx.iter().map(|&t| c[t]).collect()).collect();
            let resampled = PseudoNormalizedSeries::from_columns(z.names().to_vec(), cols)?;
            let out = estimate_correlations(&resampled, config);
            if let Some(p) = progress {
                p.fetch_add(1, Ordering::Relaxed);
            }
            out
        })
        .collect();
    assemble(results, config, EnsembleSource::Bootstrap, seed)
}

/// Median and pointwise interval of one curve over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand<T> {
    pub median: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> CurveBand<T> {
    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    /// Fraction of grid points where `truth(i)` lies in `[lower, upper]`.
    pub fn coverage(&self, truth: impl Fn(usize) -> T) -> f64 {
        let hits = (0..self.median.len())
            .filter(|&i| {
                let t = truth(i);
                self.lower[i] <= t && t <= self.upper[i]
            })
            .count();
        hits as f64 / self.median.len() as f64
    }

    /// Fraction of grid points where this band is strictly wider than `other`.
    pub fn wider_fraction(&self, other: &CurveBand<T>) -> f64 {
        let hits = (0..self.median.len())
            .filter(|&i| self.width(i) > other.width(i))
            .count();
        hits as f64 / self.median.len() as f64
    }
}

/// Pointwise bands for co, quad, amplitude and phase.
///
/// Quantiles are order statistics: the `ceil(p·R)`-th smallest of the `R`
/// usable replicates. Phase values are re-centred on their circular median
/// before ranking, so the phase band may extend past ±π; such frequencies are
/// marked in `branch_cut`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands<T> {
    pub probs: (f64, f64),
    pub omega: Vec<T>,
    pub co: CurveBand<T>,
    pub quad: CurveBand<T>,
    pub amplitude: CurveBand<T>,
    pub phase: CurveBand<T>,
    pub branch_cut: Vec<bool>,
    pub used: usize,
    pub excluded: usize,
}

fn check_probs(probs: (f64, f64)) -> Result<()> {
    if !(probs.0 > 0.0 && probs.0 < probs.1 && probs.1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "band probabilities must satisfy 0 < lo < hi < 1, got {probs:?}"
        )));
    }
    Ok(())
}

fn linear_summary<T: Scalar>(mut v: Vec<T>, probs: (f64, f64)) -> (T, T, T) {
    sort_values(&mut v);
    (
        sorted_quantile(&v, probs.0),
        sorted_quantile(&v, 0.5),
        sorted_quantile(&v, probs.1),
    )
}

/// `(lower, median, upper)` of angles, ranked after centring on the circular
/// median; values are not re-wrapped so `lower ≤ median ≤ upper`.
fn circular_summary<T: Scalar>(angles: &[T], probs: (f64, f64)) -> (T, T, T) {
    let centre = circular_median(angles);
    let offsets: Vec<T> = angles.iter().map(|&a| wrap_angle(a - centre)).collect();
    let (lo, med, hi) = linear_summary(offsets, probs);
    let median = wrap_angle(centre + med);
    (median + (lo - med), median, median + (hi - med))
}

pub fn pointwise_bands<T: Scalar>(ensemble: &BandEnsemble<T>, probs: (f64, f64)) -> Result<ConfidenceBands<T>> {
    check_probs(probs)?;
    let usable: Vec<&SpectrumEstimate<T>> = ensemble.usable().collect();
    if usable.len() < 2 {
        return Err(Error::TooFewReplicates {
            usable: usable.len(),
            needed: 2,
        });
    }
    let len = ensemble.grid().len();
    let empty = || CurveBand {
        median: Vec::with_capacity(len),
        lower: Vec::with_capacity(len),
        upper: Vec::with_capacity(len),
    };
    let (mut co, mut quad, mut amplitude, mut phase) = (empty(), empty(), empty(), empty());
    let mut branch_cut = Vec::with_capacity(len);
    let push = |band: &mut CurveBand<T>, (lo, med, hi): (T, T, T)| {
        band.lower.push(lo);
        band.median.push(med);
        band.upper.push(hi);
    };
    for i in 0..len {
        push(&mut co, linear_summary(usable.iter().map(|r| r.co[i]).collect(), probs));
        push(&mut quad, linear_summary(usable.iter().map(|r| r.quad[i]).collect(), probs));
        push(
            &mut amplitude,
            linear_summary(usable.iter().map(|r| r.amplitude[i]).collect(), probs),
        );
        let angles: Vec<T> = usable.iter().map(|r| r.phase[i]).collect();
        let summary = circular_summary(&angles, probs);
        branch_cut.push(summary.0 <= -T::PI() || summary.2 > T::PI());
        push(&mut phase, summary);
    }
    Ok(ConfidenceBands {
        probs,
        omega: ensemble.grid().values().to_vec(),
        co,
        quad,
        amplitude,
        phase,
        branch_cut,
        used: usable.len(),
        excluded: ensemble.replicates.len() - usable.len(),
    })
}

/// `(lower, median, upper)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lower: T,
    pub median: T,
    pub upper: T,
}

impl<T> From<(T, T, T)> for Interval<T> {
    fn from((lower, median, upper): (T, T, T)) -> Self {
        Self { lower, median, upper }
    }
}

/// The replicate cloud of `f̂(ω)` at one frequency with Cartesian and polar
/// quantile summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSummary<T> {
    pub omega: T,
    pub index: usize,
    pub points: Vec<Complex<T>>,
    pub re: Interval<T>,
    pub im: Interval<T>,
    pub modulus: Interval<T>,
    pub argument: Interval<T>,
}

impl<T: Scalar> ComplexSummary<T> {
    pub fn cartesian_median(&self) -> Complex<T> {
        Complex::new(self.re.median, self.im.median)
    }

    pub fn polar_median(&self) -> Complex<T> {
        Complex::from_polar(self.modulus.median, self.argument.median)
    }
}

pub fn complex_summary_at_frequency<T: Scalar>(
    ensemble: &BandEnsemble<T>,
    omega: T,
    probs: (f64, f64),
) -> Result<ComplexSummary<T>> {
    check_probs(probs)?;
    let index = ensemble
        .grid()
        .index_of(omega)
        .ok_or(Error::FrequencyNotOnGrid(omega.as_f64()))?;
    let points: Vec<Complex<T>> = ensemble.usable().map(|r| r.values[index]).collect();
    if points.len() < 2 {
        return Err(Error::TooFewReplicates {
            usable: points.len(),
            needed: 2,
        });
    }
    let args: Vec<T> = points.iter().map(|z| crate::spectra::principal_arg(*z)).collect();
    Ok(ComplexSummary {
        omega: ensemble.grid().values()[index],
        index,
        re: linear_summary(points.iter().map(|z| z.re).collect(), probs).into(),
        im: linear_summary(points.iter().map(|z| z.im).collect(), probs).into(),
        modulus: linear_summary(points.iter().map(|z| z.norm()).collect(), probs).into(),
        argument: circular_summary(&args, probs).into(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SpectrumKind;

    fn meta() -> SpectrumMeta<f64> {
        SpectrumMeta {
            kind: SpectrumKind::Global,
            pair: (0, 1),
            truncation: 2,
            window: LagWindow::TukeyHanning,
            point: None,
            bandwidth: None,
            order: None,
        }
    }

    fn spectrum(fwd: [f64; 3], refl: [f64; 2], grid: &FrequencyGrid<f64>) -> SpectrumEstimate<f64> {
        let cs = CorrelationSet {
            forward: fwd.to_vec(),
            reflected: refl.to_vec(),
        };
        synthesize(&cs, LagWindow::TukeyHanning, grid, meta(), true).unwrap()
    }

    #[test]
    fn identical_replicates_have_zero_width() {
        let grid = FrequencyGrid::uniform(33).unwrap();
        let s = spectrum([0.3, 0.2, -0.1], [0.1, 0.05], &grid);
        let e = BandEnsemble::new(vec![s.clone(), s.clone(), s], EnsembleSource::Model, 0).unwrap();
        let b = pointwise_bands(&e, (0.05, 0.95)).unwrap();
        for band in [&b.co, &b.quad, &b.amplitude, &b.phase] {
            assert!((0..grid.len()).all(|i| band.width(i) == 0.0));
        }
    }

    #[test]
    fn bands_match_sorted_order_statistics() {
        let grid = FrequencyGrid::uniform(17).unwrap();
        let reps: Vec<_> = (0..10)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 0.5;
                spectrum([x, 0.1 * x, 0.0], [0.2 * x, 0.0], &grid)
            })
            .collect();
        let e = BandEnsemble::new(reps.clone(), EnsembleSource::Model, 0).unwrap();
        let b = pointwise_bands(&e, (0.1, 0.8)).unwrap();
        for i in 0..grid.len() {
            let mut co: Vec<f64> = reps.iter().map(|r| r.co[i]).collect();
            co.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // ceil(0.1·10) = 1, ceil(0.5·10) = 5, ceil(0.8·10) = 8
            assert_eq!(b.co.lower[i], co[0]);
            assert_eq!(b.co.median[i], co[4]);
            assert_eq!(b.co.upper[i], co[7]);
        }
    }

    #[test]
    fn wider_probabilities_never_narrow() {
        let grid = FrequencyGrid::uniform(65).unwrap();
        let reps: Vec<_> = (0..40)
            .map(|i| {
                let x = ((i * 7919) % 101) as f64 / 101.0 - 0.5;
                spectrum([x, 0.3 * x, -0.2 * x], [0.5 * x, 0.1], &grid)
            })
            .collect();
        let e = BandEnsemble::new(reps, EnsembleSource::Model, 0).unwrap();
        let narrow = pointwise_bands(&e, (0.05, 0.95)).unwrap();
        let wide = pointwise_bands(&e, (0.01, 0.99)).unwrap();
        for (n, w) in [
            (&narrow.co, &wide.co),
            (&narrow.quad, &wide.quad),
            (&narrow.amplitude, &wide.amplitude),
            (&narrow.phase, &wide.phase),
        ] {
            for i in 0..grid.len() {
                assert!(w.lower[i] <= n.lower[i] && w.upper[i] >= n.upper[i]);
                assert!(n.lower[i] <= n.median[i] && n.median[i] <= n.upper[i]);
            }
        }
    }

    #[test]
    fn too_few_and_bad_probs() {
        let grid = FrequencyGrid::uniform(5).unwrap();
        let mut a = spectrum([0.1, 0.0, 0.0], [0.0, 0.0], &grid);
        let b = a.clone();
        a.converged = false;
        let e = BandEnsemble::new(vec![a, b], EnsembleSource::Model, 0).unwrap();
        assert!(matches!(
            pointwise_bands(&e, (0.05, 0.95)),
            Err(Error::TooFewReplicates { usable: 1, .. })
        ));
        assert!(pointwise_bands(&e, (0.9, 0.1)).is_err());
        assert!(BandEnsemble::<f64>::new(vec![], EnsembleSource::Model, 0).is_err());
    }

    #[test]
    fn phase_band_across_branch_cut() {
        use std::f64::consts::PI;
        let grid = FrequencyGrid::uniform(3).unwrap();
        let base = spectrum([0.1, 0.0, 0.0], [0.0, 0.0], &grid);
        let reps: Vec<_> = [PI - 0.05, -PI + 0.05, PI - 0.02, -PI + 0.1]
            .iter()
            .map(|&a| {
                let mut s = base.clone();
                s.phase = vec![a; 3];
                s
            })
            .collect();
        let e = BandEnsemble::new(reps, EnsembleSource::Model, 0).unwrap();
        let b = pointwise_bands(&e, (0.05, 0.95)).unwrap();
        assert!(b.branch_cut[0]);
        let width = b.phase.width(0);
        assert!(width < 0.2, "{width}");
        assert!(b.phase.lower[0] <= b.phase.median[0] && b.phase.median[0] <= b.phase.upper[0]);
    }

    #[test]
    fn complex_summary_of_equal_values() {
        let grid = FrequencyGrid::uniform(11).unwrap();
        let s = spectrum([0.3, 0.2, 0.1], [-0.1, 0.05], &grid);
        let z = s.values[4];
        let e = BandEnsemble::new(vec![s.clone(), s.clone(), s], EnsembleSource::Model, 0).unwrap();
        let c = complex_summary_at_frequency(&e, grid.values()[4], (0.05, 0.95)).unwrap();
        assert_eq!(c.cartesian_median(), z);
        assert!((c.polar_median() - z).norm() < 1e-15);
        assert!(matches!(
            complex_summary_at_frequency(&e, 0.1234, (0.05, 0.95)),
            Err(Error::FrequencyNotOnGrid(_))
        ));
    }

    #[test]
    fn bootstrap_edge_cases() {
        let cols = vec![(0..20).map(f64::from).collect::<Vec<_>>(), (100..120).map(f64::from).collect()];
        let z = PseudoNormalizedSeries::from_columns(vec!["a".into(), "b".into()], cols).unwrap();
        for rep in block_bootstrap(&z, 20, 5, 1).unwrap() {
            let a = rep.column(0);
            let s = a[0] as usize;
            assert!((0..20).all(|t| a[t] == ((s + t) % 20) as f64));
            assert!((0..20).all(|t| rep.column(1)[t] == a[t] + 100.0));
        }
        for rep in block_bootstrap(&z, 1, 5, 2).unwrap() {
            assert!((0..20).all(|t| rep.column(1)[t] == rep.column(0)[t] + 100.0));
        }
        assert!(block_bootstrap(&z, 0, 2, 0).is_err());
        assert!(block_bootstrap(&z, 21, 2, 0).is_err());
        assert_eq!(block_bootstrap(&z, 7, 3, 9).unwrap(), block_bootstrap(&z, 7, 3, 9).unwrap());
    }
}
