//! Lag-window synthesis of m-truncated cross-spectra and the derived co-,
//! quadrature-, amplitude- and phase-curves.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_gaussian::{local_auto_correlations, Bandwidth, LocalCorrelationSet, Order, Point};
use crate::scalar::{sin_cos_cycles, Scalar};
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LagWindow {
    #[default]
    TukeyHanning,
    /// unit weights up to the truncation lag
    Rectangular,
}

impl LagWindow {
    pub fn weight<T: Scalar>(self, h: usize, m: usize) -> T {
        match self {
            LagWindow::TukeyHanning => tukey_hanning(h, m),
            LagWindow::Rectangular => {
                if h <= m {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LagWindow::TukeyHanning => "tukey-hanning",
            LagWindow::Rectangular => "rectangular",
        }
    }
}

impl std::str::FromStr for LagWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tukey-hanning" | "tukey" => Ok(LagWindow::TukeyHanning),
            "rectangular" | "truncated" => Ok(LagWindow::Rectangular),
            other => Err(Error::InvalidParameter(format!("unknown lag window `{other}`"))),
        }
    }
}

/// `½(1 + cos(πh/m))` for `|h| ≤ m`, zero beyond.
pub fn tukey_hanning<T: Scalar>(h: usize, m: usize) -> T {
    assert!(m >= 1, "truncation must be positive");
    if h > m {
        return T::zero();
    }
    // cos(πh/m) = cos 2π(h/2m)
    let (_, c) = sin_cos_cycles(T::from_usize_lossy(h) / T::from_usize_lossy(2 * m));
    T::lit(0.5) * (T::one() + c)
}

/// Increasing frequencies in cycles per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid<T> {
    values: Vec<T>,
}

impl<T: Scalar> FrequencyGrid<T> {
    /// `count` equispaced points on `[0, ½]`, endpoints included.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter("frequency grid needs at least 2 points".into()));
        }
        let last = T::from_usize_lossy(count - 1);
        let values = (0..count)
            .map(|j| T::lit(0.5) * T::from_usize_lossy(j) / last)
            .collect();
        Ok(Self { values })
    }

    /// `j / count`, `j = 0..count`: one full period, used for orthogonality checks.
    pub fn full_period(count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        let c = T::from_usize_lossy(count);
        Ok(Self {
            values: (0..count).map(|j| T::from_usize_lossy(j) / c).collect(),
        })
    }

    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        if values.iter().any(|w| !(*w >= T::zero() && *w < T::one())) {
            return Err(Error::InvalidParameter("frequencies must lie in [0, 1)".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("frequencies must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of `omega` on the grid (within `1e-9`).
    pub fn index_of(&self, omega: T) -> Option<usize> {
        let tol = T::lit(1e-9);
        self.values.iter().position(|&w| (w - omega).abs() <= tol)
    }

    pub fn nearest_index(&self, omega: T) -> usize {
        let mut best = 0;
        for (i, &w) in self.values.iter().enumerate() {
            if (w - omega).abs() < (self.values[best] - omega).abs() {
                best = i;
            }
        }
        best
    }
}

impl<T: Scalar> Default for FrequencyGrid<T> {
    fn default() -> Self {
        Self::uniform(1024).expect("default grid")
    }
}

/// Correlations entering the folding formula: `forward[h]` for `h = 0..=m`
/// (pair order kℓ at `v`) and `reflected[h-1]` for `h = 1..=m` (order ℓk at
/// the reflected point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet<T> {
    pub forward: Vec<T>,
    pub reflected: Vec<T>,
}

impl<T: Scalar> CorrelationSet<T> {
    pub fn truncation(&self) -> usize {
        self.reflected.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.reflected.len();
        if m == 0 {
            return Err(Error::MissingLag(1));
        }
        if self.forward.len() != m + 1 {
            return Err(Error::MissingLag(self.forward.len().min(m + 1)));
        }
        Ok(())
    }

    /// The set describing the pair `(ℓ, k)` at the reflected point.
    pub fn swapped(&self) -> Self {
        let mut forward = vec![self.forward[0]];
        forward.extend_from_slice(&self.reflected);
        Self {
            forward,
            reflected: self.forward[1..].to_vec(),
        }
    }

    /// `ρ(0) + Σ_{h=1}^{m} λ(h) [ρ̆(h) e^{+2πiωh} + ρ(h) e^{−2πiωh}]`
    pub fn evaluate(&self, window: LagWindow, omega: T) -> Complex<T> {
        let m = self.truncation();
        let mut re = self.forward[0];
        let mut im = T::zero();
        for h in 1..=m {
            let lam: T = window.weight(h, m);
            let (s, c) = sin_cos_cycles(omega * T::from_usize_lossy(h));
            let (fwd, refl) = (self.forward[h], self.reflected[h - 1]);
            re += lam * (refl + fwd) * c;
            im += lam * (refl - fwd) * s;
        }
        // drop negative zero so the phase of a real value is 0 or π
        Complex::new(re, im + T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Local,
    Global,
}

/// Settings the estimate was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta<T> {
    pub kind: SpectrumKind,
    pub pair: (usize, usize),
    pub truncation: usize,
    pub window: LagWindow,
    pub point: Option<Point<T>>,
    pub bandwidth: Option<Bandwidth<T>>,
    pub order: Option<Order>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate<T> {
    pub grid: FrequencyGrid<T>,
    pub values: Vec<Complex<T>>,
    pub co: Vec<T>,
    pub quad: Vec<T>,
    pub amplitude: Vec<T>,
    pub phase: Vec<T>,
    pub meta: SpectrumMeta<T>,
    /// every underlying fit converged
    pub converged: bool,
}

/// `Arg` mapped into (−π, π].
pub fn principal_arg<T: Scalar>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a <= -T::PI() {
        a + T::TAU()
    } else {
        a
    }
}

pub fn synthesize<T: Scalar>(
    corrs: &CorrelationSet<T>,
    window: LagWindow,
    grid: &FrequencyGrid<T>,
    meta: SpectrumMeta<T>,
    converged: bool,
) -> Result<SpectrumEstimate<T>> {
    corrs.validate()?;
    let values: Vec<Complex<T>> = grid.values().iter().map(|&w| corrs.evaluate(window, w)).collect();
    Ok(SpectrumEstimate {
        grid: grid.clone(),
        co: values.iter().map(|z| z.re).collect(),
        quad: values.iter().map(|z| T::zero() - z.im).collect(),
        amplitude: values.iter().map(|z| z.re.hypot(z.im)).collect(),
        phase: values.iter().map(|&z| principal_arg(z)).collect(),
        values,
        meta,
        converged,
    })
}

pub fn local_cross_spectrum<T: Scalar>(
    corrs: &LocalCorrelationSet<T>,
    window: LagWindow,
    grid: &FrequencyGrid<T>,
    pair: (usize, usize),
) -> Result<SpectrumEstimate<T>> {
    let meta = SpectrumMeta {
        kind: SpectrumKind::Local,
        pair,
        truncation: corrs.truncation(),
        window,
        point: Some(corrs.point),
        bandwidth: Some(corrs.bandwidth),
        order: Some(corrs.order),
    };
    synthesize(&corrs.correlations(), window, grid, meta, corrs.all_converged())
}

/// Local Gaussian auto-spectrum of one column at `v`.
#[allow(clippy::too_many_arguments)]
pub fn local_auto_spectrum<T: Scalar>(
    z: &[T],
    v: Point<T>,
    b: Bandwidth<T>,
    m: usize,
    order: Order,
    window: LagWindow,
    grid: &FrequencyGrid<T>,
    column: usize,
) -> Result<SpectrumEstimate<T>> {
    let corrs = local_auto_correlations(z, v, b, m, order)?;
    local_cross_spectrum(&corrs, window, grid, (column, column))
}

/// Ordinary lag-`h` Pearson correlations of the pair sets, in the layout of
/// [`CorrelationSet`].
pub fn global_correlations<T: Scalar>(zk: &[T], zl: &[T], m: usize) -> Result<CorrelationSet<T>> {
    let n = zk.len();
    if zl.len() != n {
        return Err(Error::LengthMismatch(n, zl.len()));
    }
    if m == 0 || m + 2 > n {
        return Err(Error::LagOutOfRange { lag: m, n });
    }
    let forward = (0..=m).map(|h| pearson(&zk[h..], &zl[..n - h])).collect();
    let reflected = (1..=m).map(|h| pearson(&zl[h..], &zk[..n - h])).collect();
    Ok(CorrelationSet { forward, reflected })
}

pub fn global_cross_spectrum<T: Scalar>(
    zk: &[T],
    zl: &[T],
    m: usize,
    window: LagWindow,
    grid: &FrequencyGrid<T>,
    pair: (usize, usize),
) -> Result<SpectrumEstimate<T>> {
    let corrs = global_correlations(zk, zl, m)?;
    let meta = SpectrumMeta {
        kind: SpectrumKind::Global,
        pair,
        truncation: m,
        window,
        point: None,
        bandwidth: None,
        order: None,
    };
    synthesize(&corrs, window, grid, meta, true)
}

/// Checks `f̂_{kℓ|v}(ω) = conj f̂_{ℓk|v̆}(ω)` on the grid to `1e-12`, rebuilding
/// the swapped spectrum from the same correlations.
pub fn conjugate_fold_check<T: Scalar>(corrs: &CorrelationSet<T>, window: LagWindow, grid: &FrequencyGrid<T>) -> bool {
    if corrs.validate().is_err() {
        return false;
    }
    let swapped = corrs.swapped();
    let tol = T::lit(1e-12);
    grid.values().iter().all(|&w| {
        let a = corrs.evaluate(window, w);
        let b = swapped.evaluate(window, w).conj();
        (a - b).norm() <= tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(forward: Vec<f64>, reflected: Vec<f64>) -> CorrelationSet<f64> {
        CorrelationSet { forward, reflected }
    }

    fn meta() -> SpectrumMeta<f64> {
        SpectrumMeta {
            kind: SpectrumKind::Global,
            pair: (0, 1),
            truncation: 10,
            window: LagWindow::TukeyHanning,
            point: None,
            bandwidth: None,
            order: None,
        }
    }

    fn random_set(rng: &mut ChaCha8Rng, m: usize) -> CorrelationSet<f64> {
        set(
            (0..=m).map(|_| rng.random_range(-0.99..0.99)).collect(),
            (0..m).map(|_| rng.random_range(-0.99..0.99)).collect(),
        )
    }

    #[test]
    fn tukey_hanning_values() {
        assert_eq!(tukey_hanning::<f64>(0, 10), 1.0);
        assert_eq!(tukey_hanning::<f64>(10, 10), 0.0);
        assert_eq!(tukey_hanning::<f64>(5, 10), 0.5);
        assert_eq!(tukey_hanning::<f64>(11, 10), 0.0);
    }

    #[test]
    fn unit_lag_zero_gives_flat_spectrum() {
        let mut fwd = vec![0.0; 11];
        fwd[0] = 1.0;
        let s = synthesize(&set(fwd, vec![0.0; 10]), LagWindow::TukeyHanning, &FrequencyGrid::default(), meta(), true)
            .unwrap();
        assert!(s.co.iter().all(|&c| c == 1.0));
        assert!(s.quad.iter().all(|&q| q == 0.0));
        assert!(s.phase.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_lag_term() {
        let c = 0.4;
        let mut fwd = vec![0.0; 11];
        fwd[1] = c;
        let cs = set(fwd, vec![0.0; 10]);
        let lam: f64 = tukey_hanning(1, 10);
        for &w in &[0.0, 0.1, 0.302, 0.5] {
            let z = cs.evaluate(LagWindow::TukeyHanning, w);
            let expected = Complex::from_polar(lam * c, -std::f64::consts::TAU * w);
            assert!((z - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn missing_lag_is_an_error() {
        let bad = set(vec![0.1; 5], vec![0.1; 5]);
        let err = synthesize(&bad, LagWindow::TukeyHanning, &FrequencyGrid::default(), meta(), true);
        assert!(matches!(err, Err(Error::MissingLag(_))));
    }

    #[test]
    fn derived_curve_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = FrequencyGrid::default();
        for _ in 0..20 {
            let cs = random_set(&mut rng, 10);
            let s = synthesize(&cs, LagWindow::TukeyHanning, &grid, meta(), true).unwrap();
            assert_eq!(s.quad[0], 0.0);
            assert_eq!(*s.quad.last().unwrap(), 0.0);
            for i in 0..grid.len() {
                let (a, p) = (s.amplitude[i], s.phase[i]);
                assert!((a * p.cos() - s.co[i]).abs() <= 1e-12);
                assert!((a * p.sin() + s.quad[i]).abs() <= 1e-12);
                assert!(a >= s.co[i].abs() && a >= s.quad[i].abs());
                assert!(p > -std::f64::consts::PI && p <= std::f64::consts::PI);
                if s.co[i].abs() > 1e-3 {
                    assert!((-s.quad[i] / s.co[i] - p.tan()).abs() <= 1e-10 * (1.0 + p.tan().abs()));
                }
            }
        }
    }

    #[test]
    fn full_period_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 10;
        let grid = FrequencyGrid::full_period(2 * m + 5).unwrap();
        for _ in 0..20 {
            let cs = random_set(&mut rng, m);
            let s = synthesize(&cs, LagWindow::TukeyHanning, &grid, meta(), true).unwrap();
            let n = grid.len() as f64;
            let mean_co: f64 = s.co.iter().sum::<f64>() / n;
            let mean_quad: f64 = s.quad.iter().sum::<f64>() / n;
            assert!((mean_co - cs.forward[0]).abs() < 1e-14);
            assert!(mean_quad.abs() < 1e-14);
        }
    }

    #[test]
    fn fold_check_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let grid = FrequencyGrid::default();
        for _ in 0..100 {
            let m = rng.random_range(1..15);
            assert!(conjugate_fold_check(&random_set(&mut rng, m), LagWindow::TukeyHanning, &grid));
        }
        let sym = set(vec![0.3, 0.2, 0.1], vec![0.2, 0.1]);
        let s = synthesize(&sym, LagWindow::TukeyHanning, &grid, meta(), true).unwrap();
        assert!(s.quad.iter().all(|&q| q == 0.0));
        assert!(conjugate_fold_check(&sym, LagWindow::TukeyHanning, &grid));
    }

    #[test]
    fn global_spectrum_of_independent_noise_is_flat_zero() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = global_cross_spectrum(&a, &b, 10, LagWindow::TukeyHanning, &FrequencyGrid::uniform(64).unwrap(), (0, 1))
            .unwrap();
        assert!(s.co.iter().all(|c| c.abs() < 0.25));
        assert!(s.quad.iter().all(|c| c.abs() < 0.25));
    }

    #[test]
    fn grid_construction() {
        let g = FrequencyGrid::<f64>::default();
        assert_eq!(g.len(), 1024);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[1023], 0.5);
        assert!(FrequencyGrid::new(vec![0.1, 0.1]).is_err());
        assert!(FrequencyGrid::new(vec![0.1, 1.2]).is_err());
        assert_eq!(g.index_of(0.5), Some(1023));
        assert_eq!(g.index_of(0.3), None);
    }
}
