//! Seeded generators for the reference models: bivariate Gaussian white noise,
//! the shared-noise bivariate cosine, and the regime-switching local
//! trigonometric model.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::timeseries::MultivariateSeries;

/// Random stream for replicate `index` of a run seeded with `master`.
///
/// Streams are addressed by counter, so replicate `i` sees the same numbers no
/// matter which thread generates it or in what order.
pub fn replicate_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineParams {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl CosineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "cosine frequency {} outside (0, 0.5)",
                self.alpha
            )));
        }
        if !(self.sigma >= 0.0) || !self.theta.is_finite() {
            return Err(Error::InvalidParameter("cosine noise sd must be non-negative".into()));
        }
        Ok(())
    }
}

/// Regime-switching local cosines. Per time point one component `i` is drawn
/// with probability `probs[i]`; both coordinates then follow component `i`,
/// the second shifted by `theta[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrigParams {
    pub levels: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub amplitude_alt: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub probs: Vec<f64>,
}

impl LocalTrigParams {
    /// Four components with levels (−2, −1, 0, 1) and the given second-coordinate
    /// phase adjustments.
    ///
    /// The selection probabilities (0.05, 0.28, 0.33, 0.33) are given to two
    /// decimals and sum to 0.99; they are rescaled to sum to one.
    pub fn four_regime(theta: [f64; 4]) -> Self {
        let raw = [0.05, 0.28, 0.33, 0.33];
        let total: f64 = raw.iter().sum();
        Self {
            levels: vec![-2.0, -1.0, 0.0, 1.0],
            amplitude: vec![1.0, 0.5, 0.3, 0.5],
            amplitude_alt: vec![0.5, 0.2, 0.2, 0.6],
            alpha: vec![0.267, 0.091, 0.431, 0.270],
            theta: theta.to_vec(),
            probs: raw.iter().map(|p| p / total).collect(),
        }
    }

    /// Common phase adjustment π/3 for every component.
    pub fn common_phase() -> Self {
        Self::four_regime([PI / 3.0; 4])
    }

    /// Individual phase adjustments (π/3, π/4, 0, π/2).
    pub fn individual_phase() -> Self {
        Self::four_regime([PI / 3.0, PI / 4.0, 0.0, PI / 2.0])
    }

    pub fn components(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.levels.len();
        if r == 0 {
            return Err(Error::InvalidParameter("need at least one component".into()));
        }
        let lens = [
            self.amplitude.len(),
            self.amplitude_alt.len(),
            self.alpha.len(),
            self.theta.len(),
            self.probs.len(),
        ];
        if lens.iter().any(|&l| l != r) {
            return Err(Error::InvalidParameter(format!(
                "all component vectors must have length {r}"
            )));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && *a < 0.5)) {
            return Err(Error::InvalidParameter(
                "component frequencies must lie in (0, 0.5)".into(),
            ));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("probabilities must be non-negative".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

/// A generative model with its parameters, serializable in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    GaussianWn { rho: f64 },
    Cosine(CosineParams),
    LocalTrig(LocalTrigParams),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::GaussianWn { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::RhoOutOfRange(*rho));
                }
                Ok(())
            }
            ModelSpec::Cosine(p) => p.validate(),
            ModelSpec::LocalTrig(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::GaussianWn { .. } => "gaussian-wn",
            ModelSpec::Cosine(_) => "cosine",
            ModelSpec::LocalTrig(_) => "local-trig",
        }
    }
}

/// Anything that can produce a realisation from a random stream.
pub trait Simulator: Sync {
    fn simulate<T: Scalar>(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<MultivariateSeries<T>>;
}

impl Simulator for ModelSpec {
    fn simulate<T: Scalar>(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<MultivariateSeries<T>> {
        self.validate()?;
        let (a, b) = match self {
            ModelSpec::GaussianWn { rho } => gaussian_wn_columns(n, *rho, rng),
            ModelSpec::Cosine(p) => cosine_columns(n, p, rng),
            ModelSpec::LocalTrig(p) => local_trig_columns(n, p, rng).0,
        };
        MultivariateSeries::new(
            vec!["Y1".into(), "Y2".into()],
            vec![cast(a), cast(b)],
            self.name(),
        )
    }
}

fn cast<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

fn gaussian_wn_columns(n: usize, rho: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let c = (1.0 - rho * rho).sqrt();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        a.push(x);
        b.push(rho * x + c * y);
    }
    (a, b)
}

fn cosine_columns(n: usize, p: &CosineParams, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let phi = rng.random_range(0.0..TAU);
    let noise = Normal::new(0.0, p.sigma).expect("validated sd");
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for t in 1..=n {
        let arg = TAU * p.alpha * t as f64 + phi;
        let w = if p.sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        a.push(arg.cos() + w);
        b.push((arg + p.theta).cos() + w);
    }
    (a, b)
}

type Columns = (Vec<f64>, Vec<f64>);

fn local_trig_columns(n: usize, p: &LocalTrigParams, rng: &mut ChaCha8Rng) -> (Columns, Vec<usize>) {
    let phases: Vec<f64> = (0..p.components()).map(|_| rng.random_range(0.0..TAU)).collect();
    let pick = WeightedIndex::new(&p.probs).expect("validated probabilities");
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    for t in 1..=n {
        let i = pick.sample(rng);
        let lo = p.amplitude[i].min(p.amplitude_alt[i]);
        let hi = p.amplitude[i].max(p.amplitude_alt[i]);
        let amp = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let arg = TAU * p.alpha[i] * t as f64 + phases[i];
        a.push(p.levels[i] + amp * arg.cos());
        b.push(p.levels[i] + amp * (arg + p.theta[i]).cos());
        regimes.push(i);
    }
    ((a, b), regimes)
}

/// I.i.d. bivariate normal with standard marginals and correlation `rho`.
pub fn gaussian_wn<T: Scalar>(n: usize, rho: f64, seed: u64) -> Result<MultivariateSeries<T>> {
    ModelSpec::GaussianWn { rho }.simulate(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `Y1 = cos(2παt + φ) + w_t`, `Y2 = cos(2παt + φ + θ) + w_t` with the same
/// noise draw in both coordinates and `φ` uniform per call.
pub fn bivariate_cosine<T: Scalar>(
    n: usize,
    params: &CosineParams,
    seed: u64,
) -> Result<MultivariateSeries<T>> {
    ModelSpec::Cosine(params.clone()).simulate(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn local_trigonometric<T: Scalar>(
    n: usize,
    params: &LocalTrigParams,
    seed: u64,
) -> Result<MultivariateSeries<T>> {
    ModelSpec::LocalTrig(params.clone()).simulate(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Realisation together with the drawn regime index per time point.
pub fn local_trigonometric_with_regimes(
    n: usize,
    params: &LocalTrigParams,
    seed: u64,
) -> Result<(MultivariateSeries<f64>, Vec<usize>)> {
    params.validate()?;
    let ((a, b), regimes) = local_trig_columns(n, params, &mut ChaCha8Rng::seed_from_u64(seed));
    let s = MultivariateSeries::new(vec!["Y1".into(), "Y2".into()], vec![a, b], "local-trig")?;
    Ok((s, regimes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{pearson, variance};

    #[test]
    fn gaussian_wn_correlation() {
        let s: MultivariateSeries<f64> = gaussian_wn(1859, 0.35, 1).unwrap();
        let r = pearson(s.column(0), s.column(1));
        assert!((r - 0.35).abs() < 0.07);
        let z: MultivariateSeries<f64> = gaussian_wn(4000, 0.0, 2).unwrap();
        assert!(pearson(z.column(0), z.column(1)).abs() < 3.0 / (4000f64).sqrt());
        assert!(gaussian_wn::<f64>(10, 1.0, 0).is_err());
    }

    #[test]
    fn gaussian_wn_marginal_variance() {
        let n = 20_000;
        let s: MultivariateSeries<f64> = gaussian_wn(n, -0.6, 3).unwrap();
        for k in 0..2 {
            assert!((variance(s.column(k)) - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn seeding_is_reproducible_and_streams_differ() {
        let a: MultivariateSeries<f64> = gaussian_wn(50, 0.2, 9).unwrap();
        let b: MultivariateSeries<f64> = gaussian_wn(50, 0.2, 9).unwrap();
        assert_eq!(a, b);
        let m = ModelSpec::GaussianWn { rho: 0.2 };
        let r0: MultivariateSeries<f64> = m.simulate(50, &mut replicate_rng(9, 0)).unwrap();
        let r1: MultivariateSeries<f64> = m.simulate(50, &mut replicate_rng(9, 1)).unwrap();
        let r1b: MultivariateSeries<f64> = m.simulate(50, &mut replicate_rng(9, 1)).unwrap();
        assert_ne!(r0, r1);
        assert_eq!(r1, r1b);
    }

    #[test]
    fn noiseless_cosine() {
        let p = CosineParams {
            alpha: 0.302,
            theta: 0.0,
            sigma: 0.0,
        };
        let s: MultivariateSeries<f64> = bivariate_cosine(500, &p, 4).unwrap();
        assert_eq!(s.column(0), s.column(1));
        assert!(s.column(0).iter().all(|y| y.abs() <= 1.0));
    }

    #[test]
    fn cosine_shares_noise() {
        let p = CosineParams {
            alpha: 0.302,
            theta: PI / 3.0,
            sigma: 0.75,
        };
        let s: MultivariateSeries<f64> = bivariate_cosine(1859, &p, 5).unwrap();
        // Y1 − Y2 is noise free: |cos(a) − cos(a + θ)| ≤ 2 sin(θ/2) = 1
        for (a, b) in s.column(0).iter().zip(s.column(1)) {
            assert!((a - b).abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn single_component_local_trig_is_deterministic_cosine() {
        let p = LocalTrigParams {
            levels: vec![0.5],
            amplitude: vec![0.7],
            amplitude_alt: vec![0.7],
            alpha: vec![0.1],
            theta: vec![0.0],
            probs: vec![1.0],
        };
        let s: MultivariateSeries<f64> = local_trigonometric(300, &p, 6).unwrap();
        assert_eq!(s.column(0), s.column(1));
        assert!(s.column(0).iter().all(|y| (y - 0.5).abs() <= 0.7 + 1e-12));
    }

    #[test]
    fn local_trig_regimes_and_bounds() {
        let p = LocalTrigParams::individual_phase();
        let n = 20_000;
        let (s, regimes) = local_trigonometric_with_regimes(n, &p, 7).unwrap();
        for i in 0..4 {
            let frac = regimes.iter().filter(|&&r| r == i).count() as f64 / n as f64;
            let tol = 3.0 * (p.probs[i] * (1.0 - p.probs[i]) / n as f64).sqrt();
            assert!((frac - p.probs[i]).abs() < tol, "component {i}: {frac}");
        }
        for (t, &i) in regimes.iter().enumerate() {
            let amax = p.amplitude[i].max(p.amplitude_alt[i]);
            assert!((s.column(0)[t] - p.levels[i]).abs() <= amax + 1e-12);
            assert!((s.column(1)[t] - p.levels[i]).abs() <= amax + 1e-12);
        }
    }

    #[test]
    fn local_trig_rejects_bad_probabilities() {
        let mut p = LocalTrigParams::common_phase();
        p.probs = vec![0.05, 0.28, 0.33, 0.33];
        assert!(local_trigonometric::<f64>(10, &p, 0).is_err());
    }
}
