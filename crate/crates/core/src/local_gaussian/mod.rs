//! Local Gaussian correlations via kernel-weighted local likelihood.

mod fit;
pub(crate) mod objective;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use fit::{
    fit_local_gaussian, fit_local_gaussian_with, local_auto_correlations, local_cross_correlations,
    FitOptions,
};
pub use objective::{kernel_integral, kernel_weight, log_density, penalty, penalty_gradient, penalty_hessian};

/// Point on the pseudo-normal scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub v1: T,
    pub v2: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(v1: T, v2: T) -> Self {
        Self { v1, v2 }
    }

    /// Diagonal reflection `(v2, v1)`.
    pub fn reflect(self) -> Self {
        Self {
            v1: self.v2,
            v2: self.v1,
        }
    }
}

pub fn reflect<T: Scalar>(v: Point<T>) -> Point<T> {
    v.reflect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth<T> {
    pub b1: T,
    pub b2: T,
}

impl<T: Scalar> Bandwidth<T> {
    pub fn new(b1: T, b2: T) -> Result<Self> {
        if !(b1 > T::zero() && b2 > T::zero() && b1.is_finite() && b2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got ({b1}, {b2})"
            )));
        }
        Ok(Self { b1, b2 })
    }

    pub fn uniform(b: T) -> Result<Self> {
        Self::new(b, b)
    }

    pub fn swapped(self) -> Self {
        Self {
            b1: self.b2,
            b2: self.b1,
        }
    }
}

/// Number of free parameters in the local Gaussian approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    One,
    Five,
}

impl Order {
    pub fn dim(self) -> usize {
        match self {
            Order::One => 1,
            Order::Five => 5,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = String;

    fn try_from(p: u8) -> Result<Self, String> {
        match p {
            1 => Ok(Order::One),
            5 => Ok(Order::Five),
            other => Err(format!("approximation order must be 1 or 5, got {other}")),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.dim() as u8
    }
}

/// Parameters of the approximating bivariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "p")]
pub enum GaussianParam<T> {
    /// standard marginals, free correlation
    #[serde(rename = "1")]
    One { rho: T },
    #[serde(rename = "5")]
    Five {
        mu1: T,
        mu2: T,
        sigma1: T,
        sigma2: T,
        rho: T,
    },
}

impl<T: Scalar> GaussianParam<T> {
    pub fn order(&self) -> Order {
        match self {
            GaussianParam::One { .. } => Order::One,
            GaussianParam::Five { .. } => Order::Five,
        }
    }

    pub fn rho(&self) -> T {
        match *self {
            GaussianParam::One { rho } | GaussianParam::Five { rho, .. } => rho,
        }
    }

    /// `(μ1, μ2, σ1, σ2, ρ)`, with the fixed values for the one-parameter case.
    pub fn full(&self) -> [T; 5] {
        match *self {
            GaussianParam::One { rho } => [T::zero(), T::zero(), T::one(), T::one(), rho],
            GaussianParam::Five {
                mu1,
                mu2,
                sigma1,
                sigma2,
                rho,
            } => [mu1, mu2, sigma1, sigma2, rho],
        }
    }

    /// Free parameters as a vector.
    pub fn free(&self) -> Vec<T> {
        match self.order() {
            Order::One => vec![self.rho()],
            Order::Five => self.full().to_vec(),
        }
    }

    pub fn from_free(order: Order, x: &[T]) -> Self {
        match order {
            Order::One => GaussianParam::One { rho: x[0] },
            Order::Five => GaussianParam::Five {
                mu1: x[0],
                mu2: x[1],
                sigma1: x[2],
                sigma2: x[3],
                rho: x[4],
            },
        }
    }

    /// Parameters for the coordinate-swapped pairs.
    pub fn swapped(&self) -> Self {
        match *self {
            GaussianParam::One { rho } => GaussianParam::One { rho },
            GaussianParam::Five {
                mu1,
                mu2,
                sigma1,
                sigma2,
                rho,
            } => GaussianParam::Five {
                mu1: mu2,
                mu2: mu1,
                sigma1: sigma2,
                sigma2: sigma1,
                rho,
            },
        }
    }
}

/// Outcome of one local likelihood fit. A fit that fails to converge is
/// reported with `converged == false`, never as an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub theta: GaussianParam<T>,
    pub converged: bool,
    pub iterations: usize,
    /// ∞-norm of the penalty gradient at `theta`
    pub score_norm: T,
}

/// Estimated correlation for one lag with its convergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagFit<T> {
    pub lag: usize,
    pub rho: T,
    pub converged: bool,
    pub iterations: usize,
}

/// Local Gaussian cross-correlations at `v` for lags `0..=m` and at the
/// reflected point for lags `1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCorrelationSet<T> {
    pub point: Point<T>,
    pub bandwidth: Bandwidth<T>,
    pub order: Order,
    /// `ρ̂_{kℓ|v}(h)`, `h = 0..=m`
    pub forward: Vec<LagFit<T>>,
    /// `ρ̂_{ℓk|v̆}(h)`, `h = 1..=m`
    pub reflected: Vec<LagFit<T>>,
}

impl<T: Scalar> LocalCorrelationSet<T> {
    pub fn truncation(&self) -> usize {
        self.reflected.len()
    }

    pub fn all_converged(&self) -> bool {
        self.forward.iter().chain(&self.reflected).all(|f| f.converged)
    }

    pub fn failed_fits(&self) -> usize {
        self.forward.iter().chain(&self.reflected).filter(|f| !f.converged).count()
    }

    pub fn correlations(&self) -> crate::spectra::CorrelationSet<T> {
        crate::spectra::CorrelationSet {
            forward: self.forward.iter().map(|f| f.rho).collect(),
            reflected: self.reflected.iter().map(|f| f.rho).collect(),
        }
    }
}
