//! Local Gaussian cross-spectra for multivariate time series.
//!
//! The numerical core (pseudo-normalization, local likelihood fits, lag-window
//! synthesis, band construction) is generic over the floating point type via
//! [`Scalar`]. The `*64` aliases below are what the pipeline, cache and
//! command-line tooling use.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod inference;
pub mod local_gaussian;
pub mod pipeline;
pub mod cache;
pub mod scalar;
pub mod simulate;
pub mod spectra;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use inference::{BandEnsemble, ConfidenceBands, ComplexSummary, CurveBand};
pub use local_gaussian::{
    Bandwidth, FitResult, GaussianParam, LagFit, LocalCorrelationSet, Order, Point,
};
pub use spectra::{FrequencyGrid, LagWindow, SpectrumEstimate, SpectrumKind};
pub use timeseries::{LagPairSet, MultivariateSeries, PseudoNormalizedSeries, Transform};

pub type Point64 = Point<f64>;
pub type Bandwidth64 = Bandwidth<f64>;
pub type GaussianParam64 = GaussianParam<f64>;
pub type FitResult64 = FitResult<f64>;
pub type LocalCorrelationSet64 = LocalCorrelationSet<f64>;
pub type FrequencyGrid64 = FrequencyGrid<f64>;
pub type SpectrumEstimate64 = SpectrumEstimate<f64>;
pub type BandEnsemble64 = BandEnsemble<f64>;
pub type ConfidenceBands64 = ConfidenceBands<f64>;
pub type MultivariateSeries64 = MultivariateSeries<f64>;
pub type PseudoNormalizedSeries64 = PseudoNormalizedSeries<f64>;
pub type LagPairSet64 = LagPairSet<f64>;

pub type Point32 = Point<f32>;
pub type SpectrumEstimate32 = SpectrumEstimate<f32>;
pub type LocalCorrelationSet32 = LocalCorrelationSet<f32>;
