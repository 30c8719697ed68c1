//! End-to-end runs from a [`RunConfig`] to a serializable [`ResultRecord`].

use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Source};
use crate::error::{Error, Result};
use crate::inference::{
    bootstrap_ensemble, complex_summary_at_frequency, estimate_correlations, pointwise_bands, replicate_ensemble,
    BandEnsemble, ComplexSummary, ConfidenceBands, EnsembleRun, EnsembleSource, EstimationConfig, SeriesCorrelations,
};
use crate::local_gaussian::{LocalCorrelationSet, Point};
use crate::simulate::{replicate_rng, Simulator};
use crate::spectra::SpectrumEstimate;
use crate::timeseries::{load_csv, log_returns, pseudo_normalize, MultivariateSeries, PseudoNormalizedSeries, Transform};

/// Bumped whenever the record layout changes.
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// correlations and spectra of the observed (or first simulated) series
    Spectra,
    /// additionally replicate or bootstrap bands
    Bands,
}

impl RunMode {
    pub fn tag(self) -> &'static str {
        match self {
            RunMode::Spectra => "spectra",
            RunMode::Bands => "bands",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub label: String,
    pub point: Point<f64>,
    pub correlations: LocalCorrelationSet<f64>,
    pub spectrum: SpectrumEstimate<f64>,
    pub bands: Option<ConfidenceBands<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalResult {
    pub spectrum: SpectrumEstimate<f64>,
    pub bands: Option<ConfidenceBands<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergence {
    /// non-converged fits in the observed series, over all points and lags
    pub observed_failed_fits: usize,
    pub replicates: usize,
    /// replicates where estimation failed outright
    pub failed_replicates: usize,
    /// per point: replicates with at least one non-converged fit (excluded
    /// from the bands)
    pub flagged_replicates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub version: u32,
    pub mode: RunMode,
    pub config_hash: String,
    pub config: RunConfig,
    pub series: SeriesInfo,
    pub points: Vec<PointResult>,
    pub global: GlobalResult,
    pub ensemble: Option<EnsembleSource>,
    /// per replicate correlations, kept so complex summaries can be rebuilt
    pub replicates: Vec<Option<SeriesCorrelations<f64>>>,
    pub convergence: Convergence,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub source: String,
    pub names: Vec<String>,
    pub n: usize,
    pub transform: Transform,
}

/// The series a config refers to, after the transform. Model sources return
/// the realisation of replicate stream 0.
pub fn load_series(config: &RunConfig) -> Result<MultivariateSeries<f64>> {
    let raw = match &config.source {
        Source::Model { n, spec } => {
            let mut rng = replicate_rng(config.seed, 0);
            spec.simulate::<f64>(*n, &mut rng)?
        }
        Source::Csv {
            path,
            columns,
            delimiter,
        } => {
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            let delim = u8::try_from(*delimiter)
                .map_err(|_| Error::Config(format!("delimiter '{delimiter}' is not a single byte")))?;
            load_csv(path, &cols, delim)?
        }
    };
    match config.transform {
        Transform::Raw => Ok(raw),
        Transform::LogReturn => log_returns(&raw),
    }
}

/// Runs `config` in `mode`; `progress` counts finished replicates.
pub fn run(config: &RunConfig, mode: RunMode, progress: Option<&AtomicUsize>) -> Result<ResultRecord> {
    config.validate()?;
    let started = Instant::now();
    let series = load_series(config)?;
    let z = pseudo_normalize(&series);
    let est = config.estimation()?;
    let observed = estimate_correlations(&z, &est)?;

    let mut convergence = Convergence {
        observed_failed_fits: observed.local.iter().map(|c| c.failed_fits()).sum(),
        ..Default::default()
    };
    let (ensemble, replicates, local_bands, global_bands) = match (mode, &config.bands) {
        (RunMode::Bands, Some(settings)) => {
            let run = ensemble_for(config, &z, &est, progress)?;
            convergence.replicates = settings.replicates;
            convergence.failed_replicates = run.global.failures;
            convergence.flagged_replicates = run.local.iter().map(|e| e.flagged()).collect();
            let local = run
                .local
                .iter()
                .map(|e| pointwise_bands(e, settings.probs).map(Some))
                .collect::<Result<Vec<_>>>()?;
            let global = Some(pointwise_bands(&run.global, settings.probs)?);
            (Some(run.global.source), run.correlations, local, global)
        }
        (RunMode::Bands, None) => {
            return Err(Error::Config("bands: band settings are required for this run".into()));
        }
        (RunMode::Spectra, _) => (None, Vec::new(), vec![None; est.points.len()], None),
    };

    let points = config
        .points
        .iter()
        .zip(observed.local.iter())
        .zip(local_bands)
        .enumerate()
        .map(|(i, ((label, corr), bands))| {
            Ok(PointResult {
                label: label.clone(),
                point: corr.point,
                correlations: corr.clone(),
                spectrum: observed.local_spectrum(i, &est)?,
                bands,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let global = GlobalResult {
        spectrum: observed.global_spectrum(&est)?,
        bands: global_bands,
    };
    Ok(ResultRecord {
        version: RECORD_VERSION,
        mode,
        config_hash: config.hash(mode.tag()),
        config: RunConfig {
            output: None,
            ..config.clone()
        },
        series: SeriesInfo {
            source: series.source.clone(),
            names: series.names().to_vec(),
            n: series.len(),
            transform: config.transform,
        },
        points,
        global,
        ensemble,
        replicates,
        convergence,
        timing: Timing {
            seconds: started.elapsed().as_secs_f64(),
        },
    })
}

fn ensemble_for(
    config: &RunConfig,
    z: &PseudoNormalizedSeries<f64>,
    est: &EstimationConfig<f64>,
    progress: Option<&AtomicUsize>,
) -> Result<EnsembleRun<f64>> {
    let settings = config.bands.as_ref().expect("checked by caller");
    match &config.source {
        Source::Model { n, spec } => replicate_ensemble(spec, settings.replicates, *n, est, config.seed, progress),
        Source::Csv { .. } => {
            let block = settings
                .block_length
                .ok_or_else(|| Error::Config("bands.block_length: required for bootstrap".into()))?;
            bootstrap_ensemble(z, est, block, settings.replicates, config.seed, progress)
        }
    }
}

impl ResultRecord {
    /// Rebuilds the replicate spectra at point `index` (or the global ones
    /// when `index` is `None`).
    pub fn ensemble(&self, index: Option<usize>) -> Result<BandEnsemble<f64>> {
        let source = self
            .ensemble
            .ok_or_else(|| Error::Config("record has no replicate ensemble".into()))?;
        let est = self.config.estimation()?;
        if let Some(i) = index {
            if i >= est.points.len() {
                return Err(Error::InvalidParameter(format!("point index {i} out of range")));
            }
        }
        let ok: Vec<&SeriesCorrelations<f64>> = self.replicates.iter().flatten().collect();
        let reps = ok
            .iter()
            .map(|c| match index {
                Some(i) => c.local_spectrum(i, &est),
                None => c.global_spectrum(&est),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut e = BandEnsemble::new(reps, source, self.config.seed)?;
        e.failures = self.convergence.failed_replicates;
        Ok(e)
    }

    /// Complex replicate summary at `omega` for point `index`.
    pub fn complex_summary(&self, index: Option<usize>, omega: f64) -> Result<ComplexSummary<f64>> {
        let probs = self
            .config
            .bands
            .as_ref()
            .map(|b| b.probs)
            .unwrap_or((0.05, 0.95));
        complex_summary_at_frequency(&self.ensemble(index)?, omega, probs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
