//! Run configuration: data source, estimation settings and band settings.
//!
//! Configs are stored as TOML. The cache key is the SHA-256 of the canonical
//! JSON form of everything except the output location.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::EstimationConfig;
use crate::local_gaussian::{Bandwidth, Order, Point};
use crate::simulate::{CosineParams, LocalTrigParams, ModelSpec};
use crate::spectra::{FrequencyGrid, LagWindow};
use crate::stats::normal_quantile;
use crate::timeseries::Transform;

/// Where the series comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    /// Simulated from a model; bands come from independent realisations.
    Model { n: usize, spec: ModelSpec },
    /// Observed data; bands come from the circular block bootstrap.
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: Vec<String>,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSettings {
    pub replicates: usize,
    #[serde(default = "default_probs")]
    pub probs: (f64, f64),
    /// block length for bootstrap sources
    #[serde(default)]
    pub block_length: Option<usize>,
}

fn default_probs() -> (f64, f64) {
    (0.05, 0.95)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: Source,
    #[serde(default = "default_transform")]
    pub transform: Transform,
    #[serde(default = "default_pair")]
    pub pair: (usize, usize),
    /// percentile pairs such as `"10::90"`
    pub points: Vec<String>,
    pub bandwidth: (f64, f64),
    pub truncation: usize,
    pub order: Order,
    #[serde(default)]
    pub window: LagWindow,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub bands: Option<BandSettings>,
    pub seed: u64,
    /// output directory; not part of the cache key
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_transform() -> Transform {
    Transform::Raw
}

fn default_pair() -> (usize, usize) {
    (0, 1)
}

fn default_grid_size() -> usize {
    1024
}

/// A validation failure tied to one config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// `"a::b"` (optionally with `%` signs) to `(Φ⁻¹(a/100), Φ⁻¹(b/100))`.
pub fn percentile_to_point(spec: &str) -> Result<Point<f64>> {
    let malformed = || Error::MalformedPoint(spec.to_string());
    let (a, b) = spec.split_once("::").ok_or_else(malformed)?;
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().trim_end_matches('%').parse().map_err(|_| malformed())?;
        if !(v > 0.0 && v < 100.0) {
            return Err(malformed());
        }
        Ok(v / 100.0)
    };
    Ok(Point::new(normal_quantile(parse(a)?), normal_quantile(parse(b)?)))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// All field-level problems, empty when the config is usable.
    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        match &self.source {
            Source::Model { n, spec } => {
                if *n < 10 {
                    errs.push(FieldError::new("source.n", "series length must be at least 10"));
                }
                if let Err(e) = spec.validate() {
                    errs.push(FieldError::new("source.spec", e.to_string()));
                }
            }
            Source::Csv { columns, .. } => {
                if !columns.is_empty() && columns.len() < 2 {
                    errs.push(FieldError::new("source.columns", "need at least two columns"));
                }
            }
        }
        if self.points.is_empty() {
            errs.push(FieldError::new("points", "at least one point is required"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if let Err(e) = percentile_to_point(p) {
                errs.push(FieldError::new(
                    format!("points[{i}]"),
                    format!("{e}; expected \"a::b\" with percentiles strictly between 0 and 100"),
                ));
            }
        }
        let (b1, b2) = self.bandwidth;
        if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
            errs.push(FieldError::new("bandwidth", "bandwidths must be positive and finite"));
        }
        if self.truncation < 1 {
            errs.push(FieldError::new("truncation", "truncation m must be at least 1"));
        }
        if let Source::Model { n, .. } = &self.source {
            if self.truncation >= *n {
                errs.push(FieldError::new("truncation", "truncation must be below the series length"));
            }
        }
        if self.grid_size < 2 {
            errs.push(FieldError::new("grid_size", "grid needs at least two frequencies"));
        }
        if self.pair.0 == self.pair.1 {
            errs.push(FieldError::new("pair", "pair must name two different columns"));
        }
        if let Some(bands) = &self.bands {
            if bands.replicates < 2 {
                errs.push(FieldError::new("bands.replicates", "need at least 2 replicates"));
            }
            let (lo, hi) = bands.probs;
            if !(lo > 0.0 && lo < hi && hi < 1.0) {
                errs.push(FieldError::new("bands.probs", "need 0 < lo < hi < 1"));
            }
            match (&self.source, bands.block_length) {
                (Source::Csv { .. }, None) => {
                    errs.push(FieldError::new("bands.block_length", "bootstrap bands need a block length"))
                }
                (_, Some(0)) => errs.push(FieldError::new("bands.block_length", "block length must be positive")),
                _ => {}
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.field_errors();
        if errs.is_empty() {
            return Ok(());
        }
        let msg = errs
            .iter()
            .map(|e| format!("{}: {}", e.field, e.message))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Config(msg))
    }

    pub fn points(&self) -> Result<Vec<Point<f64>>> {
        self.points.iter().map(|p| percentile_to_point(p)).collect()
    }

    pub fn estimation(&self) -> Result<EstimationConfig<f64>> {
        Ok(EstimationConfig {
            pair: self.pair,
            points: self.points()?,
            bandwidth: Bandwidth::new(self.bandwidth.0, self.bandwidth.1)?,
            truncation: self.truncation,
            order: self.order,
            window: self.window,
            grid: FrequencyGrid::uniform(self.grid_size)?,
        })
    }

    /// Hex SHA-256 of the canonical JSON of the config without `output`,
    /// prefixed by `tag` (the kind of record being cached).
    pub fn hash(&self, tag: &str) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let mut h = Sha256::new();
        h.update(tag.as_bytes());
        h.update([0u8]);
        h.update(json.as_bytes());
        hex::encode(h.finalize())
    }
}

/// Named configurations that regenerate the simulated figures.
pub const FIGURES: [&str; 5] = [
    "gaussian-wn",
    "cosine",
    "local-trig-common",
    "local-trig-offdiag",
    "local-trig-individual",
];

/// The standard simulation settings: n = 1859, b = 0.6, m = 10, p = 5,
/// Tukey-Hanning window, 100 replicates and 90% bands.
pub fn figure_config(name: &str) -> Result<RunConfig> {
    let diagonal = ["10::10", "50::50", "90::90"];
    let (spec, points, seed) = match name {
        "gaussian-wn" => (ModelSpec::GaussianWn { rho: 0.35 }, diagonal, 1),
        "cosine" => (
            ModelSpec::Cosine(CosineParams {
                alpha: 0.302,
                theta: PI / 3.0,
                sigma: 0.75,
            }),
            diagonal,
            2,
        ),
        "local-trig-common" => (ModelSpec::LocalTrig(LocalTrigParams::common_phase()), diagonal, 3),
        "local-trig-offdiag" => (
            ModelSpec::LocalTrig(LocalTrigParams::common_phase()),
            ["10::90", "10::50", "50::90"],
            3,
        ),
        "local-trig-individual" => (ModelSpec::LocalTrig(LocalTrigParams::individual_phase()), diagonal, 4),
        other => {
            return Err(Error::Config(format!(
                "unknown figure '{other}', expected one of {}",
                FIGURES.join(", ")
            )))
        }
    };
    Ok(RunConfig {
        source: Source::Model { n: 1859, spec },
        transform: Transform::Raw,
        pair: (0, 1),
        points: points.iter().map(|s| s.to_string()).collect(),
        bandwidth: (0.6, 0.6),
        truncation: 10,
        order: Order::Five,
        window: LagWindow::TukeyHanning,
        grid_size: 1024,
        bands: Some(BandSettings {
            replicates: 100,
            probs: (0.05, 0.95),
            block_length: None,
        }),
        seed,
        output: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_points() {
        let p = percentile_to_point("50::50").unwrap();
        assert_eq!((p.v1, p.v2), (0.0, 0.0));
        let p = percentile_to_point("10::90").unwrap();
        assert!((p.v1 + 1.2815515655446004).abs() < 1e-12);
        assert!((p.v2 - 1.2815515655446004).abs() < 1e-12);
        let p = percentile_to_point("10%::50%").unwrap();
        assert!((p.v1 + 1.2816).abs() < 1e-4 && p.v2 == 0.0);
        for bad in ["0::50", "50::100", "50:50", "a::b", "50", "::", "-5::50"] {
            assert!(matches!(percentile_to_point(bad), Err(Error::MalformedPoint(_))), "{bad}");
        }
    }

    #[test]
    fn toml_round_trip_and_figures() {
        for name in FIGURES {
            let c = figure_config(name).unwrap();
            assert!(c.field_errors().is_empty(), "{name}");
            let back = RunConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
        }
        assert!(figure_config("nope").is_err());
    }

    #[test]
    fn csv_source_from_text() {
        let text = r#"
points = ["10::10", "50::50"]
bandwidth = [0.6, 0.6]
truncation = 10
order = 5
window = "tukey-hanning"
seed = 7
transform = "log-return"

[source]
kind = "csv"
path = "data/stocks.csv"
columns = ["DAX", "CAC"]

[bands]
replicates = 100
block_length = 100
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert!(c.field_errors().is_empty());
        assert_eq!(c.grid_size, 1024);
        assert_eq!(c.bands.as_ref().unwrap().probs, (0.05, 0.95));
        assert!(RunConfig::from_toml("points = 3").is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = figure_config("gaussian-wn").unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash("bands"), b.hash("bands"));
        assert_ne!(a.hash("bands"), a.hash("spectra"));
        let mut c = a.clone();
        c.truncation = 11;
        assert_ne!(a.hash("bands"), c.hash("bands"));
        let mut d = a.clone();
        d.seed = 2;
        assert_ne!(a.hash("bands"), d.hash("bands"));
        let mut e = a.clone();
        e.points[0] = "10::11".into();
        assert_ne!(a.hash("bands"), e.hash("bands"));
        assert_eq!(a.hash("bands").len(), 64);
    }

    #[test]
    fn field_errors_name_fields() {
        let mut c = figure_config("cosine").unwrap();
        c.points = vec!["0::50".into()];
        c.truncation = 0;
        c.bands.as_mut().unwrap().probs = (0.9, 0.1);
        let fields: Vec<String> = c.field_errors().into_iter().map(|e| e.field).collect();
        assert_eq!(fields, ["points[0]", "truncation", "bands.probs"]);
        assert!(c.validate().is_err());
    }
}
