//! Ingestion, log-returns, pseudo-normalization and lag-pair construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    #[default]
    Raw,
    LogReturn,
}

/// `d` aligned, named, real-valued columns of common length `n ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    pub source: String,
    pub transform: Transform,
}

impl<T: Scalar> MultivariateSeries<T> {
    pub fn new(names: Vec<String>, columns: Vec<Vec<T>>, source: impl Into<String>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch(n, c.len()));
        }
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        Ok(Self {
            names,
            columns,
            source: source.into(),
            transform: Transform::Raw,
        })
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, k: usize) -> &[T] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            let k = self
                .column_index(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            cols.push(self.columns[k].clone());
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: cols,
            source: self.source.clone(),
            transform: self.transform,
        })
    }
}

/// Read the named columns of a headed CSV file.
///
/// An empty `columns` list selects every column. Any cell that fails to parse
/// rejects the file with the offending (one-based, header excluded) row index.
pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    columns: &[&str],
    delimiter: u8,
) -> Result<MultivariateSeries<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut series = read_csv(file, columns, delimiter)?;
    series.source = path.display().to_string();
    Ok(series)
}

pub fn read_csv<T: Scalar, R: std::io::Read>(
    reader: R,
    columns: &[&str],
    delimiter: u8,
) -> Result<MultivariateSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let wanted: Vec<String> = if columns.is_empty() {
        header.clone()
    } else {
        columns.iter().map(|s| s.to_string()).collect()
    };
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == w)
                .ok_or_else(|| Error::MissingColumn(w.clone()))
        })
        .collect::<Result<_>>()?;

    let mut cols: Vec<Vec<T>> = vec![Vec::new(); idx.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, &i) in idx.iter().enumerate() {
            let cell = record.get(i).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: wanted[j].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: row + 1,
                    column: wanted[j].clone(),
                    value: cell.to_string(),
                });
            }
            cols[j].push(T::lit(value));
        }
    }
    MultivariateSeries::new(wanted, cols, "csv")
}

/// Write the series as a headed CSV with shortest round-trip decimals.
pub fn write_csv<T: Scalar, W: std::io::Write>(series: &MultivariateSeries<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(series.names())?;
    for t in 0..series.len() {
        w.write_record(series.columns().iter().map(|c| c[t].to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Column-wise `ln(y[t+1] / y[t])`; the result is one observation shorter.
pub fn log_returns<T: Scalar>(series: &MultivariateSeries<T>) -> Result<MultivariateSeries<T>> {
    let n = series.len();
    let mut out = Vec::with_capacity(series.dim());
    for (name, col) in series.names.iter().zip(&series.columns) {
        if let Some((row, &value)) = col.iter().enumerate().find(|(_, &y)| !(y > T::zero())) {
            return Err(Error::NonPositive {
                row: row + 1,
                column: name.clone(),
                value: value.as_f64(),
            });
        }
        out.push(col.windows(2).map(|w| (w[1] / w[0]).ln()).collect::<Vec<T>>());
    }
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let mut res = MultivariateSeries::new(series.names.clone(), out, series.source.clone())?;
    res.transform = Transform::LogReturn;
    Ok(res)
}

/// Columns mapped to approximately standard normal marginals through
/// `Φ⁻¹(rank / (n + 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoNormalizedSeries<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> PseudoNormalizedSeries<T> {
    /// Wrap columns that are already on the pseudo-normal scale (for example
    /// bootstrap resamples of a normalized series).
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self> {
        let s = MultivariateSeries::new(names, columns, "")?;
        Ok(Self {
            names: s.names,
            columns: s.columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, k: usize) -> &[T] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn rank_method(&self) -> &'static str {
        "rank/(n+1), ties by time order"
    }
}

/// Ranks `1..=n` with ties broken by time index.
pub fn ranks<T: Scalar>(column: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..column.len()).collect();
    // stable sort keeps time order among equal values
    order.sort_by(|&a, &b| {
        column[a]
            .partial_cmp(&column[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut rank = vec![0; column.len()];
    for (r, &t) in order.iter().enumerate() {
        rank[t] = r + 1;
    }
    rank
}

pub fn pseudo_normalize_column<T: Scalar>(column: &[T]) -> Vec<T> {
    let denom = T::from_usize_lossy(column.len() + 1);
    ranks(column)
        .into_iter()
        .map(|r| normal_quantile(T::from_usize_lossy(r) / denom))
        .collect()
}

pub fn pseudo_normalize<T: Scalar>(series: &MultivariateSeries<T>) -> PseudoNormalizedSeries<T> {
    PseudoNormalizedSeries {
        names: series.names.clone(),
        columns: series
            .columns
            .iter()
            .map(|c| pseudo_normalize_column(c))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairOrder {
    /// `(z_k[t+h], z_l[t])`
    KL,
    /// `(z_l[t+h], z_k[t])`, the reflected-point pairs
    LK,
}

/// Lag-`h` pairs `(first[t+h], second[t])`, `t = 0..n-h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagPairSet<T> {
    pub pairs: Vec<[T; 2]>,
    pub lag: usize,
    pub order: PairOrder,
}

impl<T: Scalar> LagPairSet<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Swap the two coordinates of every pair.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&[a, b]| [b, a]).collect(),
            lag: self.lag,
            order: match self.order {
                PairOrder::KL => PairOrder::LK,
                PairOrder::LK => PairOrder::KL,
            },
        }
    }
}

pub fn lag_pairs<T: Scalar>(first: &[T], second: &[T], lag: usize) -> Result<LagPairSet<T>> {
    let n = first.len().min(second.len());
    if first.len() != second.len() {
        return Err(Error::LengthMismatch(first.len(), second.len()));
    }
    if lag >= n {
        return Err(Error::LagOutOfRange { lag, n });
    }
    Ok(LagPairSet {
        pairs: (0..n - lag).map(|t| [first[t + lag], second[t]]).collect(),
        lag,
        order: PairOrder::KL,
    })
}

/// Pairs for the reflected point: `(second[t+h], first[t])`.
pub fn reflected_lag_pairs<T: Scalar>(first: &[T], second: &[T], lag: usize) -> Result<LagPairSet<T>> {
    let mut p = lag_pairs(second, first, lag)?;
    p.order = PairOrder::LK;
    Ok(p)
}
