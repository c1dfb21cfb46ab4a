//! Uniformly sampled scalar series: CSV ingestion, gap filling and
//! standardization.
//!
//! A [`TimeSeries`] carries its own clock (`start_time`, `sample_interval`)
//! so sample `s` sits at `start_time + s * sample_interval`. Missing samples
//! are kept in place and marked in the gap mask; their stored value is NaN
//! and must never be read as data.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SiabfError};

/// Relative tolerance on timestamp spacing when ingesting.
pub const SPACING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    gap_mask: Vec<bool>,
    start_time: f64,
    sample_interval: f64,
}

/// Mean and population standard deviation used to standardize a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: f64,
    pub std: f64,
}

impl TimeSeries {
    /// Builds a gap-free series.
    pub fn new(values: Vec<f64>, start_time: f64, sample_interval: f64) -> Result<Self> {
        let mask = vec![false; values.len()];
        Self::with_gaps(values, mask, start_time, sample_interval)
    }

    /// Builds a series with missing samples. Values under a `true` mask entry
    /// are replaced by NaN.
    pub fn with_gaps(
        mut values: Vec<f64>,
        gap_mask: Vec<bool>,
        start_time: f64,
        sample_interval: f64,
    ) -> Result<Self> {
        if values.len() != gap_mask.len() {
            return Err(SiabfError::DimensionMismatch(format!(
                "{} values but {} gap flags",
                values.len(),
                gap_mask.len()
            )));
        }
        if values.len() < 2 {
            return Err(SiabfError::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(SiabfError::InvalidInput(format!(
                "sample interval must be positive and finite, got {sample_interval}"
            )));
        }
        if !start_time.is_finite() {
            return Err(SiabfError::InvalidInput("start time must be finite".into()));
        }
        for (i, (v, gap)) in values.iter_mut().zip(&gap_mask).enumerate() {
            if *gap {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(SiabfError::InvalidInput(format!(
                    "non-finite value {v} at index {i}"
                )));
            }
        }
        Ok(TimeSeries {
            values,
            gap_mask,
            start_time,
            sample_interval,
        })
    }

    /// Samples `f` on `n` instants starting at `start_time`.
    pub fn from_fn(
        n: usize,
        start_time: f64,
        sample_interval: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = (0..n)
            .map(|s| f(start_time + s as f64 * sample_interval))
            .collect();
        Self::new(values, start_time, sample_interval)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values; gap positions hold NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gap_mask(&self) -> &[bool] {
        &self.gap_mask
    }

    pub fn gap_count(&self) -> usize {
        self.gap_mask.iter().filter(|g| **g).count()
    }

    pub fn has_gaps(&self) -> bool {
        self.gap_mask.iter().any(|g| *g)
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 * self.sample_interval
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.len() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|s| self.time_at(s)).collect()
    }

    /// Samples `range` as a new series on the same clock.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<TimeSeries> {
        if range.end > self.len() || range.start >= range.end {
            return Err(SiabfError::InvalidInput(format!(
                "slice {range:?} out of bounds for series of length {}",
                self.len()
            )));
        }
        TimeSeries::with_gaps(
            self.values[range.clone()].to_vec(),
            self.gap_mask[range.clone()].to_vec(),
            self.time_at(range.start),
            self.sample_interval,
        )
    }

    /// Same clock, new gap-free values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<TimeSeries> {
        if values.len() != self.len() {
            return Err(SiabfError::DimensionMismatch(format!(
                "replacement has {} values, series has {}",
                values.len(),
                self.len()
            )));
        }
        TimeSeries::new(values, self.start_time, self.sample_interval)
    }

    pub(crate) fn require_gap_free(&self) -> Result<()> {
        match self.gap_count() {
            0 => Ok(()),
            count => Err(SiabfError::GapsPresent { count }),
        }
    }
}

/// Reads a two-column view of a headed CSV file.
///
/// The sample interval is the lower median of consecutive timestamp
/// differences, or the smallest difference when gaps are so dense that the
/// median is itself a multiple. Every difference must be a whole multiple
/// of the interval (within [`SPACING_TOLERANCE`]); skipped multiples become
/// gaps.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    time_column: &str,
    value_column: &str,
) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| SiabfError::io(path, e))?;
    read_csv(file, time_column, value_column)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    time_column: &str,
    value_column: &str,
) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SiabfError::MalformedFile(format!("cannot read header row: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(SiabfError::MalformedFile("empty file".into()));
    }
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            SiabfError::MalformedFile(format!(
                "column '{name}' not found (header: {})",
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let tcol = column(time_column)?;
    let vcol = column(value_column)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record =
            record.map_err(|e| SiabfError::MalformedFile(format!("line {line}: {e}")))?;
        let parse = |col: usize, what: &str| -> Result<f64> {
            let field = record.get(col).ok_or_else(|| {
                SiabfError::MalformedFile(format!("line {line}: missing {what} field"))
            })?;
            let v: f64 = field.parse().map_err(|_| {
                SiabfError::MalformedFile(format!("line {line}: cannot parse {what} '{field}'"))
            })?;
            if !v.is_finite() {
                return Err(SiabfError::MalformedFile(format!(
                    "line {line}: non-finite {what} '{field}'"
                )));
            }
            Ok(v)
        };
        times.push(parse(tcol, "time")?);
        values.push(parse(vcol, "value")?);
    }
    if times.len() < 2 {
        return Err(SiabfError::TooShort {
            needed: 2,
            got: times.len(),
        });
    }

    let diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = diffs.iter().position(|d| *d <= 0.0) {
        return Err(SiabfError::MalformedFile(format!(
            "timestamps not strictly increasing at data row {}",
            i + 2
        )));
    }
    let mut sorted = diffs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    let (interval, steps) = match step_counts(&diffs, median) {
        Ok(steps) => (median, steps),
        // dense gaps can push the median onto a multiple of the interval
        Err(e) if sorted[0] < median => {
            (sorted[0], step_counts(&diffs, sorted[0]).map_err(|_| e)?)
        }
        Err(e) => return Err(e),
    };

    let total: usize = steps.iter().sum();
    let mut full = vec![f64::NAN; total + 1];
    let mut mask = vec![true; total + 1];
    let mut pos = 0;
    full[0] = values[0];
    mask[0] = false;
    for (k, v) in steps.iter().zip(&values[1..]) {
        pos += k;
        full[pos] = *v;
        mask[pos] = false;
    }
    TimeSeries::with_gaps(full, mask, times[0], interval)
}

fn step_counts(diffs: &[f64], interval: f64) -> Result<Vec<usize>> {
    diffs
        .iter()
        .enumerate()
        .map(|(i, diff)| {
            let k = (diff / interval).round();
            if k < 1.0 || (diff - k * interval).abs() > SPACING_TOLERANCE * k * interval {
                Err(SiabfError::NonUniformSampling(format!(
                    "spacing {diff} between data rows {} and {} is not a multiple of {interval}",
                    i + 1,
                    i + 2
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Writes the non-gap samples as `time_column,value_column` rows.
pub fn write_csv(
    series: &TimeSeries,
    path: impl AsRef<Path>,
    time_column: &str,
    value_column: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| SiabfError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| SiabfError::io(path, e);
    writeln!(out, "{time_column},{value_column}").map_err(io)?;
    for s in 0..series.len() {
        if !series.gap_mask[s] {
            writeln!(out, "{},{}", series.time_at(s), series.values[s]).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Fills every gap by linear interpolation between its bracketing samples.
pub fn interpolate_gaps(series: &TimeSeries) -> Result<TimeSeries> {
    let n = series.len();
    if series.gap_mask[0] {
        return Err(SiabfError::BoundaryGap { index: 0 });
    }
    if series.gap_mask[n - 1] {
        return Err(SiabfError::BoundaryGap { index: n - 1 });
    }
    let mut values = series.values.clone();
    let mut left = 0;
    for right in 1..n {
        if series.gap_mask[right] {
            continue;
        }
        let span = (right - left) as f64;
        let (a, b) = (values[left], values[right]);
        for (offset, v) in values[left + 1..right].iter_mut().enumerate() {
            let w = (offset + 1) as f64 / span;
            *v = a + (b - a) * w;
        }
        left = right;
    }
    TimeSeries::new(values, series.start_time, series.sample_interval)
}

/// Mean and population standard deviation of a gap-free sample.
pub fn population_stats(values: &[f64]) -> StandardizationStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    StandardizationStats {
        mean,
        std: var.sqrt(),
    }
}

/// Rescales to zero mean and unit population standard deviation.
///
/// A spread at or below `1e-12 * max|x|` is treated as a constant series
/// and rejected with [`SiabfError::ZeroVariance`]; that level is pure
/// rounding noise from computing the mean.
pub fn standardize(series: &TimeSeries) -> Result<(TimeSeries, StandardizationStats)> {
    series.require_gap_free()?;
    let stats = population_stats(&series.values);
    let peak = series.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(stats.std > 1e-12 * peak) {
        return Err(SiabfError::ZeroVariance);
    }
    let values = series
        .values
        .iter()
        .map(|v| (v - stats.mean) / stats.std)
        .collect();
    Ok((
        TimeSeries::new(values, series.start_time, series.sample_interval)?,
        stats,
    ))
}

pub fn destandardize(values: &[f64], stats: &StandardizationStats) -> Result<Vec<f64>> {
    if !(stats.std > 0.0) {
        return Err(SiabfError::ZeroVariance);
    }
    Ok(values.iter().map(|v| v * stats.std + stats.mean).collect())
}
