//! DFT amplitude spectrum, its sorting diagram, adaptive period extraction
//! and the quasi-periodic index.
//!
//! Only the non-negative half of the spectrum is kept:
//! bins `w = 0..=(N-1)/2`, amplitude `|sum_s x_s e^{-2 pi i w s / N}|`,
//! frequency `w / (N d)` with `d` the sample interval.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SiabfError};
use crate::timeseries::TimeSeries;

/// Number of largest sorting-diagram declines summed by the index.
pub const INDEX_SLOPES: usize = 10;
pub const MODEL_BASED_THRESHOLD: f64 = 0.8;
pub const DATA_DRIVEN_THRESHOLD: f64 = 0.5;
pub const DEFAULT_Q: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub series_len: usize,
    pub sample_interval: f64,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// Bin indices by descending amplitude; empty until [`sorting_diagram`] runs.
    pub sorted_ranks: Vec<usize>,
    pub quasi_periodic_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivePeriods {
    pub periods: Vec<f64>,
    pub source_bins: Vec<usize>,
    pub source_amplitudes: Vec<f64>,
}

impl AdaptivePeriods {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suitability {
    ModelBasedFavored,
    Contested,
    DataDrivenFavored,
}

impl std::fmt::Display for Suitability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Suitability::ModelBasedFavored => "model-based favored",
            Suitability::Contested => "contested",
            Suitability::DataDrivenFavored => "data-driven favored",
        };
        f.write_str(s)
    }
}

/// Number of retained bins for a series of length `n`.
pub fn half_spectrum_len(n: usize) -> usize {
    (n - 1) / 2 + 1
}

pub fn dft_spectrum(series: &TimeSeries) -> Result<SpectrumReport> {
    series.require_gap_free()?;
    let n = series.len();
    if n < 2 {
        return Err(SiabfError::TooShort { needed: 2, got: n });
    }
    let mut buf: Vec<Complex<f64>> = series
        .values()
        .iter()
        .map(|v| Complex::new(*v, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = half_spectrum_len(n);
    let span = n as f64 * series.sample_interval();
    Ok(SpectrumReport {
        series_len: n,
        sample_interval: series.sample_interval(),
        amplitudes: buf[..bins].iter().map(|c| c.norm()).collect(),
        frequencies: (0..bins).map(|w| w as f64 / span).collect(),
        sorted_ranks: Vec::new(),
        quasi_periodic_index: None,
    })
}

/// Bin order by descending amplitude, ties to the lower bin.
pub fn rank_bins(amplitudes: &[f64]) -> Vec<usize> {
    let mut ranks: Vec<usize> = (0..amplitudes.len()).collect();
    ranks.sort_by(|&a, &b| amplitudes[b].total_cmp(&amplitudes[a]).then(a.cmp(&b)));
    ranks
}

pub fn sorting_diagram(mut report: SpectrumReport) -> SpectrumReport {
    report.sorted_ranks = rank_bins(&report.amplitudes);
    report
}

fn ranks_of(report: &SpectrumReport) -> std::borrow::Cow<'_, [usize]> {
    if report.sorted_ranks.len() == report.amplitudes.len() {
        std::borrow::Cow::Borrowed(&report.sorted_ranks)
    } else {
        std::borrow::Cow::Owned(rank_bins(&report.amplitudes))
    }
}

/// Top-`q` non-DC bins converted to periods `1 / f_w`.
pub fn adaptive_periods(report: &SpectrumReport, q: usize) -> AdaptivePeriods {
    let ranks = ranks_of(report);
    let bins: Vec<usize> = ranks.iter().copied().filter(|&w| w != 0).take(q).collect();
    AdaptivePeriods {
        periods: bins.iter().map(|&w| 1.0 / report.frequencies[w]).collect(),
        source_amplitudes: bins.iter().map(|&w| report.amplitudes[w]).collect(),
        source_bins: bins,
    }
}

/// Sum of the ten largest consecutive declines of an already descending
/// amplitude list, divided by its first entry.
pub fn quasi_periodic_index_sorted(sorted_desc: &[f64]) -> Result<f64> {
    if sorted_desc.len() < 2 {
        return Err(SiabfError::TooShort {
            needed: 2,
            got: sorted_desc.len(),
        });
    }
    let peak = sorted_desc[0];
    if !(peak > 0.0) {
        return Err(SiabfError::DegenerateSpectrum);
    }
    let mut declines: Vec<f64> = sorted_desc.windows(2).map(|w| w[0] - w[1]).collect();
    declines.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = declines.iter().take(INDEX_SLOPES).sum();
    Ok(top / peak)
}

/// Quasi-periodic index over the non-DC sorting diagram.
pub fn quasi_periodic_index(report: &SpectrumReport) -> Result<f64> {
    let sorted: Vec<f64> = ranks_of(report)
        .iter()
        .filter(|&&w| w != 0)
        .map(|&w| report.amplitudes[w])
        .collect();
    quasi_periodic_index_sorted(&sorted)
}

pub fn classify_suitability(index: f64) -> Result<Suitability> {
    if !(index.is_finite() && index >= 0.0) {
        return Err(SiabfError::InvalidInput(format!(
            "quasi-periodic index must be finite and non-negative, got {index}"
        )));
    }
    Ok(if index >= MODEL_BASED_THRESHOLD {
        Suitability::ModelBasedFavored
    } else if index <= DATA_DRIVEN_THRESHOLD {
        Suitability::DataDrivenFavored
    } else {
        Suitability::Contested
    })
}

/// Spectrum, sorting diagram and index in one pass.
pub fn analyze(series: &TimeSeries) -> Result<SpectrumReport> {
    let mut report = sorting_diagram(dft_spectrum(series)?);
    report.quasi_periodic_index = Some(quasi_periodic_index(&report)?);
    Ok(report)
}
