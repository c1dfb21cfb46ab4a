//! End-to-end fitting, algebraic long-horizon prediction and error metrics.
//!
//! A fitted [`SparseModel`] is a pure function of time: the value at horizon
//! step `k` is the basis evaluated at `t_end + k * d`, combined with the
//! coefficients and mapped back to signal units. No observed value is read
//! at prediction time, so steps are independent of each other.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{self, BasisSpec};
use crate::error::{Result, SiabfError};
use crate::solver::{self, CvOutcome, FitConfig, SolverKind, SparseCoefficients};
use crate::spectrum::{self, Suitability, DEFAULT_Q};
use crate::timeseries::{self, StandardizationStats, TimeSeries};

pub const DEFAULT_MAPE_EPSILON: f64 = 1e-8;
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything `fit` needs beyond the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub q: usize,
    pub solver: SolverKind,
    pub fit: FitConfig,
    pub include_intercept: bool,
    pub trend_degree: u8,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            q: DEFAULT_Q,
            solver: SolverKind::L1CoordinateDescent,
            fit: FitConfig::default(),
            include_intercept: true,
            trend_degree: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub q: usize,
    pub periods: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub quasi_periodic_index: f64,
    pub suitability: Suitability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub library_version: String,
    pub spec: BasisSpec,
    pub coefficients: SparseCoefficients,
    pub stats: StandardizationStats,
    pub training_start: f64,
    pub training_end: f64,
    pub sample_interval: f64,
    pub spectrum_summary: SpectrumSummary,
    pub cross_validation: Option<CvOutcome>,
}

/// One row of the human-readable coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTerm {
    pub label: String,
    pub coefficient: f64,
}

impl SparseModel {
    pub fn validate(&self) -> Result<()> {
        self.spec.check()?;
        let p = self.spec.column_count();
        let c = &self.coefficients;
        if c.xi.len() != p {
            return Err(SiabfError::InvalidModel(format!(
                "{} coefficients for {p} basis columns",
                c.xi.len()
            )));
        }
        if c.xi.iter().any(|v| !v.is_finite()) {
            return Err(SiabfError::InvalidModel("non-finite coefficient".into()));
        }
        if c.nonzero_count != c.xi.iter().filter(|v| **v != 0.0).count() {
            return Err(SiabfError::InvalidModel("nonzero_count disagrees with coefficients".into()));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(SiabfError::InvalidModel("sample interval must be positive".into()));
        }
        if !(self.training_start.is_finite()
            && self.training_end.is_finite()
            && self.training_start < self.training_end)
        {
            return Err(SiabfError::InvalidModel("training span is not well ordered".into()));
        }
        if !(self.stats.std > 0.0 && self.stats.std.is_finite() && self.stats.mean.is_finite()) {
            return Err(SiabfError::InvalidModel("bad standardization stats".into()));
        }
        if self.spec.trend_degree == 1 && self.spec.trend_window.is_none() {
            return Err(SiabfError::InvalidModel("trend column without a window".into()));
        }
        Ok(())
    }

    /// Nonzero coefficients in signal units, in column order.
    pub fn active_terms(&self) -> Vec<ActiveTerm> {
        self.coefficients
            .xi
            .iter()
            .zip(&self.spec.column_labels)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, label)| ActiveTerm {
                label: label.clone(),
                coefficient: c * self.stats.std,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SiabfError::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<SparseModel> {
        let model: SparseModel =
            serde_json::from_str(text).map_err(|e| SiabfError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| SiabfError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SparseModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SiabfError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn horizon_time(&self, step: u64) -> f64 {
        self.training_end + step as f64 * self.sample_interval
    }
}

/// Standardize, find adaptive periods, build the dictionary and solve.
pub fn fit(series: &TimeSeries, config: &ModelConfig) -> Result<SparseModel> {
    if config.q == 0 {
        return Err(SiabfError::InvalidInput("Q must be at least 1".into()));
    }
    config.fit.validate()?;
    series.require_gap_free()?;
    let (standardized, stats) = timeseries::standardize(series)?;

    let report = spectrum::analyze(&standardized)?;
    let index = report
        .quasi_periodic_index
        .ok_or_else(|| SiabfError::Internal("index missing after analyze".into()))?;
    let periods = spectrum::adaptive_periods(&report, config.q);

    let mut spec = basis::build_spec(&periods, config.include_intercept, config.trend_degree)?;
    spec.anchor_trend(series.start_time(), series.end_time());
    let design = basis::evaluate(&spec, &series.times())?;
    let target = standardized.values();

    let mut fit_config = config.fit.clone();
    let cross_validation = if !fit_config.cv_grid.is_empty()
        && config.solver == SolverKind::L1CoordinateDescent
    {
        let outcome = solver::cross_validate_lambda(&design, target, &fit_config)?;
        fit_config.lambda = outcome.best_lambda;
        Some(outcome)
    } else {
        None
    };
    let coefficients = solver::fit_with(config.solver, &design, target, &fit_config)?;

    let model = SparseModel {
        library_version: LIBRARY_VERSION.to_string(),
        spec: design.spec,
        coefficients,
        stats,
        training_start: series.start_time(),
        training_end: series.end_time(),
        sample_interval: series.sample_interval(),
        spectrum_summary: SpectrumSummary {
            q: config.q,
            periods: periods.periods,
            amplitudes: periods.source_amplitudes,
            quasi_periodic_index: index,
            suitability: spectrum::classify_suitability(index)?,
        },
        cross_validation,
    };
    model
        .validate()
        .map_err(|e| SiabfError::Internal(format!("fitted model failed validation: {e}")))?;
    Ok(model)
}

/// Predictions for horizon steps `first..first + count` (steps are 1-based).
pub fn predict_steps(model: &SparseModel, first: u64, count: usize) -> Result<Vec<f64>> {
    if first == 0 {
        return Err(SiabfError::InvalidInput("horizon steps start at 1".into()));
    }
    let mut scratch = Vec::with_capacity(model.spec.column_count());
    (0..count as u64)
        .map(|offset| {
            let step = first + offset;
            let t = model.horizon_time(step);
            let z = model.spec.combine(t, &model.coefficients.xi, &mut scratch);
            let v = z * model.stats.std + model.stats.mean;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SiabfError::NonFinitePrediction { step })
            }
        })
        .collect()
}

pub fn predict(model: &SparseModel, horizon_steps: usize) -> Result<Vec<f64>> {
    if horizon_steps == 0 {
        return Err(SiabfError::InvalidInput("horizon must be at least 1 step".into()));
    }
    predict_steps(model, 1, horizon_steps)
}

/// Model output on arbitrary instants (e.g. the training grid).
pub fn predict_at(model: &SparseModel, times: &[f64]) -> Vec<f64> {
    let mut scratch = Vec::new();
    times
        .iter()
        .map(|&t| model.spec.combine(t, &model.coefficients.xi, &mut scratch) * model.stats.std + model.stats.mean)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the truth is constant and R^2 is undefined.
    pub r2: Option<f64>,
    /// Median of `|y - yhat| / (|y| + eps)`, in percent.
    pub mape_median: f64,
    pub elapsed_seconds: f64,
}

impl EvaluationReport {
    pub fn with_elapsed(mut self, seconds: f64) -> Self {
        self.elapsed_seconds = seconds;
        self
    }

    pub fn summary_line(&self) -> String {
        let r2 = self
            .r2
            .map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        format!(
            "RMSE {:.6}  MAE {:.6}  R2 {}  MAPE {:.4}%  elapsed {:.3}s",
            self.rmse, self.mae, r2, self.mape_median, self.elapsed_seconds
        )
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn evaluate(predictions: &[f64], truth: &[f64], epsilon: f64) -> Result<EvaluationReport> {
    if predictions.len() != truth.len() {
        return Err(SiabfError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(SiabfError::InvalidInput("nothing to evaluate".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SiabfError::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
    }
    if predictions.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(SiabfError::InvalidInput("non-finite value in evaluation input".into()));
    }
    let n = truth.len() as f64;
    let ss_res: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(p, y)| (y - p).powi(2))
        .sum();
    let mae = predictions.iter().zip(truth).map(|(p, y)| (y - p).abs()).sum::<f64>() / n;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    let mut ape: Vec<f64> = predictions
        .iter()
        .zip(truth)
        .map(|(p, y)| (y - p).abs() / (y.abs() + epsilon))
        .collect();
    Ok(EvaluationReport {
        rmse: (ss_res / n).sqrt(),
        mae,
        r2,
        mape_median: 100.0 * median(&mut ape),
        elapsed_seconds: 0.0,
    })
}
