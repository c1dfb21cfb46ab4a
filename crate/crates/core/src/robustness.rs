//! Robustness experiment: refit on a damaged copy of the training data and
//! compare against the clean control on the same test horizon.
//!
//! Damage is applied in a fixed order: delete a fraction of interior
//! samples, fill them by linear interpolation, then add uniform noise on
//! `[-a, a]` with `a = noise_scale * std(train)`.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SiabfError};
use crate::forecast::{self, EvaluationReport, ModelConfig, SparseModel};
use crate::timeseries::{self, TimeSeries};

/// Treated RMSE may exceed control RMSE by at most this fraction.
pub const DEGRADATION_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub deletion_fraction: f64,
    pub noise_scale: f64,
    pub rng_seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            deletion_fraction: 0.05,
            noise_scale: 0.05,
            rng_seed: 42,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.deletion_fraction) {
            return Err(SiabfError::InvalidInput(format!(
                "deletion fraction must lie in [0, 0.5], got {}",
                self.deletion_fraction
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(SiabfError::InvalidInput(format!(
                "noise scale must be >= 0, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub series: TimeSeries,
    /// Sorted indices that were deleted and re-interpolated.
    pub deleted: Vec<usize>,
}

pub fn corrupt(series: &TimeSeries, config: &CorruptionConfig) -> Result<TimeSeries> {
    corrupt_traced(series, config).map(|c| c.series)
}

pub fn corrupt_traced(series: &TimeSeries, config: &CorruptionConfig) -> Result<Corrupted> {
    config.validate()?;
    series.require_gap_free()?;
    let n = series.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let interior = n.saturating_sub(2);
    let wanted = (n as f64 * config.deletion_fraction).floor() as usize;
    let count = wanted.min(interior);
    let mut deleted: Vec<usize> = sample(&mut rng, interior, count)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    deleted.sort_unstable();

    let mut mask = vec![false; n];
    for &i in &deleted {
        mask[i] = true;
    }
    let holed = TimeSeries::with_gaps(
        series.values().to_vec(),
        mask,
        series.start_time(),
        series.sample_interval(),
    )?;
    let filled = timeseries::interpolate_gaps(&holed)?;

    let amplitude = config.noise_scale * timeseries::population_stats(series.values()).std;
    let values = if amplitude > 0.0 {
        filled
            .values()
            .iter()
            .map(|v| v + rng.gen_range(-amplitude..=amplitude))
            .collect()
    } else {
        filled.values().to_vec()
    };
    Ok(Corrupted {
        series: series.with_values(values)?,
        deleted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSetup {
    pub train_fraction: f64,
    pub model: ModelConfig,
    pub corruption: CorruptionConfig,
    pub mape_epsilon: f64,
}

impl Default for RobustnessSetup {
    fn default() -> Self {
        RobustnessSetup {
            train_fraction: 0.8,
            model: ModelConfig::default(),
            corruption: CorruptionConfig::default(),
            mape_epsilon: forecast::DEFAULT_MAPE_EPSILON,
        }
    }
}

/// Treated minus control for the accuracy metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub rmse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub mape_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub control: EvaluationReport,
    pub treated: EvaluationReport,
    pub deltas: MetricDeltas,
    /// `None` when the control is exact and the treated run is not.
    pub relative_rmse_change: Option<f64>,
    pub tolerance: f64,
    pub not_significantly_weaker: bool,
    pub deleted_indices: Vec<usize>,
}

/// Report plus the per-group predictions on the test horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRun {
    pub report: RobustnessReport,
    pub test_times: Vec<f64>,
    pub truth: Vec<f64>,
    pub control_predictions: Vec<f64>,
    pub treated_predictions: Vec<f64>,
}

impl RobustnessRun {
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("time,truth,control,treated\n");
        for i in 0..self.truth.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.test_times[i],
                self.truth[i],
                self.control_predictions[i],
                self.treated_predictions[i]
            ));
        }
        out
    }
}

fn fit_and_predict(
    train: &TimeSeries,
    config: &ModelConfig,
    horizon: usize,
) -> Result<(SparseModel, Vec<f64>, f64)> {
    let clock = Instant::now();
    let model = forecast::fit(train, config)?;
    let predictions = forecast::predict(&model, horizon)?;
    Ok((model, predictions, clock.elapsed().as_secs_f64()))
}

pub fn run_robustness(series: &TimeSeries, setup: &RobustnessSetup) -> Result<RobustnessRun> {
    series.require_gap_free()?;
    let n = series.len();
    if !(setup.train_fraction > 0.0 && setup.train_fraction < 1.0) {
        return Err(SiabfError::InvalidInput(format!(
            "train fraction must lie in (0, 1), got {}",
            setup.train_fraction
        )));
    }
    let split = (n as f64 * setup.train_fraction).floor() as usize;
    if split < 2 || n - split < 2 {
        return Err(SiabfError::InsufficientData(format!(
            "split at {split} of {n} leaves fewer than 2 samples on one side"
        )));
    }
    let train = series.slice(0..split)?;
    let test = series.slice(split..n)?;
    let horizon = test.len();

    // all randomness is consumed here, before either fit
    let damaged = corrupt_traced(&train, &setup.corruption)?;

    let (control, treated) = rayon::join(
        || fit_and_predict(&train, &setup.model, horizon),
        || fit_and_predict(&damaged.series, &setup.model, horizon),
    );
    let (_, control_predictions, control_secs) = control?;
    let (_, treated_predictions, treated_secs) = treated?;

    let truth = test.values().to_vec();
    let control = forecast::evaluate(&control_predictions, &truth, setup.mape_epsilon)?
        .with_elapsed(control_secs);
    let treated = forecast::evaluate(&treated_predictions, &truth, setup.mape_epsilon)?
        .with_elapsed(treated_secs);

    let deltas = MetricDeltas {
        rmse: treated.rmse - control.rmse,
        mae: treated.mae - control.mae,
        r2: treated.r2.zip(control.r2).map(|(t, c)| t - c),
        mape_median: treated.mape_median - control.mape_median,
    };
    let relative = if control.rmse > 0.0 {
        Some(deltas.rmse / control.rmse)
    } else {
        (deltas.rmse == 0.0).then_some(0.0)
    };
    let verdict = treated.rmse <= control.rmse * (1.0 + DEGRADATION_TOLERANCE);

    Ok(RobustnessRun {
        report: RobustnessReport {
            control,
            treated,
            deltas,
            relative_rmse_change: relative,
            tolerance: DEGRADATION_TOLERANCE,
            not_significantly_weaker: verdict,
            deleted_indices: damaged.deleted,
        },
        test_times: test.times(),
        truth,
        control_predictions,
        treated_predictions,
    })
}
