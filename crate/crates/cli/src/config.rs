//! Run configuration: command-line flags over an optional JSON config file
//! over built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use siabf::forecast::{ModelConfig, DEFAULT_MAPE_EPSILON};
use siabf::robustness::{CorruptionConfig, RobustnessSetup};
use siabf::solver::{self, FitConfig, SolverKind};
use siabf::spectrum::DEFAULT_Q;
use siabf::{Result, SiabfError};

pub const DEFAULT_INPUT: &str = "data.csv";
pub const DEFAULT_OUT: &str = "siabf_out";
pub const DEFAULT_HORIZON: usize = 100;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_SEED: u64 = 42;

/// One layer of settings. Every field is optional so layers can be merged.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigLayer {
    /// Input CSV [default: data.csv]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Time column name [default: time]
    #[arg(long)]
    pub time_col: Option<String>,
    /// Value column name [default: value]
    #[arg(long)]
    pub value_col: Option<String>,
    /// Number of adaptive periods taken from the spectrum [default: 50]
    #[arg(long)]
    pub q: Option<usize>,
    /// L1 penalty weight [default: 5e-4]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated lambda grid; enables time-ordered cross-validation
    #[arg(long, value_delimiter = ',')]
    pub cv_grid: Option<Vec<f64>>,
    /// Fraction of rows held out for cross-validation [default: 0.2]
    #[arg(long)]
    pub cv_holdout: Option<f64>,
    /// Solver: l1 or stlsq [default: l1]
    #[arg(long)]
    pub solver: Option<String>,
    /// STLSQ coefficient threshold [default: 1e-2]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Linear trend column: 0 or 1 [default: 1]
    #[arg(long)]
    pub trend: Option<u8>,
    /// Drop the intercept column
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_intercept: Option<bool>,
    /// Coordinate-descent sweep limit [default: 10000]
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Coordinate-descent tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Prediction horizon in samples [default: 100]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Training prefix fraction for the robustness split [default: 0.8]
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// MAPE denominator epsilon [default: 1e-8]
    #[arg(long)]
    pub mape_eps: Option<f64>,
    /// Fraction of training samples deleted in the robustness run [default: 0.05]
    #[arg(long)]
    pub delete_frac: Option<f64>,
    /// Uniform noise half-width as a fraction of training std [default: 0.05]
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// RNG seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: siabf_out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        ConfigLayer { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl ConfigLayer {
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        overlay!(
            self, lower, input, time_col, value_col, q, lambda, cv_grid, cv_holdout, solver,
            threshold, trend, no_intercept, max_iterations, tol, horizon, train_fraction,
            mape_eps, delete_frac, noise_scale, seed, out
        )
    }

    pub fn from_file(path: &Path) -> Result<ConfigLayer> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SiabfError::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            SiabfError::InvalidInput(format!("bad config {}: {e}", path.display()))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub time_col: String,
    pub value_col: String,
    pub model: ModelConfig,
    pub horizon: usize,
    pub train_fraction: f64,
    pub mape_eps: f64,
    pub corruption: CorruptionConfig,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(layer: ConfigLayer) -> Result<RunConfig> {
        let solver = match layer.solver.as_deref() {
            Some(s) => s.parse()?,
            None => SolverKind::L1CoordinateDescent,
        };
        let fit = FitConfig {
            lambda: layer.lambda.unwrap_or(solver::DEFAULT_LAMBDA),
            threshold_eps: layer.threshold.unwrap_or(solver::DEFAULT_THRESHOLD),
            max_iterations: layer.max_iterations.unwrap_or(solver::DEFAULT_MAX_ITERATIONS),
            convergence_tol: layer.tol.unwrap_or(solver::DEFAULT_TOLERANCE),
            cv_grid: layer.cv_grid.unwrap_or_default(),
            cv_holdout_fraction: layer.cv_holdout.unwrap_or(solver::DEFAULT_HOLDOUT_FRACTION),
        };
        fit.validate()?;
        let config = RunConfig {
            input: layer.input.unwrap_or_else(|| DEFAULT_INPUT.into()),
            time_col: layer.time_col.unwrap_or_else(|| "time".into()),
            value_col: layer.value_col.unwrap_or_else(|| "value".into()),
            model: ModelConfig {
                q: layer.q.unwrap_or(DEFAULT_Q),
                solver,
                fit,
                include_intercept: !layer.no_intercept.unwrap_or(false),
                trend_degree: layer.trend.unwrap_or(1),
            },
            horizon: layer.horizon.unwrap_or(DEFAULT_HORIZON),
            train_fraction: layer.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION),
            mape_eps: layer.mape_eps.unwrap_or(DEFAULT_MAPE_EPSILON),
            corruption: CorruptionConfig {
                deletion_fraction: layer.delete_frac.unwrap_or(0.05),
                noise_scale: layer.noise_scale.unwrap_or(0.05),
                rng_seed: layer.seed.unwrap_or(DEFAULT_SEED),
            },
            out: layer.out.unwrap_or_else(|| DEFAULT_OUT.into()),
        };
        if config.model.q == 0 {
            return Err(SiabfError::InvalidInput("--q must be at least 1".into()));
        }
        if config.model.trend_degree > 1 {
            return Err(SiabfError::InvalidInput("--trend must be 0 or 1".into()));
        }
        if config.horizon == 0 {
            return Err(SiabfError::InvalidInput("--horizon must be at least 1".into()));
        }
        if !(config.mape_eps > 0.0) {
            return Err(SiabfError::InvalidInput("--mape-eps must be positive".into()));
        }
        config.corruption.validate()?;
        Ok(config)
    }

    pub fn robustness_setup(&self) -> RobustnessSetup {
        RobustnessSetup {
            train_fraction: self.train_fraction,
            model: self.model.clone(),
            corruption: self.corruption,
            mape_epsilon: self.mape_eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_layers_give_defaults() {
        let cfg = RunConfig::resolve(ConfigLayer::default()).unwrap();
        assert_eq!(cfg.input, PathBuf::from("data.csv"));
        assert_eq!(cfg.model, ModelConfig::default());
        assert_eq!(cfg.horizon, DEFAULT_HORIZON);
        assert_eq!(cfg.corruption, CorruptionConfig::default());
        assert_eq!(cfg.out, PathBuf::from("siabf_out"));
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: ConfigLayer =
            serde_json::from_str(r#"{"q": 7, "lambda": 0.01, "solver": "stlsq"}"#).unwrap();
        let flags = ConfigLayer {
            q: Some(3),
            ..ConfigLayer::default()
        };
        let cfg = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(cfg.model.q, 3);
        assert_eq!(cfg.model.fit.lambda, 0.01);
        assert_eq!(cfg.model.solver, SolverKind::ThresholdedLeastSquares);
        assert_eq!(cfg.horizon, DEFAULT_HORIZON);
    }

    #[test]
    fn rejects_bad_values() {
        for layer in [
            ConfigLayer { q: Some(0), ..Default::default() },
            ConfigLayer { solver: Some("omp".into()), ..Default::default() },
            ConfigLayer { lambda: Some(-1.0), ..Default::default() },
            ConfigLayer { delete_frac: Some(0.9), ..Default::default() },
            ConfigLayer { trend: Some(2), ..Default::default() },
        ] {
            assert!(RunConfig::resolve(layer).is_err());
        }
        assert!(serde_json::from_str::<ConfigLayer>(r#"{"bogus": 1}"#).is_err());
    }
}
