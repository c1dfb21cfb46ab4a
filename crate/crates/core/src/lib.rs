//! Sparse system identification with adaptive Fourier basis functions.
//!
//! The pipeline finds dominant periods in a series' DFT, builds a sin/cos
//! dictionary from them, selects a sparse set of terms with an L1 (or
//! thresholded least-squares) fit, and forecasts by evaluating the fitted
//! function of time directly, so long horizons do not accumulate error.
//!
//! ```no_run
//! use siabf::{forecast, timeseries};
//!
//! let series = timeseries::ingest_csv("data.csv", "time", "value")?;
//! let series = timeseries::interpolate_gaps(&series)?;
//! let model = forecast::fit(&series, &forecast::ModelConfig::default())?;
//! let next = forecast::predict(&model, 100)?;
//! # Ok::<(), siabf::SiabfError>(())
//! ```

pub mod basis;
pub mod error;
pub mod forecast;
pub mod robustness;
pub mod solver;
pub mod spectrum;
pub mod timeseries;

pub use basis::{BasisSpec, DesignMatrix};
pub use error::{Result, SiabfError};
pub use forecast::{EvaluationReport, ModelConfig, SparseModel};
pub use robustness::{CorruptionConfig, RobustnessReport, RobustnessSetup};
pub use solver::{FitConfig, SolverKind, SparseCoefficients};
pub use spectrum::{AdaptivePeriods, SpectrumReport, Suitability};
pub use timeseries::{StandardizationStats, TimeSeries};
