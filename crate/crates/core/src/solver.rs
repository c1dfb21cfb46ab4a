//! Sparse coefficient estimation over a design matrix.
//!
//! [`fit_l1`] minimizes `(1/2n) ||y - X xi||^2 + lambda ||xi||_1` by cyclic
//! coordinate descent with covariance (Gram) updates. [`fit_stlsq`] is the
//! sequentially thresholded least-squares baseline. [`cross_validate_lambda`]
//! picks lambda on a time-ordered holdout.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::DesignMatrix;
use crate::error::{Result, SiabfError};

pub const DEFAULT_LAMBDA: f64 = 5e-4;
pub const DEFAULT_THRESHOLD: f64 = 1e-2;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

/// KKT residuals are certified against this multiple of the tolerance.
pub const KKT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    L1CoordinateDescent,
    ThresholdedLeastSquares,
}

impl std::str::FromStr for SolverKind {
    type Err = SiabfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" | "lasso" => Ok(SolverKind::L1CoordinateDescent),
            "stlsq" => Ok(SolverKind::ThresholdedLeastSquares),
            other => Err(SiabfError::InvalidInput(format!(
                "unknown solver '{other}' (expected l1 or stlsq)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCoefficients {
    pub xi: Vec<f64>,
    pub nonzero_count: usize,
    pub lambda_used: f64,
    pub threshold_used: Option<f64>,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    /// Fewer rows than columns.
    pub underdetermined: bool,
    /// A least-squares step fell back to the minimum-norm solution.
    pub rank_deficient: bool,
}

impl SparseCoefficients {
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.xi.len()).filter(|&j| self.xi[j] != 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda: f64,
    pub threshold_eps: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub cv_grid: Vec<f64>,
    pub cv_holdout_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: DEFAULT_LAMBDA,
            threshold_eps: DEFAULT_THRESHOLD,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            convergence_tol: DEFAULT_TOLERANCE,
            cv_grid: Vec::new(),
            cv_holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SiabfError::InvalidInput(msg));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.threshold_eps.is_finite() && self.threshold_eps >= 0.0) {
            return bad(format!("threshold must be >= 0, got {}", self.threshold_eps));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return bad(format!("tolerance must be > 0, got {}", self.convergence_tol));
        }
        if self.cv_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("cv grid values must be finite and >= 0".into());
        }
        if !(self.cv_holdout_fraction > 0.0 && self.cv_holdout_fraction <= 0.5) {
            return bad(format!(
                "holdout fraction must lie in (0, 0.5], got {}",
                self.cv_holdout_fraction
            ));
        }
        Ok(())
    }
}

/// Objective value after each coordinate-descent sweep.
#[derive(Debug, Clone, Default)]
pub struct DescentTrace {
    pub objective: Vec<f64>,
}

pub fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

fn check_dims(design: &DesignMatrix, target: &[f64]) -> Result<()> {
    if design.rows() != target.len() {
        return Err(SiabfError::DimensionMismatch(format!(
            "design has {} rows, target has {} values",
            design.rows(),
            target.len()
        )));
    }
    if design.rows() == 0 || design.cols() == 0 {
        return Err(SiabfError::DimensionMismatch("empty design".into()));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(SiabfError::InvalidInput("target contains non-finite values".into()));
    }
    if design.entries.iter().any(|v| !v.is_finite()) {
        return Err(SiabfError::InvalidInput("design contains non-finite values".into()));
    }
    Ok(())
}

/// `(1/2n) ||y - X xi||^2 + lambda ||xi||_1`.
pub fn l1_objective(design: &DMatrix<f64>, target: &[f64], xi: &[f64], lambda: f64) -> f64 {
    let n = target.len() as f64;
    let fitted = design * DVector::from_column_slice(xi);
    let rss: f64 = target
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    rss / (2.0 * n) + lambda * xi.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the L1 optimality conditions, using freshly
/// computed residuals.
pub fn kkt_violation(design: &DMatrix<f64>, target: &[f64], xi: &[f64], lambda: f64) -> f64 {
    let n = target.len() as f64;
    let fitted = design * DVector::from_column_slice(xi);
    let residual = DVector::from_iterator(
        target.len(),
        target.iter().zip(fitted.iter()).map(|(y, f)| y - f),
    );
    let gradient = design.tr_mul(&residual) / n;
    xi.iter()
        .zip(gradient.iter())
        .map(|(&x, &g)| {
            if x != 0.0 {
                (g - lambda * x.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn fit_l1(
    design: &DesignMatrix,
    target: &[f64],
    config: &FitConfig,
) -> Result<SparseCoefficients> {
    fit_l1_traced(design, target, config).map(|(c, _)| c)
}

pub fn fit_l1_traced(
    design: &DesignMatrix,
    target: &[f64],
    config: &FitConfig,
) -> Result<(SparseCoefficients, DescentTrace)> {
    check_dims(design, target)?;
    config.validate()?;
    let x = &design.entries;
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let lambda = config.lambda;
    let tol = config.convergence_tol;

    let gram = x.tr_mul(x) / nf;
    let y = DVector::from_column_slice(target);
    let xty = x.tr_mul(&y) / nf;
    let half_yy = y.dot(&y) / (2.0 * nf);

    let mut xi = vec![0.0; p];
    // gradient of the smooth part, negated: X^T (y - X xi) / n
    let mut q = xty.clone();
    let mut trace = DescentTrace::default();
    let objective = |xi: &[f64], q: &DVector<f64>| {
        let quad: f64 = xi
            .iter()
            .enumerate()
            .map(|(j, v)| v * (xty[j] + q[j]))
            .sum();
        half_yy - 0.5 * quad + lambda * xi.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut converged = false;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    while sweeps < config.max_iterations {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let cj = gram[(j, j)];
            if cj <= 0.0 {
                continue;
            }
            let rho = q[j] + cj * xi[j];
            let updated = soft_threshold(rho, lambda) / cj;
            let delta = updated - xi[j];
            if delta != 0.0 {
                xi[j] = updated;
                for k in 0..p {
                    q[k] -= delta * gram[(k, j)];
                }
                max_change = max_change.max(delta.abs());
            }
        }
        trace.objective.push(objective(&xi, &q));
        last_change = max_change;
        if max_change < tol {
            if kkt_violation(x, target, &xi, lambda) < KKT_FACTOR * tol {
                converged = true;
                break;
            }
            // accumulated drift in q: rebuild from scratch
            let gx = &gram * DVector::from_column_slice(&xi);
            q = &xty - gx;
        }
    }

    let coefficients = SparseCoefficients {
        nonzero_count: xi.iter().filter(|v| **v != 0.0).count(),
        xi,
        lambda_used: lambda,
        threshold_used: None,
        solver: SolverKind::L1CoordinateDescent,
        iterations: sweeps,
        converged,
        underdetermined: n < p,
        rank_deficient: false,
    };
    if !converged {
        return Err(SiabfError::NoConvergence {
            iterations: sweeps,
            last_change,
            partial: Box::new(coefficients),
        });
    }
    Ok((coefficients, trace))
}

/// Minimum-norm least squares on the selected columns.
fn restricted_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    columns: &[usize],
) -> (Vec<f64>, bool) {
    let sub = x.select_columns(columns);
    let svd = sub.svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = largest * (x.nrows().max(columns.len()) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let solution = svd
        .solve(y, cutoff)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; columns.len()]);
    (solution, rank < columns.len())
}

pub fn fit_stlsq(
    design: &DesignMatrix,
    target: &[f64],
    config: &FitConfig,
) -> Result<SparseCoefficients> {
    check_dims(design, target)?;
    config.validate()?;
    let x = &design.entries;
    let (n, p) = (x.nrows(), x.ncols());
    let y = DVector::from_column_slice(target);
    let eps = config.threshold_eps;

    let mut active: Vec<usize> = (0..p).collect();
    let mut xi = vec![0.0; p];
    let mut rank_deficient = false;
    let mut rounds = 0;
    while !active.is_empty() {
        rounds += 1;
        let (solution, deficient) = restricted_least_squares(x, &y, &active);
        rank_deficient |= deficient;
        xi.iter_mut().for_each(|v| *v = 0.0);
        for (&j, v) in active.iter().zip(&solution) {
            xi[j] = *v;
        }
        let kept: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&j| xi[j].abs() > eps)
            .collect();
        if kept.len() == active.len() {
            break;
        }
        active = kept;
        if active.is_empty() {
            xi.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    Ok(SparseCoefficients {
        nonzero_count: xi.iter().filter(|v| **v != 0.0).count(),
        xi,
        lambda_used: 0.0,
        threshold_used: Some(eps),
        solver: SolverKind::ThresholdedLeastSquares,
        iterations: rounds,
        converged: true,
        underdetermined: n < p,
        rank_deficient,
    })
}

pub fn fit_with(
    kind: SolverKind,
    design: &DesignMatrix,
    target: &[f64],
    config: &FitConfig,
) -> Result<SparseCoefficients> {
    match kind {
        SolverKind::L1CoordinateDescent => fit_l1(design, target, config),
        SolverKind::ThresholdedLeastSquares => fit_stlsq(design, target, config),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub lambda: f64,
    pub holdout_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best_lambda: f64,
    pub table: Vec<CvEntry>,
}

impl CvOutcome {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,holdout_rmse\n");
        for e in &self.table {
            out.push_str(&format!("{},{}\n", e.lambda, e.holdout_rmse));
        }
        out
    }
}

/// Time-ordered holdout search over `config.cv_grid`: the leading rows
/// train, the trailing `cv_holdout_fraction` validate. Ties go to the
/// larger lambda.
pub fn cross_validate_lambda(
    design: &DesignMatrix,
    target: &[f64],
    config: &FitConfig,
) -> Result<CvOutcome> {
    check_dims(design, target)?;
    config.validate()?;
    if config.cv_grid.is_empty() {
        return Err(SiabfError::InsufficientData("empty cross-validation grid".into()));
    }
    let n = design.rows();
    let holdout = ((n as f64 * config.cv_holdout_fraction).round() as usize).max(1);
    if holdout >= n {
        return Err(SiabfError::InsufficientData(format!(
            "{n} rows cannot be split with holdout fraction {}",
            config.cv_holdout_fraction
        )));
    }
    let split = n - holdout;
    let train = design.row_range(0..split);
    let valid = design.row_range(split..n);
    let (y_train, y_valid) = target.split_at(split);

    let table = config
        .cv_grid
        .par_iter()
        .map(|&lambda| {
            let cfg = FitConfig {
                lambda,
                ..config.clone()
            };
            let coef = fit_l1(&train, y_train, &cfg)?;
            let pred = &valid.entries * DVector::from_column_slice(&coef.xi);
            let mse = pred
                .iter()
                .zip(y_valid)
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / holdout as f64;
            Ok(CvEntry {
                lambda,
                holdout_rmse: mse.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = &table[0];
    for entry in &table[1..] {
        if entry.holdout_rmse < best.holdout_rmse
            || (entry.holdout_rmse == best.holdout_rmse && entry.lambda > best.lambda)
        {
            best = entry;
        }
    }
    Ok(CvOutcome {
        best_lambda: best.lambda,
        table,
    })
}
