//! Adaptive dictionary: one sin/cos pair per selected period, then an
//! optional intercept and an optional linear trend.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SiabfError};
use crate::spectrum::AdaptivePeriods;

const DUPLICATE_PERIOD_TOLERANCE: f64 = 1e-12;

/// Affine map `t -> (t - origin) / span` for the trend column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendWindow {
    pub origin: f64,
    pub span: f64,
}

impl TrendWindow {
    pub fn new(start: f64, end: f64) -> Self {
        let span = end - start;
        TrendWindow {
            origin: start,
            span: if span > 0.0 { span } else { 1.0 },
        }
    }

    fn apply(&self, t: f64) -> f64 {
        (t - self.origin) / self.span
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub fourier_periods: Vec<f64>,
    pub include_intercept: bool,
    pub trend_degree: u8,
    pub column_labels: Vec<String>,
    /// Fixed from the training grid; absent until a window is anchored.
    pub trend_window: Option<TrendWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Sin(usize),
    Cos(usize),
    Intercept,
    Trend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub entries: DMatrix<f64>,
    pub time_grid: Vec<f64>,
    pub spec: BasisSpec,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Wraps a raw matrix, e.g. a hand-built dictionary for solver tests.
    pub fn from_entries(entries: DMatrix<f64>) -> Self {
        let labels = (0..entries.ncols()).map(|j| format!("x{j}")).collect();
        let time_grid = (0..entries.nrows()).map(|i| i as f64).collect();
        DesignMatrix {
            entries,
            time_grid,
            spec: BasisSpec {
                fourier_periods: vec![],
                include_intercept: false,
                trend_degree: 0,
                column_labels: labels,
                trend_window: None,
            },
        }
    }

    /// Leading or trailing block of rows.
    pub fn row_range(&self, range: std::ops::Range<usize>) -> DesignMatrix {
        DesignMatrix {
            entries: self.entries.rows(range.start, range.len()).into_owned(),
            time_grid: self.time_grid[range].to_vec(),
            spec: self.spec.clone(),
        }
    }
}

/// Compact period text for labels: up to 6 significant digits.
pub fn format_period(period: f64) -> String {
    let magnitude = period.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 15) as usize;
    let s = format!("{:.*}", decimals, period);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn build_spec(
    periods: &AdaptivePeriods,
    include_intercept: bool,
    trend_degree: u8,
) -> Result<BasisSpec> {
    BasisSpec::new(&periods.periods, include_intercept, trend_degree)
}

impl BasisSpec {
    pub fn new(periods: &[f64], include_intercept: bool, trend_degree: u8) -> Result<Self> {
        if trend_degree > 1 {
            return Err(SiabfError::InvalidInput(format!(
                "trend degree must be 0 or 1, got {trend_degree}"
            )));
        }
        let mut kept: Vec<f64> = Vec::with_capacity(periods.len());
        for &t in periods {
            if !(t.is_finite() && t > 0.0) {
                return Err(SiabfError::InvalidInput(format!(
                    "period must be positive and finite, got {t}"
                )));
            }
            let duplicate = kept
                .iter()
                .any(|k| (k - t).abs() <= DUPLICATE_PERIOD_TOLERANCE * k.abs().max(t.abs()));
            if !duplicate {
                kept.push(t);
            }
        }
        let mut labels = Vec::with_capacity(2 * kept.len() + 2);
        for t in &kept {
            let t = format_period(*t);
            labels.push(format!("sin T={t}"));
            labels.push(format!("cos T={t}"));
        }
        if include_intercept {
            labels.push("1".to_string());
        }
        if trend_degree == 1 {
            labels.push("t".to_string());
        }
        if labels.is_empty() {
            return Err(SiabfError::EmptySpec);
        }
        Ok(BasisSpec {
            fourier_periods: kept,
            include_intercept,
            trend_degree,
            column_labels: labels,
            trend_window: None,
        })
    }

    pub fn column_count(&self) -> usize {
        2 * self.fourier_periods.len() + usize::from(self.include_intercept) + self.trend_degree as usize
    }

    pub fn column(&self, j: usize) -> Option<Column> {
        let fourier = 2 * self.fourier_periods.len();
        if j < fourier {
            return Some(if j.is_multiple_of(2) {
                Column::Sin(j / 2)
            } else {
                Column::Cos(j / 2)
            });
        }
        let mut k = j - fourier;
        if self.include_intercept {
            if k == 0 {
                return Some(Column::Intercept);
            }
            k -= 1;
        }
        (self.trend_degree == 1 && k == 0).then_some(Column::Trend)
    }

    pub fn anchor_trend(&mut self, start: f64, end: f64) {
        self.trend_window = Some(TrendWindow::new(start, end));
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.column_labels.len() != self.column_count() {
            return Err(SiabfError::InvalidModel(format!(
                "{} labels for {} columns",
                self.column_labels.len(),
                self.column_count()
            )));
        }
        if self.trend_degree > 1 {
            return Err(SiabfError::InvalidModel("trend degree above 1".into()));
        }
        if self
            .fourier_periods
            .iter()
            .any(|t| !(t.is_finite() && *t > 0.0))
        {
            return Err(SiabfError::InvalidModel("non-positive period".into()));
        }
        if let Some(w) = self.trend_window {
            if !(w.origin.is_finite() && w.span.is_finite() && w.span > 0.0) {
                return Err(SiabfError::InvalidModel("bad trend window".into()));
            }
        }
        Ok(())
    }

    /// Writes the basis row at `t` into `row` (length = column count).
    pub(crate) fn fill_row(&self, t: f64, window: TrendWindow, row: &mut [f64]) {
        let mut j = 0;
        for period in &self.fourier_periods {
            let (s, c) = (2.0 * PI * t / period).sin_cos();
            row[j] = s;
            row[j + 1] = c;
            j += 2;
        }
        if self.include_intercept {
            row[j] = 1.0;
            j += 1;
        }
        if self.trend_degree == 1 {
            row[j] = window.apply(t);
        }
    }

    fn window_for(&self, grid: &[f64]) -> TrendWindow {
        self.trend_window
            .unwrap_or_else(|| TrendWindow::new(grid[0], grid[grid.len() - 1]))
    }

    /// `sum_j theta_j(t) * coefficients_j`, accumulated in column order.
    pub fn combine(&self, t: f64, coefficients: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.column_count(), 0.0);
        let window = self.trend_window.unwrap_or(TrendWindow { origin: 0.0, span: 1.0 });
        self.fill_row(t, window, scratch);
        scratch
            .iter()
            .zip(coefficients)
            .fold(0.0, |acc, (x, c)| acc + x * c)
    }
}

/// Evaluates every column of `spec` on `time_grid`.
///
/// Without an anchored trend window the grid itself is treated as the
/// training window.
pub fn evaluate(spec: &BasisSpec, time_grid: &[f64]) -> Result<DesignMatrix> {
    if time_grid.is_empty() {
        return Err(SiabfError::InvalidInput("empty time grid".into()));
    }
    if let Some(t) = time_grid.iter().find(|t| !t.is_finite()) {
        return Err(SiabfError::InvalidInput(format!("non-finite time {t}")));
    }
    let p = spec.column_count();
    let window = spec.window_for(time_grid);
    let mut entries = DMatrix::zeros(time_grid.len(), p);
    let mut row = vec![0.0; p];
    for (i, &t) in time_grid.iter().enumerate() {
        spec.fill_row(t, window, &mut row);
        for (j, v) in row.iter().enumerate() {
            entries[(i, j)] = *v;
        }
    }
    let mut spec = spec.clone();
    spec.trend_window = Some(window);
    Ok(DesignMatrix {
        entries,
        time_grid: time_grid.to_vec(),
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn periods(p: &[f64]) -> AdaptivePeriods {
        AdaptivePeriods {
            periods: p.to_vec(),
            source_bins: (1..=p.len()).collect(),
            source_amplitudes: vec![1.0; p.len()],
        }
    }

    #[test]
    fn column_count_and_labels() {
        let spec = build_spec(&periods(&[25.0]), true, 1).unwrap();
        assert_eq!(spec.column_count(), 4);
        assert_eq!(spec.column_labels, vec!["sin T=25", "cos T=25", "1", "t"]);

        let spec = build_spec(&periods(&[365.0, 1460.0, 2920.0]), true, 0).unwrap();
        assert_eq!(spec.column_count(), 7);

        assert!(matches!(
            build_spec(&periods(&[]), false, 0),
            Err(SiabfError::EmptySpec)
        ));
        assert!(build_spec(&periods(&[]), false, 2).is_err());
        assert!(build_spec(&periods(&[0.0]), true, 0).is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let spec = BasisSpec::new(&[10.0, 10.0 * (1.0 + 1e-14), 5.0], false, 0).unwrap();
        assert_eq!(spec.fourier_periods, vec![10.0, 5.0]);
        assert_eq!(spec.column_count(), 4);
    }

    #[test]
    fn period_labels_are_compact() {
        assert_eq!(format_period(25.0), "25");
        assert_eq!(format_period(8.0 / 3.0), "2.66667");
        assert_eq!(format_period(2920.0), "2920");
        assert_eq!(format_period(0.125), "0.125");
    }

    #[test]
    fn intercept_column() {
        let spec = BasisSpec::new(&[], true, 0).unwrap();
        let m = evaluate(&spec, &[0.0, 7.0, 42.0]).unwrap();
        assert_eq!(m.entries, DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn quarter_period_values() {
        let spec = BasisSpec::new(&[4.0], false, 0).unwrap();
        let m = evaluate(&spec, &[0.0, 1.0, 2.0]).unwrap();
        let expect_sin = [0.0, 1.0, 0.0];
        let expect_cos = [1.0, 0.0, -1.0];
        for i in 0..3 {
            assert!((m.entries[(i, 0)] - expect_sin[i]).abs() < 1e-12);
            assert!((m.entries[(i, 1)] - expect_cos[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_per_entry_evaluation() {
        let spec = BasisSpec::new(&[25.0], true, 1).unwrap();
        let grid: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let m = evaluate(&spec, &grid).unwrap();
        assert_eq!((m.rows(), m.cols()), (100, 4));
        for (i, &t) in grid.iter().enumerate() {
            let angle = 2.0 * std::f64::consts::PI * t / 25.0;
            assert!((m.entries[(i, 0)] - angle.sin()).abs() < 1e-12);
            assert!((m.entries[(i, 1)] - angle.cos()).abs() < 1e-12);
            assert_eq!(m.entries[(i, 2)], 1.0);
            assert!((m.entries[(i, 3)] - t / 99.0).abs() < 1e-12);
        }
        // four whole periods: Fourier columns orthogonal to each other and the intercept
        let col = |j: usize| m.entries.column(j).into_owned();
        assert!(col(0).dot(&col(1)).abs() < 1e-9);
        assert!(col(0).dot(&col(2)).abs() < 1e-9);
        assert!(col(1).dot(&col(2)).abs() < 1e-9);
    }

    #[test]
    fn anchored_trend_extrapolates() {
        let mut spec = BasisSpec::new(&[], false, 1).unwrap();
        spec.anchor_trend(0.0, 10.0);
        let m = evaluate(&spec, &[10.0, 15.0, 20.0]).unwrap();
        assert_eq!(m.entries.column(0).as_slice(), &[1.0, 1.5, 2.0]);
    }

    #[test]
    fn column_roles() {
        let spec = BasisSpec::new(&[3.0, 2.0], true, 1).unwrap();
        assert_eq!(spec.column(0), Some(Column::Sin(0)));
        assert_eq!(spec.column(3), Some(Column::Cos(1)));
        assert_eq!(spec.column(4), Some(Column::Intercept));
        assert_eq!(spec.column(5), Some(Column::Trend));
        assert_eq!(spec.column(6), None);
    }

    proptest! {
        #[test]
        fn fourier_columns_are_periodic_and_bounded(
            period in 0.1f64..1000.0,
            t in -1000.0f64..1000.0,
        ) {
            let spec = BasisSpec::new(&[period], false, 0).unwrap();
            let m = evaluate(&spec, &[t, t + period]).unwrap();
            for j in 0..2 {
                prop_assert!((m.entries[(0, j)] - m.entries[(1, j)]).abs() < 1e-9);
                prop_assert!(m.entries[(0, j)].abs() <= 1.0);
            }
        }

        #[test]
        fn column_count_formula(
            ps in prop::collection::vec(0.5f64..100.0, 0..8),
            intercept in any::<bool>(),
            trend in 0u8..2,
        ) {
            if let Ok(spec) = BasisSpec::new(&ps, intercept, trend) {
                prop_assert_eq!(
                    spec.column_count(),
                    2 * spec.fourier_periods.len() + usize::from(intercept) + trend as usize
                );
                prop_assert_eq!(spec.column_labels.len(), spec.column_count());
                let grid: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
                let a = evaluate(&spec, &grid).unwrap();
                let b = evaluate(&spec, &grid).unwrap();
                prop_assert_eq!(a.entries.ncols(), spec.column_count());
                prop_assert!(a.entries.iter().zip(b.entries.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
