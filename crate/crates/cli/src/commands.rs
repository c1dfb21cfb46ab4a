use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use siabf::basis::format_period;
use siabf::forecast::{self, SparseModel};
use siabf::robustness;
use siabf::spectrum::{self, SpectrumReport, Suitability};
use siabf::timeseries::{self, TimeSeries};
use siabf::{Result, SiabfError};

use crate::config::RunConfig;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SiabfError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SiabfError::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| SiabfError::Internal(e.to_string()))
}

/// Reads the configured input and fills any gaps.
fn load_series(config: &RunConfig) -> Result<TimeSeries> {
    let raw = timeseries::ingest_csv(&config.input, &config.time_col, &config.value_col)?;
    if raw.has_gaps() {
        eprintln!("note: interpolating {} missing sample(s)", raw.gap_count());
    }
    timeseries::interpolate_gaps(&raw)
}

#[derive(Serialize)]
struct PeriodRow {
    rank: usize,
    bin: usize,
    frequency: f64,
    period: f64,
    period_samples: f64,
    amplitude: f64,
    annotation: String,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    input: String,
    spectrum: &'a SpectrumReport,
    quasi_periodic_index: f64,
    suitability: Suitability,
    top_periods: Vec<PeriodRow>,
}

pub fn analyze(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    let report = spectrum::analyze(&series)?;
    let index = report
        .quasi_periodic_index
        .ok_or_else(|| SiabfError::Internal("index missing".into()))?;
    let suitability = spectrum::classify_suitability(index)?;
    let periods = spectrum::adaptive_periods(&report, config.model.q);
    let d = series.sample_interval();
    let rows: Vec<PeriodRow> = periods
        .periods
        .iter()
        .zip(&periods.source_bins)
        .zip(&periods.source_amplitudes)
        .enumerate()
        .map(|(i, ((&period, &bin), &amplitude))| {
            let samples = period / d;
            PeriodRow {
                rank: i + 1,
                bin,
                frequency: report.frequencies[bin],
                period,
                period_samples: samples,
                amplitude,
                annotation: format!(
                    "period {} samples ({} time units)",
                    format_period(samples),
                    format_period(period)
                ),
            }
        })
        .collect();

    prepare_out(&config.out)?;
    let mut diagram = String::from("rank,amplitude\n");
    for (rank, &bin) in report.sorted_ranks.iter().enumerate() {
        let _ = writeln!(diagram, "{},{}", rank + 1, report.amplitudes[bin]);
    }
    write_file(&config.out.join("sorting_diagram.csv"), &diagram)?;

    let mut table = String::from("rank,bin,frequency,period,period_samples,amplitude\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{}",
            r.rank, r.bin, r.frequency, r.period, r.period_samples, r.amplitude
        );
    }
    write_file(&config.out.join("periods.csv"), &table)?;

    println!("series: {} samples, interval {}", series.len(), d);
    println!("{:>5}  {:>14}  {:>14}  annotation", "rank", "period", "amplitude");
    for r in rows.iter().take(10) {
        println!(
            "{:>5}  {:>14}  {:>14.6}  {}",
            r.rank,
            format_period(r.period),
            r.amplitude,
            r.annotation
        );
    }
    if rows.len() > 10 {
        println!("  ... {} more in periods.csv", rows.len() - 10);
    }
    println!("quasi-periodic index I10 = {index:.4} ({suitability})");

    let out = AnalyzeReport {
        input: config.input.display().to_string(),
        spectrum: &report,
        quasi_periodic_index: index,
        suitability,
        top_periods: rows,
    };
    write_file(&config.out.join("spectrum.json"), &to_json(&out)?)
}

pub fn fit(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    let clock = Instant::now();
    let model = forecast::fit(&series, &config.model)?;
    let elapsed = clock.elapsed().as_secs_f64();

    prepare_out(&config.out)?;
    model.save(config.out.join("model.json"))?;

    if let Some(cv) = &model.cross_validation {
        write_file(&config.out.join("cv_table.csv"), &cv.to_csv())?;
        println!("{:>14}  {:>14}", "lambda", "holdout RMSE");
        for e in &cv.table {
            println!("{:>14e}  {:>14.6}", e.lambda, e.holdout_rmse);
        }
        println!("chosen lambda: {:e}", cv.best_lambda);
    }
    print_model(&model);
    println!("elapsed: {elapsed:.3}s");
    Ok(())
}

fn print_model(model: &SparseModel) {
    let c = &model.coefficients;
    println!(
        "solver {:?}, lambda {:e}, {} of {} terms active",
        c.solver,
        c.lambda_used,
        c.nonzero_count,
        c.xi.len()
    );
    println!("{:>20}  {:>14}", "term", "coefficient");
    for term in model.active_terms() {
        println!("{:>20}  {:>14.6}", term.label, term.coefficient);
    }
    let s = &model.spectrum_summary;
    println!(
        "quasi-periodic index I10 = {:.4} ({})",
        s.quasi_periodic_index, s.suitability
    );
}

pub fn predict(config: &RunConfig, model_path: Option<&PathBuf>) -> Result<()> {
    let default_path = config.out.join("model.json");
    let path = model_path.unwrap_or(&default_path);
    let model = SparseModel::load(path)?;
    let predictions = forecast::predict(&model, config.horizon)?;

    prepare_out(&config.out)?;
    let mut csv = String::from("time,prediction\n");
    for (k, p) in predictions.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", model.horizon_time(k as u64 + 1), p);
    }
    write_file(&config.out.join("predictions.csv"), &csv)?;
    println!(
        "wrote {} predictions from t = {} to t = {}",
        predictions.len(),
        model.horizon_time(1),
        model.horizon_time(predictions.len() as u64)
    );
    Ok(())
}

pub fn evaluate(
    config: &RunConfig,
    predictions_path: Option<&PathBuf>,
    prediction_col: &str,
    truth_path: Option<&PathBuf>,
) -> Result<()> {
    let default_predictions = config.out.join("predictions.csv");
    let predictions_path = predictions_path.unwrap_or(&default_predictions);
    let truth_path = truth_path.unwrap_or(&config.input);
    let predictions = timeseries::ingest_csv(predictions_path, &config.time_col, prediction_col)?;
    let truth = timeseries::ingest_csv(truth_path, &config.time_col, &config.value_col)?;
    for (name, s) in [("predictions", &predictions), ("truth", &truth)] {
        if s.has_gaps() {
            return Err(SiabfError::InvalidInput(format!(
                "{name} file has {} missing rows",
                s.gap_count()
            )));
        }
    }
    let report = forecast::evaluate(predictions.values(), truth.values(), config.mape_eps)?;

    prepare_out(&config.out)?;
    write_file(&config.out.join("metrics.json"), &to_json(&report)?)?;
    println!("{}", report.summary_line());
    Ok(())
}

pub fn robustness(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    let run = robustness::run_robustness(&series, &config.robustness_setup())?;

    prepare_out(&config.out)?;
    write_file(&config.out.join("robustness.json"), &to_json(&run.report)?)?;
    write_file(&config.out.join("robustness_traces.csv"), &run.traces_csv())?;

    let r = &run.report;
    println!("control: {}", r.control.summary_line());
    println!("treated: {}", r.treated.summary_line());
    match r.relative_rmse_change {
        Some(change) => println!("relative RMSE change: {:+.2}%", 100.0 * change),
        None => println!("relative RMSE change: undefined (exact control)"),
    }
    println!(
        "verdict: {}",
        if r.not_significantly_weaker {
            "not significantly weaker (robust)"
        } else {
            "significantly weaker"
        }
    );
    Ok(())
}
