//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]`
//! line naming its criterion before asserting, so
//! `cargo test --test acceptance -- --nocapture` doubles as a report.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use siabf::basis::{Column, DesignMatrix};
use siabf::forecast::{self, ModelConfig, SparseModel};
use siabf::robustness::{self, RobustnessSetup};
use siabf::solver::{self, FitConfig};
use siabf::spectrum::{self, Suitability};
use siabf::TimeSeries;

fn verdict(criterion: u32, name: &str, ok: bool, detail: &str) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {criterion}: {name} -- {detail}");
    ok
}

// ---------------------------------------------------------------------------
// shared helpers

const D: f64 = 0.01;
const TRAIN: usize = 800;
const HORIZON: usize = 200;

fn train_series(rows: &[(f64, f64)]) -> TimeSeries {
    TimeSeries::new(rows[..TRAIN].iter().map(|r| r.1).collect(), 0.0, D).unwrap()
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// (period, sin coefficient, cos coefficient) in signal units.
type PeriodTerms = (f64, f64, f64);

/// Active Fourier periods of a model keyed by period index, plus labels of
/// any active trend column.
fn active_periods(model: &SparseModel) -> (BTreeMap<usize, PeriodTerms>, Vec<String>) {
    let mut periods: BTreeMap<usize, PeriodTerms> = BTreeMap::new();
    let mut others = Vec::new();
    for (j, &c) in model.coefficients.xi.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let coef = c * model.stats.std;
        match model.spec.column(j).unwrap() {
            Column::Sin(k) => {
                periods.entry(k).or_insert((model.spec.fourier_periods[k], 0.0, 0.0)).1 = coef
            }
            Column::Cos(k) => {
                periods.entry(k).or_insert((model.spec.fourier_periods[k], 0.0, 0.0)).2 = coef
            }
            Column::Intercept => {}
            Column::Trend => others.push(model.spec.column_labels[j].clone()),
        }
    }
    (periods, others)
}

// ---------------------------------------------------------------------------
// 1

#[test]
fn criterion_1_four_tone_recovery() {
    let rows = noisy_samples(TRAIN + HORIZON, D, NOISE_SIGMA, 2024, four_tones);
    let clock = Instant::now();
    let model = forecast::fit(&train_series(&rows), &ModelConfig::default()).unwrap();
    let pred = forecast::predict(&model, HORIZON).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();

    let truth: Vec<f64> = rows[TRAIN..].iter().map(|r| r.1).collect();
    let err = rmse(&pred, &truth);

    // (period, sin coefficient, cos coefficient) of each generating term
    let generators = [
        (2.0 * PI, 5.0, 0.0),
        (PI, 0.0, 3.0),
        (2.0 * PI / 5.0, -2.3, 0.0),
        (2.0 * PI / 7.0, 0.0, 1.2),
    ];
    let (active, extra) = active_periods(&model);
    let mut support_ok = extra.is_empty() && active.len() == generators.len();
    let mut worst_coef = 0.0f64;
    for (period, s, c) in generators {
        let hit = active
            .values()
            .find(|(p, _, _)| ((p - period) / period).abs() < 1e-6);
        match hit {
            Some(&(_, fs, fc)) => {
                let (want, got) = if s != 0.0 { (s, fs) } else { (c, fc) };
                worst_coef = worst_coef.max(((got - want) / want).abs());
            }
            None => {
                support_ok = false;
                worst_coef = f64::INFINITY;
            }
        }
    }
    let found: Vec<String> = active
        .values()
        .map(|(p, s, c)| format!("T={p:.4}(sin {s:.3}, cos {c:.3})"))
        .collect();

    let ok = support_ok && worst_coef < 0.05 && err < 3.0 * NOISE_SIGMA && elapsed < 5.0;
    verdict(
        1,
        "four-tone support, coefficients, RMSE, runtime",
        ok,
        &format!(
            "support_exact={support_ok} active=[{}] extra={extra:?} worst_coef_rel={worst_coef:.3} \
             rmse={err:.4} (limit {:.2}) runtime={elapsed:.3}s",
            found.join(", "),
            3.0 * NOISE_SIGMA
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 2

#[test]
fn criterion_2_slow_tone_negative_control() {
    let rows = noisy_samples(TRAIN + HORIZON, D, NOISE_SIGMA, 7, |t| (0.5 * t).sin());
    let clock = Instant::now();
    let train = train_series(&rows);
    let report = spectrum::analyze(&train).unwrap();
    let top3 = spectrum::adaptive_periods(&report, 3).periods;
    let model = forecast::fit(&train, &ModelConfig::default()).unwrap();
    let pred = forecast::predict(&model, HORIZON).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();

    let target = 4.0 * PI;
    let nearest = top3
        .iter()
        .map(|p| ((p - target) / target).abs())
        .fold(f64::INFINITY, f64::min);
    let truth: Vec<f64> = rows[TRAIN..].iter().map(|r| r.1).collect();
    let err = rmse(&pred, &truth);

    let ok = nearest < 0.05 && err < 3.0 * NOISE_SIGMA && elapsed < 5.0;
    verdict(
        2,
        "sin(0.5t) period in top 3, RMSE, runtime",
        ok,
        &format!(
            "top3={top3:.4?} closest_rel_to_4pi={nearest:.3} rmse={err:.4} (limit {:.2}) runtime={elapsed:.3}s",
            3.0 * NOISE_SIGMA
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 3

fn direct_amplitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..spectrum::half_spectrum_len(n))
        .map(|w| {
            let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (s, v)| {
                let angle = -2.0 * PI * ((w * s) % n) as f64 / n as f64;
                (re + v * angle.cos(), im + v * angle.sin())
            });
            f64::hypot(re, im)
        })
        .collect()
}

#[test]
fn criterion_3_dft_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clock = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..=1024);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fast = spectrum::dft_spectrum(&TimeSeries::new(x.clone(), 0.0, 1.0).unwrap()).unwrap();
        let slow = direct_amplitudes(&x);
        assert_eq!(fast.amplitudes.len(), slow.len());
        for (a, b) in fast.amplitudes.iter().zip(&slow) {
            let rel = if *b == 0.0 { a.abs() } else { (a - b).abs() / b };
            worst = worst.max(rel);
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let ok = worst <= 1e-9 && elapsed < 30.0;
    verdict(
        3,
        "DFT amplitudes vs direct sum",
        ok,
        &format!("max_rel_err={worst:.3e} (limit 1e-9) runtime={elapsed:.3}s"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 4

fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DesignMatrix, Vec<f64>, f64) {
    let x = nalgebra::DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let truth: Vec<f64> = (0..p)
        .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            (0..p).map(|j| x[(i, j)] * truth[j]).sum::<f64>()
                + 0.1 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    // scale the penalty to the data so some coefficients end up at zero
    let lambda_max = (0..p)
        .map(|j| (0..n).map(|i| x[(i, j)] * y[i]).sum::<f64>().abs() / n as f64)
        .fold(0.0, f64::max);
    let lambda = lambda_max * rng.gen_range(0.01..0.6);
    (DesignMatrix::from_entries(x), y, lambda)
}

/// Coarse-to-fine exhaustive grid minimum of the L1 objective for p <= 2.
fn brute_force(design: &DesignMatrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let p = design.cols();
    let objective = |xi: &[f64]| solver::l1_objective(&design.entries, y, xi, lambda);
    let mut center = vec![0.0; p];
    for (half_width, step) in [(3.0f64, 1e-2f64), (2e-2, 1e-4)] {
        let steps = (2.0 * half_width / step).round() as i64;
        let mut best = (f64::INFINITY, center.clone());
        let axis = |c: f64, k: i64| c - half_width + k as f64 * step;
        let second = if p == 2 { steps } else { 0 };
        for a in 0..=steps {
            for b in 0..=second {
                let mut xi = vec![axis(center[0], a)];
                if p == 2 {
                    xi.push(axis(center[1], b));
                }
                let v = objective(&xi);
                if v < best.0 {
                    best = (v, xi);
                }
            }
        }
        center = best.1;
    }
    center
}

#[test]
fn criterion_4_l1_solver_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = FitConfig::default();
    let mut worst_kkt = 0.0f64;
    let mut monotone = true;
    let mut all_converged = true;
    for _ in 0..50 {
        let n = rng.gen_range(2..=200);
        let p = rng.gen_range(1..=40);
        let (design, y, lambda) = random_instance(&mut rng, n, p);
        let cfg = FitConfig { lambda, ..config.clone() };
        let (coefs, trace) = solver::fit_l1_traced(&design, &y, &cfg).unwrap();
        all_converged &= coefs.converged;
        worst_kkt = worst_kkt.max(solver::kkt_violation(&design.entries, &y, &coefs.xi, lambda));
        monotone &= trace
            .objective
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    }

    let mut worst_grid = 0.0f64;
    for p in [1usize, 1, 1, 1, 1, 2, 2, 2, 2, 2] {
        let n = rng.gen_range(8..=20);
        let (design, y, lambda) = random_instance(&mut rng, n, p);
        let cfg = FitConfig { lambda, ..config.clone() };
        let coefs = solver::fit_l1(&design, &y, &cfg).unwrap();
        let grid = brute_force(&design, &y, lambda);
        for (a, b) in coefs.xi.iter().zip(&grid) {
            worst_grid = worst_grid.max((a - b).abs());
        }
    }

    let kkt_limit = solver::KKT_FACTOR * config.convergence_tol;
    let ok = all_converged && worst_kkt < kkt_limit && worst_grid < 1e-3 && monotone;
    verdict(
        4,
        "L1 KKT, brute-force agreement, monotone objective",
        ok,
        &format!(
            "converged={all_converged} max_kkt={worst_kkt:.2e} (limit {kkt_limit:.0e}) \
             max_grid_diff={worst_grid:.2e} (limit 1e-3) monotone={monotone}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 5

#[test]
fn criterion_5_quasi_periodic_index() {
    let tone = TimeSeries::from_fn(256, 0.0, 1.0, |t| (2.0 * PI * 16.0 * t / 256.0).sin()).unwrap();
    let tone_index = spectrum::analyze(&tone).unwrap().quasi_periodic_index.unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<f64> = (0..1024).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let noise_index = spectrum::analyze(&TimeSeries::new(noise, 0.0, 1.0).unwrap())
        .unwrap()
        .quasi_periodic_index
        .unwrap();

    let flat_index = spectrum::quasi_periodic_index_sorted(&[2.5; 64]).unwrap();

    let classes_ok = spectrum::classify_suitability(0.8).unwrap() == Suitability::ModelBasedFavored
        && spectrum::classify_suitability(0.95).unwrap() == Suitability::ModelBasedFavored
        && spectrum::classify_suitability(0.5).unwrap() == Suitability::DataDrivenFavored
        && spectrum::classify_suitability(0.1).unwrap() == Suitability::DataDrivenFavored
        && spectrum::classify_suitability(0.65).unwrap() == Suitability::Contested
        && spectrum::classify_suitability(0.8 - 1e-12).unwrap() == Suitability::Contested
        && spectrum::classify_suitability(0.5 + 1e-12).unwrap() == Suitability::Contested;

    let ok = tone_index >= 0.95 && noise_index < 0.5 && flat_index == 0.0 && classes_ok;
    verdict(
        5,
        "quasi-periodic index and suitability thresholds",
        ok,
        &format!(
            "tone={tone_index:.4} (>=0.95) noise={noise_index:.4} (<0.5) flat={flat_index} (==0) \
             thresholds_ok={classes_ok}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 6

#[test]
fn criterion_6_no_error_accumulation() {
    let tone = |t: f64| (2.0 * PI * t / 25.0).sin();
    let series = TimeSeries::from_fn(200, 0.0, 1.0, tone).unwrap();
    let model = forecast::fit(&series, &ModelConfig::default()).unwrap();
    let steps = 10_000;
    let once = forecast::predict(&model, steps).unwrap();
    let worst = once
        .iter()
        .enumerate()
        .map(|(k, p)| (p - tone(model.horizon_time(k as u64 + 1))).abs())
        .fold(0.0, f64::max);

    let mut chunked = Vec::with_capacity(steps);
    let mut first = 1u64;
    for size in [1usize, 7, 992, 3000, 6000] {
        chunked.extend(forecast::predict_steps(&model, first, size).unwrap());
        first += size as u64;
    }
    let bit_exact = chunked.len() == once.len()
        && chunked.iter().zip(&once).all(|(a, b)| a.to_bits() == b.to_bits());

    let ok = worst < 1e-3 && bit_exact;
    verdict(
        6,
        "10000-step tone forecast and chunked equality",
        ok,
        &format!("max_abs_err={worst:.3e} (limit 1e-3) chunked_bit_exact={bit_exact}"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 7

#[test]
fn criterion_7_robustness_on_four_tones() {
    let rows = noisy_samples(TRAIN + HORIZON, D, NOISE_SIGMA, 2024, four_tones);
    let series = TimeSeries::new(rows.iter().map(|r| r.1).collect(), 0.0, D).unwrap();
    let run = robustness::run_robustness(&series, &RobustnessSetup::default()).unwrap();
    let r = &run.report;
    let change = r.relative_rmse_change;
    let ok = matches!(change, Some(c) if c < 0.1);
    verdict(
        7,
        "5% deletion + 5% noise degrades RMSE by < 10%",
        ok,
        &format!(
            "control_rmse={:.4} treated_rmse={:.4} relative_change={}",
            r.control.rmse,
            r.treated.rmse,
            change.map_or("undefined".into(), |c| format!("{:+.2}%", 100.0 * c))
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 8

#[test]
fn criterion_8_metric_identities() {
    let truth = [1.0, 2.0, 4.0, 8.0];
    let perfect = forecast::evaluate(&truth, &truth, 1e-8).unwrap();
    let perfect_ok = perfect.rmse == 0.0
        && perfect.mae == 0.0
        && perfect.r2 == Some(1.0)
        && perfect.mape_median == 0.0;

    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let mean_r2 = forecast::evaluate(&[mean; 4], &truth, 1e-8).unwrap().r2.unwrap();
    let mean_ok = mean_r2.abs() < 1e-15;

    // APE percents: |10-11|/10 = 10, |20-18|/20 = 10, |40-30|/40 = 25,
    // |50-50|/50 = 0, |100-80|/100 = 20 -> sorted 0,10,10,20,25 -> median 10
    let ape = forecast::evaluate(
        &[11.0, 18.0, 30.0, 50.0, 80.0],
        &[10.0, 20.0, 40.0, 50.0, 100.0],
        1e-8,
    )
    .unwrap()
    .mape_median;
    let ape_ok = (ape - 10.0).abs() < 1e-6;

    let ok = perfect_ok && mean_ok && ape_ok;
    verdict(
        8,
        "metric identities",
        ok,
        &format!("perfect_ok={perfect_ok} mean_predictor_r2={mean_r2:e} median_ape={ape} (want 10)"),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 9

fn artifacts(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        // wall-clock fields are the only permitted difference
        let kept: String = text
            .lines()
            .filter(|l| !l.contains("\"elapsed_seconds\""))
            .map(|l| format!("{l}\n"))
            .collect();
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), kept);
    }
    files
}

fn run_all_commands(input: &Path, out: &Path) {
    let (i, o) = (path_str(input), path_str(out));
    let commands: Vec<Vec<&str>> = vec![
        vec!["analyze", "--input", i, "--out", o, "--q", "10"],
        vec!["fit", "--input", i, "--out", o, "--q", "10", "--cv-grid", "1e-4,1e-3,1e-2"],
        vec!["predict", "--out", o, "--horizon", "200"],
        vec!["evaluate", "--truth", i, "--out", o],
        vec!["robustness", "--input", i, "--out", o, "--q", "10", "--seed", "7"],
    ];
    for args in commands {
        let run = siabf(&args);
        assert!(run.status.success(), "{args:?}: {}", stderr(&run));
    }
}

#[test]
fn criterion_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("four_tones.csv");
    // 200 samples so the evaluate step lines up with the 200-step forecast
    write_csv(&input, &noisy_samples(200, D, NOISE_SIGMA, 9, four_tones));

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all_commands(&input, &a);
    run_all_commands(&input, &b);
    let (first, second) = (artifacts(&a), artifacts(&b));

    let differing: Vec<&String> = first
        .keys()
        .filter(|k| first.get(*k) != second.get(*k))
        .collect();
    let ok = first.len() >= 8 && first.keys().eq(second.keys()) && differing.is_empty();
    verdict(
        9,
        "CLI artifacts byte-identical across runs",
        ok,
        &format!("files={:?} differing={differing:?}", first.keys().collect::<Vec<_>>()),
    );
    assert!(ok);
}
