//! Multi-day stability study: does the relative delay between detectors
//! stay fixed while the absolute arrival wanders?
//!
//! Each simulated day the common-mode arrival takes one step of a bounded
//! random walk (temperature-like drift) and every detector's path picks up
//! independent Gaussian jitter; a full legacy calibration then measures each
//! detector's window. The emitted series is the in-silico counterpart of a
//! long-running hardware log of per-detector signal windows.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qsync_core::syncplan::legacy_traversal;
use qsync_core::{LocalSource, SourceError, TimePs};

use crate::config::ScenarioConfig;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    pub days: u32,
    /// Reflective bound of the common-mode walk around the starting arrival.
    pub amplitude_ps: i64,
    /// Maximum per-day step of the walk (uniform in `[-step, step]`).
    pub daily_step_ps: i64,
    /// Per-detector, per-day timing jitter (standard deviation).
    pub jitter_ps: f64,
    pub seed: u64,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams {
            days: 16,
            amplitude_ps: 200,
            daily_step_ps: 60,
            jitter_ps: 3.0,
            seed: 1,
        }
    }
}

/// One calibration result: detector `detector_id`'s window on `day`,
/// plus its offset from the reference detector that day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriftRow {
    pub day: u32,
    pub detector_id: u8,
    pub window_ps: i64,
    pub delta_vs_ref_ps: i64,
}

pub fn drift_experiment(
    config: &ScenarioConfig,
    params: &DriftParams,
) -> Result<Vec<DriftRow>, HarnessError> {
    if params.days < 1 {
        return Err(HarnessError::Argument("days must be at least 1".to_string()));
    }
    if params.jitter_ps < 0.0 || params.amplitude_ps < 0 || params.daily_step_ps < 0 {
        return Err(HarnessError::Argument(
            "drift amplitude, step, and jitter must be non-negative".to_string(),
        ));
    }
    let base = config.scenario()?;
    let plan = config.plan()?;
    let period = base.period().map_err(SourceError::Model)?;
    let n = base.n_detectors();
    let jitter = Normal::new(0.0, params.jitter_ps.max(f64::MIN_POSITIVE))
        .expect("non-negative sigma");

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut walk = 0i64;
    let mut rows = Vec::with_capacity(params.days as usize * n);
    for day in 1..=params.days {
        if day > 1 && params.daily_step_ps > 0 {
            walk += rng.random_range(-params.daily_step_ps..=params.daily_step_ps);
            walk = walk.clamp(-params.amplitude_ps, params.amplitude_ps);
        }
        // Independent path jitter per detector; the reference detector's
        // share moves the common arrival, the rest lands in the relative
        // delays, keeping the model's "delta_T1 = 0" convention.
        let eps: Vec<i64> = (0..n)
            .map(|_| {
                if params.jitter_ps == 0.0 {
                    0
                } else {
                    jitter.sample(&mut rng).round() as i64
                }
            })
            .collect();

        let mut scenario = base.clone();
        scenario.true_arrival = base.true_arrival + TimePs::new(walk + eps[0]);
        for i in 1..n {
            scenario.detectors[i].relative_delay += TimePs::new(eps[i] - eps[0]);
        }

        let mut source = LocalSource::new(scenario).map_err(SourceError::Model)?;
        let outcome = legacy_traversal(
            &mut source,
            period,
            n,
            plan.fine_precision,
            plan.fine_accumulation_us,
            true,
        )
        .map_err(HarnessError::Sync)?;

        let reference = outcome.windows[0];
        for (i, window) in outcome.windows.iter().enumerate() {
            rows.push(DriftRow {
                day,
                detector_id: i as u8 + 1,
                window_ps: window.ps(),
                delta_vs_ref_ps: (*window - reference).signed_residue(period).ps(),
            });
        }
    }
    Ok(rows)
}

pub fn write_drift_csv(rows: &[DriftRow], out_dir: &Path) -> Result<std::path::PathBuf, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("drift.csv");
    let mut writer = csv::Writer::from_path(&path)?;
    writer.write_record(["day", "detector_id", "window_ps", "delta_vs_ref_ps"])?;
    for row in rows {
        writer.write_record([
            row.day.to_string(),
            row.detector_id.to_string(),
            row.window_ps.to_string(),
            row.delta_vs_ref_ps.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(path)
}

/// Spread statistics of a drift series, per detector.
pub fn relative_delay_spread(rows: &[DriftRow], detector_id: u8) -> (f64, i64) {
    let series: Vec<i64> = rows
        .iter()
        .filter(|r| r.detector_id == detector_id)
        .map(|r| r.delta_vs_ref_ps)
        .collect();
    let mean = series.iter().sum::<i64>() as f64 / series.len().max(1) as f64;
    let var = series
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / series.len().max(1) as f64;
    let windows: Vec<i64> = rows
        .iter()
        .filter(|r| r.detector_id == detector_id)
        .map(|r| r.window_ps)
        .collect();
    let range = windows.iter().max().unwrap_or(&0) - windows.iter().min().unwrap_or(&0);
    (var.sqrt(), range)
}
