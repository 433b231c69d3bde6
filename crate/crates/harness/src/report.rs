//! Report bundle: probe histogram CSV, window CSV, and a JSON summary,
//! all byte-deterministic for a given config and seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qsync_core::adversary::MismatchReport;
use qsync_core::syncplan::DelayTable;
use qsync_core::SyncOutcome;

use crate::config::ScenarioConfig;
use crate::HarnessError;

/// Files written by one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub histogram_csv: PathBuf,
    pub windows_csv: PathBuf,
    pub summary_json: PathBuf,
    pub effective_config_json: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MismatchSummary {
    pub window_deviation_ps: Vec<i64>,
    pub max_pairwise_skew_ps: i64,
    pub efficiency_at_window: Vec<f64>,
    pub mismatch_ratio: f64,
}

impl From<&MismatchReport> for MismatchSummary {
    fn from(report: &MismatchReport) -> Self {
        MismatchSummary {
            window_deviation_ps: report.window_deviation.iter().map(|d| d.ps()).collect(),
            max_pairwise_skew_ps: report.max_pairwise_skew.ps(),
            efficiency_at_window: report.efficiency_at_window.clone(),
            mismatch_ratio: report.mismatch_ratio,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub method: String,
    pub t_l: Option<i64>,
    pub n_l: Option<u8>,
    pub t_h: Option<i64>,
    pub n_h: Option<u8>,
    pub simulated_time_ms: f64,
    pub mismatch: MismatchSummary,
}

pub fn summarize(method: &str, outcome: &SyncOutcome, mismatch: &MismatchReport) -> Summary {
    Summary {
        method: method.to_string(),
        t_l: outcome.best_coarse.map(|b| b.time.ps()),
        n_l: outcome.best_coarse.map(|b| b.detector),
        t_h: outcome.best_fine.map(|b| b.time.ps()),
        n_h: outcome.best_fine.map(|b| b.detector),
        simulated_time_ms: outcome.simulated_time_ms,
        mismatch: mismatch.into(),
    }
}

pub fn write_bundle(
    out_dir: &Path,
    config: &ScenarioConfig,
    outcome: &SyncOutcome,
    delays: &DelayTable,
    summary: &Summary,
) -> Result<ReportBundle, HarnessError> {
    fs::create_dir_all(out_dir)?;

    let histogram_csv = out_dir.join("histogram.csv");
    let mut writer = csv::Writer::from_path(&histogram_csv)?;
    writer.write_record(["round", "detector_id", "gate_time_ps", "accumulation_us", "count"])?;
    for record in &outcome.histogram.entries {
        writer.write_record([
            record.round.to_string(),
            record.detector_id.to_string(),
            record.gate_time.ps().to_string(),
            record.accumulation_us.to_string(),
            record.count.to_string(),
        ])?;
    }
    writer.flush()?;

    let windows_csv = out_dir.join("windows.csv");
    let mut writer = csv::Writer::from_path(&windows_csv)?;
    writer.write_record(["detector_id", "window_ps", "delta_t_ps"])?;
    for (i, window) in outcome.windows.iter().enumerate() {
        writer.write_record([
            (i + 1).to_string(),
            window.ps().to_string(),
            delays.delta(i as u8 + 1).ps().to_string(),
        ])?;
    }
    writer.flush()?;

    let summary_json = out_dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(summary)? + "\n")?;

    let effective_config_json = out_dir.join("effective_config.json");
    fs::write(&effective_config_json, config.to_json_pretty())?;

    Ok(ReportBundle {
        histogram_csv,
        windows_csv,
        summary_json,
        effective_config_json,
    })
}
