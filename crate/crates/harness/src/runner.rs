//! End-to-end experiment drivers behind the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use qsync_core::adversary::window_mismatch;
use qsync_core::syncplan::{optimize_coarse_step, run_method, sync_cost, SyncOutcome};
use qsync_core::{LocalSource, TimePs};
use qsync_link::{Endpoint, RemoteSource};

use crate::config::{MethodConfig, ScenarioConfig, StateMap};
use crate::report::{summarize, write_bundle, ReportBundle, Summary};
use crate::HarnessError;

/// Outcome of one `run` invocation.
#[derive(Debug)]
pub struct RunArtifacts {
    pub outcome: SyncOutcome,
    pub summary: Summary,
    pub bundle: ReportBundle,
}

/// Execute the configured method end to end and write the report bundle.
/// With `source`, probes go over the wire; the controller first pushes the
/// configured attack profile so the emulator state matches the config.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
    source: Option<&Endpoint>,
) -> Result<RunArtifacts, HarnessError> {
    let scenario = config.scenario()?;
    let plan = config.plan()?;
    let delays = config.delays()?;
    let method = config.method();
    let period = scenario.period().map_err(qsync_core::SourceError::Model)?;

    let outcome = match source {
        None => {
            let mut local = LocalSource::new(scenario.clone())
                .map_err(qsync_core::SourceError::Model)?;
            run_method(&mut local, period, &plan, &delays, method)?
        }
        Some(endpoint) => {
            let mut remote = RemoteSource::connect(endpoint, period)?;
            remote.set_attack(&scenario.attack)?;
            run_method(&mut remote, period, &plan, &delays, method)?
        }
    };

    let mismatch = window_mismatch(&outcome, &delays, &scenario)
        .map_err(qsync_core::SourceError::Model)?;
    let summary = summarize(method.label(), &outcome, &mismatch);
    let bundle = write_bundle(out_dir, config, &outcome, &delays, &summary)?;
    Ok(RunArtifacts { outcome, summary, bundle })
}

/// Serve the configured scenario as a pulse-source emulator.
pub fn serve_scenario(
    config: &ScenarioConfig,
    listen: &Endpoint,
) -> Result<qsync_link::Server, HarnessError> {
    let scenario = config.scenario()?;
    Ok(qsync_link::serve(scenario, listen)?)
}

/// One row of the step-cost table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRow {
    pub t_ps: i64,
    pub coarse_ms: f64,
    pub fine_ms: f64,
    pub total_ms: f64,
}

/// Evaluate the two-stage cost over a step grid, write `optimize.csv`, and
/// return the table plus the argmin.
pub fn optimize_t(
    config: &ScenarioConfig,
    grid: &[TimePs],
    out_dir: &Path,
) -> Result<(Vec<CostRow>, TimePs, f64), HarnessError> {
    let scenario = config.scenario()?;
    let period = scenario.period().map_err(qsync_core::SourceError::Model)?;
    let n = scenario.n_detectors();
    let plan = config.plan()?;
    let precision = plan.fine_precision;
    let (coarse_us, fine_us) = (plan.coarse_accumulation_us, plan.fine_accumulation_us);

    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let total = sync_cost(t, n, period, precision, coarse_us, fine_us)
            .map_err(qsync_core::SyncError::Plan)?;
        let coarse = sync_cost(t, n, period, precision, coarse_us, 0)
            .map_err(qsync_core::SyncError::Plan)?;
        rows.push(CostRow {
            t_ps: t.ps(),
            coarse_ms: coarse,
            fine_ms: total - coarse,
            total_ms: total,
        });
    }
    let (best_t, best_cost) = optimize_coarse_step(grid, n, period, precision, coarse_us, fine_us)
        .map_err(qsync_core::SyncError::Plan)?;

    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("optimize.csv");
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["t_ps", "coarse_ms", "fine_ms", "total_ms"])?;
    for row in &rows {
        writer.write_record([
            row.t_ps.to_string(),
            format_ms(row.coarse_ms),
            format_ms(row.fine_ms),
            format_ms(row.total_ms),
        ])?;
    }
    writer.flush()?;
    Ok((rows, best_t, best_cost))
}

fn format_ms(ms: f64) -> String {
    if ms.fract() == 0.0 {
        format!("{ms:.0}")
    } else {
        format!("{ms}")
    }
}

/// Side-by-side mismatch comparison for one attack.
#[derive(Debug, serde::Serialize)]
pub struct AttackDemo {
    pub t0_ps: i64,
    pub t1_ps: i64,
    pub legacy: Summary,
    pub method1: Summary,
}

/// Run the legacy traversal and method 1 under the same H/V shift attack
/// (H pulses arriving at `t0`, V pulses at `t1`) and report both mismatch
/// verdicts.
pub fn attack_demo(
    config: &ScenarioConfig,
    t0: TimePs,
    t1: TimePs,
    out_dir: &Path,
) -> Result<AttackDemo, HarnessError> {
    let attacked = attack_config(config, t0, t1)?;

    let mut legacy_cfg = attacked.clone();
    legacy_cfg.run.method = MethodConfig::Legacy;
    let legacy = run_scenario(&legacy_cfg, &out_dir.join("legacy"), None)?;

    let mut m1_cfg = attacked;
    m1_cfg.run.method = MethodConfig::Method1;
    let method1 = run_scenario(&m1_cfg, &out_dir.join("method1"), None)?;

    let demo = AttackDemo {
        t0_ps: t0.ps(),
        t1_ps: t1.ps(),
        legacy: legacy.summary,
        method1: method1.summary,
    };
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("attack_demo.json"),
        serde_json::to_string_pretty(&demo)? + "\n",
    )?;
    Ok(demo)
}

/// The attacked variant of a config: the source emits only H and V pulses,
/// H shifted to arrive at `t0` and V at `t1`.
pub fn attack_config(
    config: &ScenarioConfig,
    t0: TimePs,
    t1: TimePs,
) -> Result<ScenarioConfig, HarnessError> {
    let scenario = config.scenario()?;
    let period = scenario.period().map_err(qsync_core::SourceError::Model)?;
    if t0.ps() < 0 || t0 >= period || t1.ps() < 0 || t1 >= period {
        return Err(HarnessError::Argument(format!(
            "t0/t1 must lie in [0, {period}), got {t0} and {t1}"
        )));
    }
    let honest = scenario.honest_arrival();
    let mut attacked = config.clone();
    attacked.pulse.states = StateMap { h: 0.5, v: 0.5, d: 0.0, a: 0.0 };
    attacked.attack.state_offsets = StateMap {
        h: (t0 - honest).signed_residue(period).ps(),
        v: (t1 - honest).signed_residue(period).ps(),
        d: 0,
        a: 0,
    };
    attacked.attack.common_offset = 0;
    Ok(attacked)
}

/// Re-run one probe of a bundle from its CSVs: recompute the coarse/fine
/// argmaxes from the histogram (used by consistency tests and tooling).
pub fn recompute_argmax_from_csv(
    histogram_csv: &PathBuf,
    coarse_rounds: u32,
) -> Result<((i64, u8), (i64, u8)), HarnessError> {
    let mut reader = csv::Reader::from_path(histogram_csv)?;
    let mut coarse: Option<(u64, i64, u8)> = None;
    let mut fine: Option<(u64, i64, u8)> = None;
    for record in reader.records() {
        let record = record?;
        let round: u32 = record[0].parse().map_err(|_| bad_csv("round"))?;
        let detector: u8 = record[1].parse().map_err(|_| bad_csv("detector_id"))?;
        let gate: i64 = record[2].parse().map_err(|_| bad_csv("gate_time_ps"))?;
        let count: u64 = record[4].parse().map_err(|_| bad_csv("count"))?;
        let slot = if round < coarse_rounds { &mut coarse } else { &mut fine };
        let better = match *slot {
            None => true,
            Some((c, g, d)) => {
                count > c || (count == c && (gate < g || (gate == g && detector < d)))
            }
        };
        if better {
            *slot = Some((count, gate, detector));
        }
    }
    let coarse = coarse.ok_or_else(|| bad_csv("empty histogram"))?;
    let fine = fine.ok_or_else(|| bad_csv("no fine rounds"))?;
    Ok(((coarse.1, coarse.2), (fine.1, fine.2)))
}

fn bad_csv(what: &str) -> HarnessError {
    HarnessError::Argument(format!("malformed histogram CSV ({what})"))
}
