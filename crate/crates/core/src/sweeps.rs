//! Batch studies over scenarios: arrival-grid accuracy sweeps, seeded
//! Monte Carlo repetitions, count statistics, and common-offset scans.
//!
//! Each sweep point builds its own scenario (and, in sampled mode, its own
//! generator stream), so points are independent and run through
//! [`batch::map_collect`] in either execution mode.

use crate::adversary::{window_mismatch, MismatchReport};
use crate::batch::{self, Execution};
use crate::physics::{expected_click_fraction, CountMode, DetectorId, Scenario};
use crate::source::LocalSource;
use crate::syncplan::{run_scenario_method, DelayTable, Method, SearchPlan, SyncError};
use crate::time::TimePs;

/// One point of an arrival-grid accuracy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPoint {
    pub true_arrival: TimePs,
    pub t_h: TimePs,
    /// Circular distance between recovered and true arrival.
    pub error: TimePs,
}

/// Run `method` once per true-arrival value and report the recovery error.
pub fn accuracy_sweep(
    base: &Scenario,
    plan: &SearchPlan,
    delays: &DelayTable,
    method: Method,
    arrivals: &[TimePs],
    exec: Execution,
) -> Result<Vec<AccuracyPoint>, SyncError> {
    let period = base.period().map_err(crate::source::SourceError::Model)?;
    batch::try_map_collect(exec, arrivals, |&true_arrival| {
        let mut scenario = base.clone();
        scenario.true_arrival = true_arrival;
        let outcome = run_scenario_method(&scenario, plan, delays, method)?;
        let t_h = outcome.best_fine.map(|b| b.time).unwrap_or(outcome.windows[0]);
        let target = scenario.honest_arrival();
        Ok(AccuracyPoint {
            true_arrival,
            t_h,
            error: t_h.circ_dist(target, period),
        })
    })
}

/// One Monte Carlo repetition of a sampled-mode run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub t_h: TimePs,
    pub error: TimePs,
}

/// Run `method` once per seed in sampled mode; every run owns its stream.
pub fn seed_sweep(
    base: &Scenario,
    plan: &SearchPlan,
    delays: &DelayTable,
    method: Method,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<SeedRun>, SyncError> {
    let period = base.period().map_err(crate::source::SourceError::Model)?;
    batch::try_map_collect(exec, seeds, |&seed| {
        let mut scenario = base.clone();
        scenario.seed = seed;
        scenario.count_mode = CountMode::Sampled;
        let outcome = run_scenario_method(&scenario, plan, delays, method)?;
        let t_h = outcome.best_fine.map(|b| b.time).unwrap_or(outcome.windows[0]);
        let target = scenario.honest_arrival();
        Ok(SeedRun {
            seed,
            t_h,
            error: t_h.circ_dist(target, period),
        })
    })
}

/// Sampled counts of one probe across seeds, next to the expected value.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStats {
    pub pulses: u64,
    pub click_fraction: f64,
    /// Unrounded expected count `n * p`.
    pub expected: f64,
    pub sample_mean: f64,
    pub samples: Vec<u64>,
}

/// Draw the same probe once per seed in sampled mode and compare the sample
/// mean against the expected count.
pub fn count_statistics(
    base: &Scenario,
    detector_id: DetectorId,
    gate_time: TimePs,
    accumulation_us: u64,
    seeds: &[u64],
    exec: Execution,
) -> Result<CountStats, SyncError> {
    use crate::source::CountSource;
    let detector = base
        .detector(detector_id)
        .map_err(crate::source::SourceError::Model)?;
    let pulses = base.pulse.pulses_in_us(accumulation_us);
    let click_fraction = expected_click_fraction(detector, gate_time, base);
    let samples: Vec<u64> = batch::try_map_collect(exec, seeds, |&seed| {
        let mut scenario = base.clone();
        scenario.seed = seed;
        scenario.count_mode = CountMode::Sampled;
        let mut source = LocalSource::new(scenario).map_err(crate::source::SourceError::Model)?;
        source.counts(detector_id, gate_time, accumulation_us)
    })
    .map_err(SyncError::Source)?;
    let sample_mean = samples.iter().sum::<u64>() as f64 / samples.len().max(1) as f64;
    Ok(CountStats {
        pulses,
        click_fraction,
        expected: pulses as f64 * click_fraction,
        sample_mean,
        samples,
    })
}

/// One point of a common-offset scan.
#[derive(Debug, Clone)]
pub struct OffsetPoint {
    pub offset: TimePs,
    pub report: MismatchReport,
}

/// Re-run `method` with a growing common-mode shift and evaluate every
/// outcome against the honest scenario.
pub fn common_offset_sweep(
    base: &Scenario,
    plan: &SearchPlan,
    delays: &DelayTable,
    method: Method,
    offsets: &[TimePs],
    exec: Execution,
) -> Result<Vec<OffsetPoint>, SyncError> {
    batch::try_map_collect(exec, offsets, |&offset| {
        let mut scenario = base.clone();
        scenario.attack.common_offset = offset;
        let outcome = run_scenario_method(&scenario, plan, delays, method)?;
        let report = window_mismatch(&outcome, delays, &scenario)
            .map_err(crate::source::SourceError::Model)?;
        Ok(OffsetPoint { offset, report })
    })
}
