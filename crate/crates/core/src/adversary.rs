//! Calibration-time attack profiles and the detector-efficiency-mismatch
//! metrics they are judged by.
//!
//! The attacker controls pulse arrival times only: a per-polarization offset
//! (splitting the states that different detectors lock onto) plus a
//! common-mode offset (a variable optical delay line shifting everything
//! together). The mismatch report quantifies what a given set of recovered
//! windows costs once honest timing returns: the pairwise window skew beyond
//! the calibrated delays, and the ratio of best to worst detector efficiency
//! at the assigned windows.

use crate::physics::{
    arrival_time, overlap_factor, DetectorId, ModelError, Polarization, Scenario,
};
use crate::syncplan::{DelayTable, SyncOutcome};
use crate::time::TimePs;

/// When the attacker's timing shifts are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackWindow {
    /// Only while the receiver calibrates; honest timing returns afterwards.
    #[default]
    Calibration,
    /// Permanently, including key exchange.
    Always,
}

/// Per-state and common-mode arrival-time shifts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttackProfile {
    /// Extra delay per polarization, indexed per [`Polarization::index`].
    pub state_offset: [TimePs; 4],
    /// Delay applied to every pulse regardless of state.
    pub common_offset: TimePs,
    pub active_during: AttackWindow,
}

impl AttackProfile {
    pub fn is_honest(&self) -> bool {
        self.common_offset == TimePs::ZERO && self.state_offset.iter().all(|&o| o == TimePs::ZERO)
    }
}

/// Build a calibration-time shift attack, offsets reduced mod P.
pub fn make_shift_attack(
    state_offsets: [TimePs; 4],
    common_offset: TimePs,
    period: TimePs,
) -> AttackProfile {
    AttackProfile {
        state_offset: state_offsets.map(|o| o.rem_period(period)),
        common_offset: common_offset.rem_period(period),
        active_during: AttackWindow::Calibration,
    }
}

/// How far a set of recovered windows deviates from the calibrated delay
/// structure, and what it costs in detection efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchReport {
    /// Signed deviation of each window from its honest position.
    pub window_deviation: Vec<TimePs>,
    /// max over i,j of |((t_i - t_j) - (dT_i - dT_j)) mod+- P|.
    pub max_pairwise_skew: TimePs,
    /// Model efficiency eta*G at each assigned window under honest timing.
    pub efficiency_at_window: Vec<f64>,
    /// Best over worst of `efficiency_at_window`; 1 means no mismatch.
    pub mismatch_ratio: f64,
}

/// Evaluate an outcome's windows against honest arrival times.
///
/// `honest` supplies the true physics; its attack fields are ignored so the
/// caller may pass the attacked scenario directly.
pub fn window_mismatch(
    outcome: &SyncOutcome,
    delays: &DelayTable,
    honest: &Scenario,
) -> Result<MismatchReport, ModelError> {
    let honest = honest.honest();
    honest.validate()?;
    let period = honest.period()?;
    let n = outcome.windows.len();
    if n != delays.n_detectors() || n != honest.n_detectors() {
        return Err(ModelError::UnknownDetector(n as DetectorId));
    }
    let arrival = arrival_time(Polarization::H, &honest); // state-independent when honest

    let mut window_deviation = Vec::with_capacity(n);
    let mut efficiency_at_window = Vec::with_capacity(n);
    for (i, &w) in outcome.windows.iter().enumerate() {
        let det = &honest.detectors[i];
        let peak = (arrival + det.relative_delay).rem_period(period);
        window_deviation.push((w - peak).signed_residue(period));
        let dist = w.rem_period(period).circ_dist(peak, period);
        efficiency_at_window.push(det.efficiency * overlap_factor(dist, &honest.pulse, det));
    }

    let mut max_skew = TimePs::ZERO;
    for i in 0..n {
        for j in 0..n {
            let windows = outcome.windows[i] - outcome.windows[j];
            let calibrated = delays.delta(i as DetectorId + 1) - delays.delta(j as DetectorId + 1);
            let skew = (windows - calibrated).signed_residue(period).abs();
            max_skew = max_skew.max(skew);
        }
    }

    let max_eff = efficiency_at_window.iter().cloned().fold(0.0f64, f64::max);
    let min_eff = efficiency_at_window
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mismatch_ratio = if max_eff == 0.0 {
        1.0
    } else if min_eff <= 0.0 {
        f64::INFINITY
    } else {
        max_eff / min_eff
    };

    Ok(MismatchReport {
        window_deviation,
        max_pairwise_skew: max_skew,
        efficiency_at_window,
        mismatch_ratio,
    })
}

/// Tabulate eta*G over one period for a detector, for plotting and for the
/// mismatch ratio.
pub fn efficiency_curve(
    detector_id: DetectorId,
    scenario: &Scenario,
    grid_step: TimePs,
) -> Result<Vec<(TimePs, f64)>, ModelError> {
    if grid_step.ps() < 1 {
        return Err(ModelError::EmptyAccumulation);
    }
    scenario.validate()?;
    let period = scenario.period()?;
    let det = scenario.detector(detector_id)?;
    let peak = (scenario.honest_arrival() + det.relative_delay).rem_period(period);
    let mut curve = Vec::new();
    let mut gate = TimePs::ZERO;
    while gate < period {
        let dist = gate.circ_dist(peak, period);
        curve.push((gate, det.efficiency * overlap_factor(dist, &scenario.pulse, det)));
        gate += grid_step;
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::CountMode;

    fn scenario() -> Scenario {
        Scenario::bb84_default()
    }

    #[test]
    fn shift_attack_reduces_offsets() {
        let p = TimePs::new(10_000);
        let a = make_shift_attack(
            [TimePs::ZERO, TimePs::new(10_500), TimePs::ZERO, TimePs::ZERO],
            TimePs::new(-30),
            p,
        );
        assert_eq!(a.state_offset[1], TimePs::new(500));
        assert_eq!(a.common_offset, TimePs::new(9970));
    }

    #[test]
    fn all_zero_profile_is_honest() {
        assert!(AttackProfile::default().is_honest());
        let p = TimePs::new(10_000);
        let a = make_shift_attack([TimePs::ZERO; 4], TimePs::new(300), p);
        assert!(!a.is_honest());
    }

    #[test]
    fn efficiency_curve_peaks_at_honest_window() {
        let s = scenario();
        let curve = efficiency_curve(2, &s, TimePs::new(10)).unwrap();
        assert_eq!(curve.len(), 1000);
        let (peak_gate, peak_val) = curve
            .iter()
            .cloned()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(peak_gate, TimePs::new(2080)); // 2050 + dT_2
        assert!((peak_val - 0.153).abs() < 1e-6);
    }

    #[test]
    fn efficiency_curve_zero_detector() {
        let mut s = scenario();
        s.detectors[0].efficiency = 0.0;
        let curve = efficiency_curve(1, &s, TimePs::new(100)).unwrap();
        assert!(curve.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn identical_detectors_give_shifted_curves() {
        let s = scenario();
        let c1 = efficiency_curve(1, &s, TimePs::new(10)).unwrap();
        let c2 = efficiency_curve(2, &s, TimePs::new(10)).unwrap();
        // dT_2 - dT_1 = 30 ps = 3 grid steps.
        for i in 0..c1.len() {
            let j = (i + 3) % c1.len();
            assert!((c1[i].1 - c2[j].1).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_rejects_zero_step() {
        let s = scenario();
        assert!(efficiency_curve(1, &s, TimePs::ZERO).is_err());
    }

    #[test]
    fn mode_fields_default_sane() {
        let s = scenario();
        assert_eq!(s.count_mode, CountMode::Expected);
        assert_eq!(s.attack.active_during, AttackWindow::Calibration);
    }
}
