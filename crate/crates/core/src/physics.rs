//! Statistical model of pulse generation, channel propagation, polarization
//! routing, and gated detection.
//!
//! The model turns a `(detector, gate time, accumulation)` query into a click
//! count. A weak coherent pulse of mean photon number `mu` passes a lossy
//! channel, is routed through the receiver optics to one of the gated
//! detectors, and overlaps the detector gate with a Gaussian profile. The
//! click probability per gate is
//!
//! `p = 1 - (1 - p_d) * exp(-mu * T * r * eta * G(delta))`
//!
//! where `T` is the channel transmittance, `r` the routing probability of the
//! pulse's polarization into this detector (applied inside the exponent:
//! coherent states split, they do not branch), `eta` the detection
//! efficiency, `p_d` the dark-count probability per gate, and `G` the
//! pulse/gate overlap at circular offset `delta`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::adversary::AttackProfile;
use crate::time::TimePs;

/// Detectors are numbered `1..=N`; 0 is never a valid id.
pub type DetectorId = u8;

/// FWHM of a Gaussian divided by this gives its standard deviation.
pub const FWHM_TO_SIGMA: f64 = 2.354_820_045_030_949_3; // 2*sqrt(2*ln 2)

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state distribution sums to {0}, expected 1")]
    StateDistribution(f64),
    #[error("repetition rate {0} Hz does not give an integer picosecond period")]
    NonIntegerPeriod(f64),
    #[error("pulse FWHM must be positive, got {0}")]
    NonPositiveFwhm(TimePs),
    #[error("mean photon number must be non-negative, got {0}")]
    NegativeIntensity(f64),
    #[error("channel loss must be non-negative, got {0} dB")]
    NegativeLoss(f64),
    #[error("detector {id}: {field} = {value} outside [0, 1]")]
    ProbabilityRange {
        id: DetectorId,
        field: &'static str,
        value: f64,
    },
    #[error("detector ids must be contiguous 1..=N, found {0} at position {1}")]
    NonContiguousIds(DetectorId, usize),
    #[error("reference detector must have zero relative delay, got {0}")]
    NonZeroReferenceDelay(TimePs),
    #[error("routing column for state {0} sums to {1}, exceeding 1")]
    RoutingColumn(char, f64),
    #[error("scenario has no detectors")]
    NoDetectors,
    #[error("unknown detector id {0}")]
    UnknownDetector(DetectorId),
    #[error("accumulation duration must be positive")]
    EmptyAccumulation,
}

/// Polarization state of a calibration pulse (BB84 alphabet).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
    ];

    pub const fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
            Polarization::D => 2,
            Polarization::A => 3,
        }
    }

    pub const fn label(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::D => 'D',
            Polarization::A => 'A',
        }
    }
}

/// Source model: weak coherent pulses on a fixed clock.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseModel {
    pub fwhm: TimePs,
    /// Mean photon number per pulse. Raised to 3 during calibration.
    pub mean_photon_number: f64,
    pub repetition_rate_hz: f64,
    /// Probability of emitting each state, indexed per [`Polarization::index`].
    pub state_distribution: [f64; 4],
}

impl Default for PulseModel {
    fn default() -> Self {
        PulseModel {
            fwhm: TimePs::new(500),
            mean_photon_number: 3.0,
            repetition_rate_hz: 1.0e8,
            state_distribution: [0.25; 4],
        }
    }
}

impl PulseModel {
    /// Pulse period in integer picoseconds (`10^12 / f`).
    pub fn period(&self) -> Result<TimePs, ModelError> {
        let p = 1.0e12 / self.repetition_rate_hz;
        if !p.is_finite() || p < 1.0 || (p - p.round()).abs() > 1e-6 {
            return Err(ModelError::NonIntegerPeriod(self.repetition_rate_hz));
        }
        Ok(TimePs::new(p.round() as i64))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.fwhm.ps() <= 0 {
            return Err(ModelError::NonPositiveFwhm(self.fwhm));
        }
        if self.mean_photon_number < 0.0 {
            return Err(ModelError::NegativeIntensity(self.mean_photon_number));
        }
        let sum: f64 = self.state_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.state_distribution.iter().any(|&w| w < 0.0) {
            return Err(ModelError::StateDistribution(sum));
        }
        self.period().map(|_| ())
    }

    /// Number of pulses emitted over an accumulation window.
    pub fn pulses_in_us(&self, accumulation_us: u64) -> u64 {
        (self.repetition_rate_hz * accumulation_us as f64 * 1e-6).round() as u64
    }
}

/// Fiber link between source and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub loss_db: f64,
    pub propagation_delay: TimePs,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            loss_db: 10.3,
            propagation_delay: TimePs::ZERO,
        }
    }
}

impl ChannelModel {
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.loss_db < 0.0 {
            return Err(ModelError::NegativeLoss(self.loss_db));
        }
        Ok(())
    }
}

/// One gated single-photon detector of the receiver bank.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedDetectorModel {
    pub id: DetectorId,
    pub efficiency: f64,
    /// Dark-count probability per gate.
    pub dark_count_prob: f64,
    /// FWHM of the Gaussian gate sensitivity profile.
    pub gate_fwhm: TimePs,
    /// Fixed extra optical/electrical path delay relative to detector 1.
    pub relative_delay: TimePs,
    /// Probability that a pulse of each polarization is routed here,
    /// indexed per [`Polarization::index`].
    pub routing: [f64; 4],
}

impl GatedDetectorModel {
    /// Detector with the paper's setup values (15.3 % efficiency,
    /// 8e-7 dark counts per gate, 1 ns gate profile).
    pub fn with_defaults(id: DetectorId, relative_delay: TimePs, routing: [f64; 4]) -> Self {
        GatedDetectorModel {
            id,
            efficiency: 0.153,
            dark_count_prob: 8.0e-7,
            gate_fwhm: TimePs::new(1000),
            relative_delay,
            routing,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |field: &'static str, value: f64| {
            if !(0.0..=1.0).contains(&value) {
                Err(ModelError::ProbabilityRange {
                    id: self.id,
                    field,
                    value,
                })
            } else {
                Ok(())
            }
        };
        check("efficiency", self.efficiency)?;
        check("dark_count_prob", self.dark_count_prob)?;
        if self.dark_count_prob >= 1.0 {
            return Err(ModelError::ProbabilityRange {
                id: self.id,
                field: "dark_count_prob",
                value: self.dark_count_prob,
            });
        }
        for (s, &r) in Polarization::ALL.iter().zip(self.routing.iter()) {
            check("routing", r).map_err(|_| ModelError::RoutingColumn(s.label(), r))?;
        }
        if self.gate_fwhm.ps() <= 0 {
            return Err(ModelError::NonPositiveFwhm(self.gate_fwhm));
        }
        Ok(())
    }
}

/// How `accumulate_counts` produces a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Deterministic `round(n * p)`; every operation is a pure function of
    /// the scenario.
    Expected,
    /// One binomial draw per query from the scenario's seeded generator.
    Sampled,
}

/// Full physical configuration of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pulse: PulseModel,
    pub channel: ChannelModel,
    pub detectors: Vec<GatedDetectorModel>,
    pub attack: AttackProfile,
    /// Pulse-train arrival offset within the period, absent any attack.
    pub true_arrival: TimePs,
    pub seed: u64,
    pub count_mode: CountMode,
}

impl Scenario {
    /// Standard passive-basis BB84 bank: four detectors (H, V, D, A), a
    /// 50/50 basis chooser followed by polarizing splitters.
    pub fn bb84_default() -> Scenario {
        let rows: [[f64; 4]; 4] = [
            [0.5, 0.0, 0.25, 0.25],
            [0.0, 0.5, 0.25, 0.25],
            [0.25, 0.25, 0.5, 0.0],
            [0.25, 0.25, 0.0, 0.5],
        ];
        let deltas = [0, 30, 60, 90];
        let detectors = rows
            .iter()
            .enumerate()
            .map(|(i, &row)| {
                GatedDetectorModel::with_defaults(i as DetectorId + 1, TimePs::new(deltas[i]), row)
            })
            .collect();
        Scenario {
            pulse: PulseModel::default(),
            channel: ChannelModel::default(),
            detectors,
            attack: AttackProfile::default(),
            true_arrival: TimePs::new(2050),
            seed: 1,
            count_mode: CountMode::Expected,
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn period(&self) -> Result<TimePs, ModelError> {
        self.pulse.period()
    }

    pub fn detector(&self, id: DetectorId) -> Result<&GatedDetectorModel, ModelError> {
        let idx = id.checked_sub(1).ok_or(ModelError::UnknownDetector(id))? as usize;
        self.detectors.get(idx).ok_or(ModelError::UnknownDetector(id))
    }

    /// Arrival offset of the pulse train with the attack stripped.
    pub fn honest_arrival(&self) -> TimePs {
        let p = self.period().expect("validated scenario");
        (self.true_arrival + self.channel.propagation_delay).rem_period(p)
    }

    /// Copy of this scenario with the attack removed.
    pub fn honest(&self) -> Scenario {
        Scenario {
            attack: AttackProfile::default(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.pulse.validate()?;
        self.channel.validate()?;
        if self.detectors.is_empty() {
            return Err(ModelError::NoDetectors);
        }
        for (i, det) in self.detectors.iter().enumerate() {
            if det.id as usize != i + 1 {
                return Err(ModelError::NonContiguousIds(det.id, i));
            }
            det.validate()?;
        }
        if self.detectors[0].relative_delay != TimePs::ZERO {
            return Err(ModelError::NonZeroReferenceDelay(
                self.detectors[0].relative_delay,
            ));
        }
        for state in Polarization::ALL {
            let col: f64 = self
                .detectors
                .iter()
                .map(|d| d.routing[state.index()])
                .sum();
            if col > 1.0 + 1e-9 {
                return Err(ModelError::RoutingColumn(state.label(), col));
            }
        }
        Ok(())
    }
}

/// One probe of the search: a gate position held for an accumulation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeRecord {
    pub round: u32,
    pub detector_id: DetectorId,
    /// Gate position as actually probed (detector frame, reduced mod P).
    pub gate_time: TimePs,
    pub accumulation_us: u64,
    pub count: u64,
}

/// Probe-by-probe record of a synchronization run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountHistogram {
    pub entries: Vec<ProbeRecord>,
}

impl CountHistogram {
    pub fn push(&mut self, record: ProbeRecord) {
        self.entries.push(record);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where the pulses of `state` arrive at the receiver input, mod P.
pub fn arrival_time(state: Polarization, scenario: &Scenario) -> TimePs {
    let period = scenario.period().expect("validated scenario");
    (scenario.true_arrival
        + scenario.channel.propagation_delay
        + scenario.attack.common_offset
        + scenario.attack.state_offset[state.index()])
    .rem_period(period)
}

/// Pulse/gate overlap factor at circular offset `delta`.
///
/// Gaussian pulse and Gaussian gate combine by variance addition:
/// `G(d) = exp(-d^2 / (2 sigma_eff^2))` with
/// `sigma_eff^2 = sigma_pulse^2 + sigma_gate^2`. Even in `delta`, strictly
/// decreasing in `|delta|`, and equal to 1 at zero offset.
pub fn overlap_factor(delta: TimePs, pulse: &PulseModel, detector: &GatedDetectorModel) -> f64 {
    let sp = pulse.fwhm.ps() as f64 / FWHM_TO_SIGMA;
    let sg = detector.gate_fwhm.ps() as f64 / FWHM_TO_SIGMA;
    let var = sp * sp + sg * sg;
    let d = delta.ps() as f64;
    (-d * d / (2.0 * var)).exp()
}

/// Click probability of one detector for pulses of one state at a gate
/// position.
pub fn click_probability(
    detector: &GatedDetectorModel,
    state: Polarization,
    gate_time: TimePs,
    scenario: &Scenario,
) -> f64 {
    let period = scenario.period().expect("validated scenario");
    let peak = (arrival_time(state, scenario) + detector.relative_delay).rem_period(period);
    let delta = gate_time.rem_period(period).circ_dist(peak, period);
    let g = overlap_factor(delta, &scenario.pulse, detector);
    let mean_photons = scenario.pulse.mean_photon_number
        * scenario.channel.transmittance()
        * detector.routing[state.index()]
        * detector.efficiency
        * g;
    1.0 - (1.0 - detector.dark_count_prob) * (-mean_photons).exp()
}

/// Click probability per emitted pulse, averaged over the source's state
/// distribution.
pub fn expected_click_fraction(
    detector: &GatedDetectorModel,
    gate_time: TimePs,
    scenario: &Scenario,
) -> f64 {
    Polarization::ALL
        .iter()
        .map(|&s| {
            scenario.pulse.state_distribution[s.index()]
                * click_probability(detector, s, gate_time, scenario)
        })
        .sum()
}

/// Deterministic expected count for a probe: `round(n * p_mean)`.
pub fn expected_counts(
    detector_id: DetectorId,
    gate_time: TimePs,
    accumulation_us: u64,
    scenario: &Scenario,
) -> Result<u64, ModelError> {
    if accumulation_us == 0 {
        return Err(ModelError::EmptyAccumulation);
    }
    let detector = scenario.detector(detector_id)?;
    let n = scenario.pulse.pulses_in_us(accumulation_us);
    let p = expected_click_fraction(detector, gate_time, scenario);
    Ok((n as f64 * p).round() as u64)
}

/// One binomial draw `Binomial(n, p_mean)` for a probe.
///
/// `rand_distr` samples the exact binomial law (inversion for small
/// `n * p`, the BTPE rejection algorithm above it), so no approximation
/// threshold applies; reproducibility is fixed entirely by the caller's
/// generator state.
pub fn sample_counts<R: Rng + ?Sized>(
    detector_id: DetectorId,
    gate_time: TimePs,
    accumulation_us: u64,
    scenario: &Scenario,
    rng: &mut R,
) -> Result<u64, ModelError> {
    if accumulation_us == 0 {
        return Err(ModelError::EmptyAccumulation);
    }
    let detector = scenario.detector(detector_id)?;
    let n = scenario.pulse.pulses_in_us(accumulation_us);
    let p = expected_click_fraction(detector, gate_time, scenario);
    let dist = Binomial::new(n, p).expect("click fraction is a probability");
    Ok(dist.sample(rng))
}

/// Click count for one probe, dispatched on the scenario's count mode.
pub fn accumulate_counts<R: Rng + ?Sized>(
    detector_id: DetectorId,
    gate_time: TimePs,
    accumulation_us: u64,
    scenario: &Scenario,
    rng: &mut R,
) -> Result<u64, ModelError> {
    match scenario.count_mode {
        CountMode::Expected => expected_counts(detector_id, gate_time, accumulation_us, scenario),
        CountMode::Sampled => sample_counts(detector_id, gate_time, accumulation_us, scenario, rng),
    }
}
