//! Scenario configuration: a strict JSON schema with the experimental setup
//! baked in as defaults, plus named presets for one-command reproductions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qsync_core::adversary::{AttackProfile, AttackWindow};
use qsync_core::physics::{ChannelModel, GatedDetectorModel, PulseModel};
use qsync_core::syncplan::{DelayTable, FineMethod, SearchPlan};
use qsync_core::{CountMode, Method, ModelError, PlanError, Scenario, TimePs};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config invalid at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown preset '{name}'; available: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
}

/// Per-state values keyed by polarization letter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMap<T> {
    #[serde(rename = "H")]
    pub h: T,
    #[serde(rename = "V")]
    pub v: T,
    #[serde(rename = "D")]
    pub d: T,
    #[serde(rename = "A")]
    pub a: T,
}

impl<T: Copy> StateMap<T> {
    pub fn uniform(value: T) -> Self {
        StateMap { h: value, v: value, d: value, a: value }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.h, self.v, self.d, self.a]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub fwhm_ps: i64,
    pub mu: f64,
    pub rate_hz: f64,
    pub states: StateMap<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            fwhm_ps: 500,
            mu: 3.0,
            rate_hz: 1.0e8,
            states: StateMap::uniform(0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub loss_db: f64,
    pub delay_ps: i64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { loss_db: 10.3, delay_ps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_prob: f64,
    pub gate_fwhm_ps: i64,
    pub delta_t_ps: i64,
    pub routing: StateMap<f64>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            efficiency: 0.153,
            dark_prob: 8.0e-7,
            gate_fwhm_ps: 1000,
            delta_t_ps: 0,
            routing: StateMap::uniform(0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActiveDuring {
    #[default]
    Calibration,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub state_offsets: StateMap<i64>,
    pub common_offset: i64,
    pub active_during: ActiveDuring,
}

impl Default for StateMap<i64> {
    fn default() -> Self {
        StateMap::uniform(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CountModeConfig {
    #[default]
    Expected,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    Legacy,
    #[default]
    Method1,
    Method2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecisionSection {
    pub fine_ps: i64,
}

impl Default for PrecisionSection {
    fn default() -> Self {
        PrecisionSection { fine_ps: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccumulationSection {
    pub coarse_ms: f64,
    pub fine_ms: f64,
}

impl Default for AccumulationSection {
    fn default() -> Self {
        AccumulationSection { coarse_ms: 1.0, fine_ms: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub count_mode: CountModeConfig,
    pub method: MethodConfig,
    pub coarse_step_ps: i64,
    pub true_arrival_ps: i64,
    pub precisions: PrecisionSection,
    pub accumulations: AccumulationSection,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            count_mode: CountModeConfig::Expected,
            method: MethodConfig::Method1,
            coarse_step_ps: 120,
            true_arrival_ps: 2050,
            precisions: PrecisionSection::default(),
            accumulations: AccumulationSection::default(),
        }
    }
}

/// The full experiment description. Unknown keys are rejected; every field
/// defaults to the published setup (100 MHz, 500 ps pulses at mu = 3,
/// 10.3 dB channel, four 15.3 % detectors with 8e-7 dark counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub pulse: PulseSection,
    pub channel: ChannelSection,
    pub detectors: Vec<DetectorSection>,
    pub attack: AttackSection,
    pub run: RunSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            pulse: PulseSection::default(),
            channel: ChannelSection::default(),
            detectors: default_bank(),
            attack: AttackSection::default(),
            run: RunSection::default(),
        }
    }
}

/// Standard passive-basis bank: H, V, D, A detectors behind a 50/50 basis
/// chooser, relative delays 0/30/60/90 ps.
pub fn default_bank() -> Vec<DetectorSection> {
    let rows = [
        StateMap { h: 0.5, v: 0.0, d: 0.25, a: 0.25 },
        StateMap { h: 0.0, v: 0.5, d: 0.25, a: 0.25 },
        StateMap { h: 0.25, v: 0.25, d: 0.5, a: 0.0 },
        StateMap { h: 0.25, v: 0.25, d: 0.0, a: 0.5 },
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &routing)| DetectorSection {
            delta_t_ps: 30 * i as i64,
            routing,
            ..DetectorSection::default()
        })
        .collect()
}

pub const PRESET_NAMES: [&str; 5] = [
    "method1-paper",
    "method2-paper",
    "legacy-attack",
    "drift-16d",
    "stats-sampled",
];

/// Built-in experiment presets.
///
/// * `method1-paper` — the fixed-step run: optimal 120 ps coarse step,
///   10 ps precision, 1 ms / 5 ms accumulations; completes in 36 ms.
/// * `method2-paper` — the N-ary run: 500 ps coarse step (the largest the
///   pulse width admits); completes in 20 ms.
/// * `legacy-attack` — per-detector traversal while the channel delivers
///   only H and V pulses, shifted to 2000 ps and 2500 ps.
/// * `drift-16d` — base configuration for the multi-day drift study.
/// * `stats-sampled` — sampled-mode stress setup with a narrow response
///   (150 ps pulse, 60 ps gate) so single-run statistics can actually
///   resolve the 10 ps grid at the 1 ms / 5 ms operating point.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig::default();
    match name {
        "method1-paper" => {}
        "method2-paper" => {
            config.run.method = MethodConfig::Method2;
            config.run.coarse_step_ps = 500;
        }
        "legacy-attack" => {
            config.run.method = MethodConfig::Legacy;
            config.pulse.states = StateMap { h: 0.5, v: 0.5, d: 0.0, a: 0.0 };
            config.attack.state_offsets = StateMap { h: -50, v: 450, d: 0, a: 0 };
        }
        "drift-16d" => {
            config.run.method = MethodConfig::Legacy;
        }
        "stats-sampled" => {
            config.run.count_mode = CountModeConfig::Sampled;
            config.pulse.fwhm_ps = 150;
            for det in &mut config.detectors {
                det.gate_fwhm_ps = 60;
            }
        }
        other => return Err(ConfigError::UnknownPreset { name: other.to_string() }),
    }
    Ok(config)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut deserializer = serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(&mut deserializer)
            .map_err(|e| ConfigError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario().map(|_| ())?;
        self.plan().map_err(|e| ConfigError::Invalid {
            path: "run".to_string(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let scenario = Scenario {
            pulse: PulseModel {
                fwhm: TimePs::new(self.pulse.fwhm_ps),
                mean_photon_number: self.pulse.mu,
                repetition_rate_hz: self.pulse.rate_hz,
                state_distribution: self.pulse.states.to_array(),
            },
            channel: ChannelModel {
                loss_db: self.channel.loss_db,
                propagation_delay: TimePs::new(self.channel.delay_ps),
            },
            detectors: self
                .detectors
                .iter()
                .enumerate()
                .map(|(i, d)| GatedDetectorModel {
                    id: i as u8 + 1,
                    efficiency: d.efficiency,
                    dark_count_prob: d.dark_prob,
                    gate_fwhm: TimePs::new(d.gate_fwhm_ps),
                    relative_delay: TimePs::new(d.delta_t_ps),
                    routing: d.routing.to_array(),
                })
                .collect(),
            attack: AttackProfile {
                state_offset: self.attack.state_offsets.to_array().map(TimePs::new),
                common_offset: TimePs::new(self.attack.common_offset),
                active_during: match self.attack.active_during {
                    ActiveDuring::Calibration => AttackWindow::Calibration,
                    ActiveDuring::Always => AttackWindow::Always,
                },
            },
            true_arrival: TimePs::new(self.run.true_arrival_ps),
            seed: self.run.seed,
            count_mode: match self.run.count_mode {
                CountModeConfig::Expected => CountMode::Expected,
                CountModeConfig::Sampled => CountMode::Sampled,
            },
        };
        scenario.validate().map_err(|e| ConfigError::Invalid {
            path: model_error_path(&e),
            message: e.to_string(),
        })?;
        Ok(scenario)
    }

    pub fn plan(&self) -> Result<SearchPlan, PlanError> {
        let plan = SearchPlan {
            coarse_step: TimePs::new(self.run.coarse_step_ps),
            coarse_accumulation_us: ms_to_us(self.run.accumulations.coarse_ms)?,
            fine_precision: TimePs::new(self.run.precisions.fine_ps),
            fine_accumulation_us: ms_to_us(self.run.accumulations.fine_ms)?,
            fine_method: match self.run.method {
                MethodConfig::Method2 => FineMethod::Nary,
                _ => FineMethod::FixedStep,
            },
        };
        plan.validate(TimePs::new(self.pulse.fwhm_ps))?;
        Ok(plan)
    }

    pub fn delays(&self) -> Result<DelayTable, PlanError> {
        DelayTable::from_deltas(self.detectors.iter().map(|d| TimePs::new(d.delta_t_ps)).collect())
    }

    pub fn method(&self) -> Method {
        match self.run.method {
            MethodConfig::Legacy => Method::Legacy,
            MethodConfig::Method1 => Method::Method1,
            MethodConfig::Method2 => Method::Method2,
        }
    }
}

fn ms_to_us(ms: f64) -> Result<u64, PlanError> {
    let us = ms * 1000.0;
    if !us.is_finite() || us < 1.0 {
        return Err(PlanError::ZeroAccumulation);
    }
    Ok(us.round() as u64)
}

/// Best-effort config key path for a semantic model error.
fn model_error_path(e: &ModelError) -> String {
    match e {
        ModelError::StateDistribution(_) => "pulse.states".to_string(),
        ModelError::NonIntegerPeriod(_) => "pulse.rate_hz".to_string(),
        ModelError::NegativeIntensity(_) => "pulse.mu".to_string(),
        ModelError::NegativeLoss(_) => "channel.loss_db".to_string(),
        ModelError::ProbabilityRange { id, field, .. } => {
            format!("detectors[{}].{}", id - 1, field)
        }
        ModelError::RoutingColumn(state, _) => format!("detectors[].routing.{state}"),
        ModelError::NonZeroReferenceDelay(_) => "detectors[0].delta_t_ps".to_string(),
        ModelError::NoDetectors | ModelError::NonContiguousIds(..) => "detectors".to_string(),
        ModelError::NonPositiveFwhm(_) => "pulse.fwhm_ps".to_string(),
        ModelError::UnknownDetector(_) | ModelError::EmptyAccumulation => "run".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = ScenarioConfig::default();
        config.validate().unwrap();
        let text = config.to_json_pretty();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let err = ScenarioConfig::from_json(r#"{"pulse": {"fwhm_ps": 500, "shape": "sech"}}"#)
            .unwrap_err();
        match err {
            ConfigError::Parse { path, message } => {
                assert_eq!(path, "pulse.shape");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn semantic_violations_carry_key_path() {
        let mut config = ScenarioConfig::default();
        config.detectors[2].efficiency = 1.5;
        let err = config.validate().unwrap_err();
        match err {
            ConfigError::Invalid { path, .. } => assert_eq!(path, "detectors[2].efficiency"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn presets_build_valid_scenarios() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset { .. })));
    }

    #[test]
    fn method2_preset_uses_nary_and_full_step() {
        let config = preset("method2-paper").unwrap();
        assert_eq!(config.run.coarse_step_ps, 500);
        let plan = config.plan().unwrap();
        assert_eq!(plan.fine_method, FineMethod::Nary);
    }

    #[test]
    fn legacy_attack_preset_splits_arrivals() {
        let config = preset("legacy-attack").unwrap();
        let scenario = config.scenario().unwrap();
        use qsync_core::physics::{arrival_time, Polarization};
        assert_eq!(arrival_time(Polarization::H, &scenario), TimePs::new(2000));
        assert_eq!(arrival_time(Polarization::V, &scenario), TimePs::new(2500));
        assert_eq!(scenario.pulse.state_distribution, [0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn coarse_step_above_fwhm_rejected() {
        let mut config = ScenarioConfig::default();
        config.run.coarse_step_ps = 600; // pulse FWHM is 500
        assert!(config.validate().is_err());
    }
}
