//! The count-source abstraction the search algorithms run against.
//!
//! A [`CountSource`] answers the one question the synchronizer ever asks:
//! how many clicks did detector `i` register with its gate at `t` over an
//! accumulation window. [`LocalSource`] answers in-process from a
//! [`Scenario`]; the link crate provides a remote implementation speaking
//! the framed wire protocol, and the algorithms cannot tell them apart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversary::AttackProfile;
use crate::physics::{accumulate_counts, DetectorId, ModelError, Scenario};
use crate::time::TimePs;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The peer rejected or mangled a request. Not retriable.
    #[error("protocol error {code}: {message}")]
    Protocol { code: u16, message: String },
    /// The connection failed mid-exchange. Retriable once reconnected.
    #[error("transport error: {0}")]
    Transport(String),
}

impl SourceError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, SourceError::Transport(_))
    }
}

pub trait CountSource {
    /// Clicks of `detector_id` with the gate at `gate_time` accumulated for
    /// `accumulation_us` microseconds.
    fn counts(
        &mut self,
        detector_id: DetectorId,
        gate_time: TimePs,
        accumulation_us: u64,
    ) -> Result<u64, SourceError>;
}

/// In-process source: the physics model plus one seeded generator.
///
/// Sampled-mode draws consume the generator in query order, so a fixed
/// scenario seed and a fixed probe sequence reproduce counts exactly.
pub struct LocalSource {
    scenario: Scenario,
    rng: ChaCha8Rng,
}

impl LocalSource {
    pub fn new(scenario: Scenario) -> Result<Self, ModelError> {
        scenario.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        Ok(LocalSource { scenario, rng })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Swap the active attack profile; takes effect on the next query.
    pub fn set_attack(&mut self, attack: AttackProfile) {
        self.scenario.attack = attack;
    }
}

impl CountSource for LocalSource {
    fn counts(
        &mut self,
        detector_id: DetectorId,
        gate_time: TimePs,
        accumulation_us: u64,
    ) -> Result<u64, SourceError> {
        Ok(accumulate_counts(
            detector_id,
            gate_time,
            accumulation_us,
            &self.scenario,
            &mut self.rng,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::CountMode;

    #[test]
    fn local_source_validates_scenario() {
        let mut s = Scenario::bb84_default();
        s.detectors.clear();
        assert!(LocalSource::new(s).is_err());
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let mut s = Scenario::bb84_default();
        s.count_mode = CountMode::Sampled;
        let mut a = LocalSource::new(s.clone()).unwrap();
        let mut b = LocalSource::new(s).unwrap();
        for gate in [2050i64, 2060, 0, 9990] {
            assert_eq!(
                a.counts(1, TimePs::new(gate), 1000).unwrap(),
                b.counts(1, TimePs::new(gate), 1000).unwrap()
            );
        }
    }

    #[test]
    fn unknown_detector_surfaces_model_error() {
        let mut src = LocalSource::new(Scenario::bb84_default()).unwrap();
        let err = src.counts(9, TimePs::ZERO, 1000).unwrap_err();
        assert!(matches!(
            err,
            SourceError::Model(ModelError::UnknownDetector(9))
        ));
        assert!(!err.is_retriable());
    }
}
