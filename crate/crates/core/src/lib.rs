//! Calibration-time synchronization for a gated-detector QKD receiver.
//!
//! The crate simulates the receiver-side clock calibration of a BB84 system:
//! a statistical counting model for gated single-photon detectors
//! ([`physics`]), the two-stage parallel search schemes and the legacy
//! per-detector traversal they replace ([`syncplan`]), and the
//! calibration-shift adversary with its efficiency-mismatch metrics
//! ([`adversary`]). Searches run against a [`source::CountSource`], so the
//! same algorithms drive the in-process model or a remote emulator.
//!
//! Batch studies (seed sweeps, arrival grids) fan out over rayon when the
//! default `parallel` feature is enabled and run sequentially otherwise;
//! results are identical either way.

pub mod adversary;
pub mod batch;
pub mod physics;
pub mod source;
pub mod sweeps;
pub mod syncplan;
pub mod time;

pub use adversary::{make_shift_attack, AttackProfile, AttackWindow, MismatchReport};
pub use physics::{
    CountHistogram, CountMode, DetectorId, GatedDetectorModel, ModelError, Polarization,
    ProbeRecord, PulseModel, Scenario,
};
pub use source::{CountSource, LocalSource, SourceError};
pub use syncplan::{
    DelayTable, FineMethod, Method, PlanError, SearchPlan, SyncError, SyncOutcome,
};
pub use time::TimePs;
