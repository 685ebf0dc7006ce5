//! User capacity of pilot-contaminated TDD massive MIMO downlinks.
//!
//! The crate answers three questions about a single-cell downlink whose
//! base station learns channels from non-orthogonal uplink pilots:
//!
//! * how many users with given SINR targets are admissible for a pilot
//!   length τ (admissible-region predicates and bounds),
//! * how to build pilot sequences and downlink powers that actually meet
//!   the targets (the capacity-achieving GWBE construction, plus WBE and
//!   finite-orthogonal-sequence baselines), and
//! * whether the asymptotic SINR model those answers rely on holds at
//!   finite antenna counts (a seeded Monte Carlo link simulator).

pub mod capacity;
pub mod majorization;
pub mod model;
pub mod sequences;
pub mod simulator;

pub use capacity::SchemeKind;
pub use model::{
    Allocation, FosGrouping, ModelError, PilotMatrix, PowerAllocation, SimScenario,
    SinrRequirements, Tolerances, DEFAULT_TOLERANCES,
};
pub use sequences::WbeFrame;
