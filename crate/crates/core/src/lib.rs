//! Deterministic simulation of a bounded-space view synchronizer and the
//! Byzantine atomic-broadcast protocols layered on top of it.
//!
//! Time is measured in integer ticks. Process ids are 0-based; the leader of
//! view `v` is process `(v - 1) mod n`.

pub mod adversary;
pub mod bft;
pub mod clock;
pub mod config;
pub mod csync;
pub mod hotstuff;
pub mod msg;
pub mod node;
pub mod pbft;
pub mod rotation;
pub mod sim;
pub mod sync;
pub mod toy;
pub mod trace;

/// Simulated real or local time, in ticks.
pub type Time = u64;
/// View number. View 0 is the initial view nobody enters explicitly.
pub type View = u64;
/// Process identifier in `0..n`.
pub type Pid = usize;
/// 1-based log position.
pub type Pos = u64;

pub use config::ScenarioConfig;
pub use sim::run_scenario;
pub use trace::{EventKind, Trace, TraceEvent};
