//! Scenario configuration: every timing and fault parameter of one run.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Rate;
use crate::{Pid, Time, View};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    PbftLight,
    PbftRotation,
    HotstuffLight,
    ToyClient,
    ConsensusSync,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::PbftLight => "pbft-light",
            Protocol::PbftRotation => "pbft-rotation",
            Protocol::HotstuffLight => "hotstuff-light",
            Protocol::ToyClient => "toy-client",
            Protocol::ConsensusSync => "consensus-sync",
        }
    }

    pub fn is_smr(&self) -> bool {
        matches!(
            self,
            Protocol::PbftLight | Protocol::PbftRotation | Protocol::HotstuffLight
        )
    }

    pub fn is_batched(&self) -> bool {
        matches!(self, Protocol::PbftRotation | Protocol::HotstuffLight)
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown protocol `{s}`"))
    }
}

/// How post-GST message delays are drawn from `[1, delta]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMode {
    #[default]
    Uniform,
    Max,
    Min,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default)]
    pub post_gst: DelayMode,
}

/// Misbehaviour of a faulty process.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Behavior {
    /// Runs the protocol correctly until `at`, then stops sending anything.
    Crash {
        #[serde(default)]
        at: Time,
    },
    /// Runs the protocol and additionally sends WISHes for random views to
    /// random subsets every period.
    RandomWish {
        #[serde(default = "default_jump")]
        max_jump: View,
    },
    /// Sends WISHes for ever-higher views to everyone every period.
    WishSpam {
        #[serde(default = "default_jump")]
        step: View,
    },
    /// As leader, proposes different values for the same slot to different
    /// halves of the system; votes for every hash it sees.
    Equivocate,
    /// As leader, replaces the listed client values with `nop` proposals.
    Censor { ids: Vec<u64> },
    /// As leader, withholds all proposals and view-initialization messages.
    Withhold,
    /// Reports the oldest prepared certificate it has seen for each position
    /// when changing views.
    StaleCert,
}

fn default_jump() -> View {
    1000
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultDirective {
    /// Drop messages sent before GST with the given probability.
    Drop {
        permille: u32,
        #[serde(default)]
        from: Option<Vec<Pid>>,
        #[serde(default)]
        to: Option<Vec<Pid>>,
    },
    /// Delay messages sent before GST by up to `max` ticks (may land after GST).
    Delay { max: Time },
    /// Drop messages crossing group boundaries sent before `min(until, GST)`.
    Partition { groups: Vec<Vec<Pid>>, until: Time },
    /// Behaviour of a process in the faulty set.
    Byzantine { pid: Pid, behavior: Behavior },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientOp {
    pub pid: Pid,
    pub t: Time,
    pub id: u64,
    #[serde(default)]
    pub payload: Option<String>,
}

/// Parameters used only by the checker.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckParams {
    /// A value broadcast by a correct process at `t` must be delivered by
    /// every correct process by `max(t, gst) + grace`, when that is inside
    /// the horizon.
    #[serde(default)]
    pub liveness_grace: Option<Time>,
    /// Minimum highest view a correct process must reach (toy client).
    #[serde(default)]
    pub target_view: Option<View>,
    /// Property ids to check; empty means every applicable property.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub format: u32,
    /// Wall-clock meaning of one tick; documentation only.
    #[serde(default)]
    pub tick_ns: Option<u64>,
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    pub f: usize,
    #[serde(default)]
    pub faulty_set: Vec<Pid>,
    pub gst: Time,
    pub delta: Time,
    pub delta_cap: Time,
    pub rho: Time,
    pub tau: Time,
    #[serde(default)]
    pub t_broadcast: Time,
    #[serde(default = "default_batch")]
    pub batch: u64,
    pub init_dur_delivery: Time,
    pub init_dur_recovery: Time,
    /// Per-process pre-GST clock rates; empty means every clock is exact.
    #[serde(default)]
    pub drift: Vec<Rate>,
    pub seed: u64,
    pub horizon: Time,
    pub protocol: Protocol,
    #[serde(default)]
    pub latency_mode: bool,
    /// Per-process time of the `start()` call; empty means all start at 0.
    #[serde(default)]
    pub start_times: Vec<Time>,
    #[serde(default)]
    pub broadcasts: Vec<ClientOp>,
    #[serde(default)]
    pub fault_plan: Vec<FaultDirective>,
    #[serde(default)]
    pub network: NetworkConfig,
    /// Consensus-sync view duration slope: `F(v) = v * view_duration`.
    /// Defaults to `delta_cap`.
    #[serde(default)]
    pub view_duration: Option<Time>,
    #[serde(default)]
    pub checks: CheckParams,
}

fn default_batch() -> u64 {
    1
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unsupported config format {0}, expected {FORMAT_VERSION}")]
    Format(u32),
    #[error("n = {n} but f = {f}; need n = 3f + 1")]
    Resilience { n: usize, f: usize },
    #[error("faulty set has {0} members, more than f")]
    TooManyFaulty(usize),
    #[error("process id {0} out of range")]
    BadPid(Pid),
    #[error("delta must satisfy 1 <= delta <= delta_cap")]
    Delta,
    #[error("horizon must exceed gst")]
    Horizon,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("{0} must have n entries or be empty")]
    Length(&'static str),
    #[error("clock rates must be positive")]
    Rate,
    #[error("behaviour assigned to process {0}, which is not in the faulty set")]
    NotFaulty(Pid),
    #[error("duplicate broadcast value id {0}")]
    DuplicateValue(u64),
    #[error("invalid json: {0}")]
    Json(String),
}

impl ScenarioConfig {
    /// A benign baseline: n = 3f+1 processes, no faults, all clocks exact.
    pub fn baseline(protocol: Protocol, f: usize, seed: u64) -> Self {
        ScenarioConfig {
            format: FORMAT_VERSION,
            tick_ns: Some(1_000_000),
            name: None,
            n: 3 * f + 1,
            f,
            faulty_set: Vec::new(),
            gst: 0,
            delta: 10,
            delta_cap: 12,
            rho: 15,
            tau: 10,
            t_broadcast: 30,
            batch: 2,
            init_dur_delivery: 60,
            init_dur_recovery: 80,
            drift: Vec::new(),
            seed,
            horizon: 2_000,
            protocol,
            latency_mode: false,
            start_times: Vec::new(),
            broadcasts: Vec::new(),
            fault_plan: Vec::new(),
            network: NetworkConfig::default(),
            view_duration: None,
            checks: CheckParams::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(s).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.format != FORMAT_VERSION {
            return Err(ConfigError::Format(self.format));
        }
        if self.n != 3 * self.f + 1 {
            return Err(ConfigError::Resilience { n: self.n, f: self.f });
        }
        let faulty: BTreeSet<Pid> = self.faulty_set.iter().copied().collect();
        if faulty.len() > self.f {
            return Err(ConfigError::TooManyFaulty(faulty.len()));
        }
        if let Some(&p) = faulty.iter().find(|&&p| p >= self.n) {
            return Err(ConfigError::BadPid(p));
        }
        if self.delta == 0 || self.delta > self.delta_cap {
            return Err(ConfigError::Delta);
        }
        if self.horizon <= self.gst {
            return Err(ConfigError::Horizon);
        }
        for (name, v) in [
            ("rho", self.rho),
            ("tau", self.tau),
            ("init_dur_delivery", self.init_dur_delivery),
            ("init_dur_recovery", self.init_dur_recovery),
            ("batch", self.batch),
        ] {
            if v == 0 {
                return Err(ConfigError::NonPositive(name));
            }
        }
        if self.protocol.is_batched() && self.t_broadcast == 0 {
            return Err(ConfigError::NonPositive("t_broadcast"));
        }
        if self.view_duration == Some(0) {
            return Err(ConfigError::NonPositive("view_duration"));
        }
        if !self.drift.is_empty() && self.drift.len() != self.n {
            return Err(ConfigError::Length("drift"));
        }
        if self.drift.iter().any(|r| !r.is_valid()) {
            return Err(ConfigError::Rate);
        }
        if !self.start_times.is_empty() && self.start_times.len() != self.n {
            return Err(ConfigError::Length("start_times"));
        }
        let mut ids = BTreeSet::new();
        for op in &self.broadcasts {
            if op.pid >= self.n {
                return Err(ConfigError::BadPid(op.pid));
            }
            if !ids.insert(op.id) {
                return Err(ConfigError::DuplicateValue(op.id));
            }
        }
        for d in &self.fault_plan {
            match d {
                FaultDirective::Byzantine { pid, .. } => {
                    if !faulty.contains(pid) {
                        return Err(ConfigError::NotFaulty(*pid));
                    }
                }
                FaultDirective::Drop { from, to, .. } => {
                    for p in from.iter().chain(to.iter()).flatten() {
                        if *p >= self.n {
                            return Err(ConfigError::BadPid(*p));
                        }
                    }
                }
                FaultDirective::Partition { groups, .. } => {
                    for p in groups.iter().flatten() {
                        if *p >= self.n {
                            return Err(ConfigError::BadPid(*p));
                        }
                    }
                }
                FaultDirective::Delay { .. } => {}
            }
        }
        Ok(())
    }

    pub fn quorum(&self) -> usize {
        2 * self.f + 1
    }

    pub fn is_faulty(&self, p: Pid) -> bool {
        self.faulty_set.contains(&p)
    }

    pub fn correct(&self) -> impl Iterator<Item = Pid> + '_ {
        (0..self.n).filter(move |p| !self.is_faulty(*p))
    }

    pub fn start_time(&self, p: Pid) -> Time {
        self.start_times.get(p).copied().unwrap_or(0)
    }

    pub fn rate(&self, p: Pid) -> Rate {
        self.drift.get(p).copied().unwrap_or(Rate::ONE)
    }

    /// Behaviour of process `p`, or `None` if it is correct. Faulty processes
    /// without an explicit directive are crashed from the start.
    pub fn behavior(&self, p: Pid) -> Option<Behavior> {
        if !self.is_faulty(p) {
            return None;
        }
        let explicit = self.fault_plan.iter().find_map(|d| match d {
            FaultDirective::Byzantine { pid, behavior } if *pid == p => Some(behavior.clone()),
            _ => None,
        });
        Some(explicit.unwrap_or(Behavior::Crash { at: 0 }))
    }

    /// `F(v)` for the consensus synchronizer.
    pub fn view_duration_of(&self, v: View) -> Time {
        v * self.view_duration.unwrap_or(self.delta_cap)
    }

    /// Latency-mode caps `(recovery, delivery)` on timeout durations.
    pub fn duration_caps(&self) -> (Time, Time) {
        let d = self.delta_cap;
        match self.protocol {
            Protocol::PbftLight => (6 * d, 4 * d),
            Protocol::PbftRotation => (4 * d, (4 * d).max(self.t_broadcast + 3 * d)),
            Protocol::HotstuffLight => (4 * d, (5 * d).max(self.t_broadcast + 4 * d)),
            Protocol::ToyClient | Protocol::ConsensusSync => (Time::MAX, Time::MAX),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_valid() {
        for p in [
            Protocol::PbftLight,
            Protocol::PbftRotation,
            Protocol::HotstuffLight,
            Protocol::ToyClient,
            Protocol::ConsensusSync,
        ] {
            ScenarioConfig::baseline(p, 1, 0).validate().unwrap();
        }
    }

    #[test]
    fn rejects_wrong_resilience() {
        let mut c = ScenarioConfig::baseline(Protocol::PbftLight, 1, 0);
        c.n = 5;
        assert_eq!(c.validate(), Err(ConfigError::Resilience { n: 5, f: 1 }));
    }

    #[test]
    fn rejects_delta_above_cap() {
        let mut c = ScenarioConfig::baseline(Protocol::PbftLight, 1, 0);
        c.delta = c.delta_cap + 1;
        assert_eq!(c.validate(), Err(ConfigError::Delta));
    }

    #[test]
    fn rejects_behavior_for_correct_process() {
        let mut c = ScenarioConfig::baseline(Protocol::PbftLight, 1, 0);
        c.fault_plan.push(FaultDirective::Byzantine {
            pid: 2,
            behavior: Behavior::Withhold,
        });
        assert_eq!(c.validate(), Err(ConfigError::NotFaulty(2)));
    }

    #[test]
    fn json_roundtrip() {
        let mut c = ScenarioConfig::baseline(Protocol::HotstuffLight, 1, 9);
        c.faulty_set = vec![3];
        c.drift = vec![Rate::new(1, 2), Rate::ONE, Rate::new(3, 1), Rate::ONE];
        c.fault_plan = vec![
            FaultDirective::Drop { permille: 200, from: None, to: Some(vec![1]) },
            FaultDirective::Byzantine { pid: 3, behavior: Behavior::Censor { ids: vec![4] } },
        ];
        let s = c.to_json_pretty();
        assert!(s.contains("\"hotstuff-light\""));
        assert_eq!(ScenarioConfig::from_json(&s).unwrap(), c);
    }

    #[test]
    fn unlisted_faulty_process_crashes() {
        let mut c = ScenarioConfig::baseline(Protocol::PbftLight, 1, 0);
        c.faulty_set = vec![0];
        assert_eq!(c.behavior(0), Some(Behavior::Crash { at: 0 }));
        assert_eq!(c.behavior(1), None);
    }
}
