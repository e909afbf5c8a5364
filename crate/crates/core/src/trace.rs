//! Observable events of a run and their JSON-lines encoding.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::msg::{SignedMsg, Value};
use crate::{Pid, Pos, Time, View};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerId {
    /// Per-value delivery timer (PBFT-light).
    Delivery(Value),
    /// Single delivery timer (rotation protocols).
    DeliveryBatch,
    Recovery,
    Broadcast,
    /// Consensus-synchronizer view timer.
    View,
    /// Toy client timer.
    Toy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvanceCause {
    Start,
    Timer,
    /// A full batch was delivered (rotation protocols).
    Batch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dest {
    All,
    To(Pid),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data")]
pub enum EventKind {
    Start,
    EnterView { v: View },
    /// `v` is the last view the process entered (0 if none).
    AdvanceCall { v: View, cause: AdvanceCause },
    EnterConsensusView { v: View },
    Send { id: u64, dest: Dest, msg: SignedMsg },
    Receive { id: u64, from: Pid, sent_at: Time },
    Deliver { position: Pos, value: Value },
    BroadcastCall { value: Value },
    TimerStart { timer: TimerId, duration: Time },
    TimerStop { timer: TimerId },
    TimerExpire { timer: TimerId },
    /// Storage high-water marks: synchronizer view entries, occupied
    /// future-message slots, and messages held in those slots.
    MemSample { sync_entries: usize, future_slots: usize, future_msgs: usize },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Start => "Start",
            EventKind::EnterView { .. } => "EnterView",
            EventKind::AdvanceCall { .. } => "AdvanceCall",
            EventKind::EnterConsensusView { .. } => "EnterConsensusView",
            EventKind::Send { .. } => "Send",
            EventKind::Receive { .. } => "Receive",
            EventKind::Deliver { .. } => "Deliver",
            EventKind::BroadcastCall { .. } => "BroadcastCall",
            EventKind::TimerStart { .. } => "TimerStart",
            EventKind::TimerStop { .. } => "TimerStop",
            EventKind::TimerExpire { .. } => "TimerExpire",
            EventKind::MemSample { .. } => "MemSample",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: Time,
    pub pid: Pid,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub config: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty trace")]
    Empty,
    #[error("unsupported trace format {0}")]
    Format(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Trace {
    pub fn new(config: ScenarioConfig) -> Self {
        Trace { header: TraceHeader { format: TRACE_FORMAT, config }, events: Vec::new() }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.header.config
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut lines = r.lines().enumerate();
        let header = loop {
            let Some((i, line)) = lines.next() else {
                return Err(TraceError::Empty);
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let h: TraceHeader = serde_json::from_str(&line)
                .map_err(|e| TraceError::Parse { line: i + 1, msg: e.to_string() })?;
            break h;
        };
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Format(header.format));
        }
        let mut events = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(&line)
                .map_err(|e| TraceError::Parse { line: i + 1, msg: e.to_string() })?;
            events.push(e);
        }
        Ok(Trace { header, events })
    }

    pub fn parse(s: &str) -> Result<Trace, TraceError> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Protocol;
    use crate::msg::{KeyRing, Msg};

    fn sample() -> Trace {
        let cfg = ScenarioConfig::baseline(Protocol::PbftLight, 1, 3);
        let keys = KeyRing::new(4, 3);
        let mut t = Trace::new(cfg);
        let kinds = vec![
            EventKind::Start,
            EventKind::AdvanceCall { v: 0, cause: AdvanceCause::Start },
            EventKind::Send { id: 0, dest: Dest::All, msg: keys.signer(0).sign(Msg::Wish { v: 1 }) },
            EventKind::Receive { id: 0, from: 0, sent_at: 0 },
            EventKind::EnterView { v: 1 },
            EventKind::TimerStart { timer: TimerId::Delivery(Value::op(3, "p")), duration: 40 },
            EventKind::TimerExpire { timer: TimerId::Recovery },
            EventKind::Deliver { position: 1, value: Value::op(3, "p") },
            EventKind::MemSample { sync_entries: 4, future_slots: 1, future_msgs: 2 },
        ];
        for (i, kind) in kinds.into_iter().enumerate() {
            t.events.push(TraceEvent { t: i as Time, pid: 0, kind });
        }
        t
    }

    #[test]
    fn jsonl_roundtrip() {
        let t = sample();
        let s = t.to_jsonl();
        assert!(s.lines().next().unwrap().starts_with("{\"format\":1"));
        assert!(s.contains("\"kind\":\"EnterView\",\"data\":{\"v\":1}"), "{s}");
        assert_eq!(Trace::parse(&s).unwrap(), t);
    }

    #[test]
    fn parse_error_reports_line() {
        let mut s = sample().to_jsonl();
        s.push_str("{\"t\":1,\"pid\":0,\"kind\":\"Bogus\"}\n");
        match Trace::parse(&s) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }
}
