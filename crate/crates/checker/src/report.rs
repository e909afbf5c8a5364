use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use wishsync_core::TraceEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The property's premises do not hold in this trace.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub index: usize,
    pub event: TraceEvent,
}

/// A compared inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub what: String,
    pub lhs: u64,
    pub rhs: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub property: String,
    pub verdict: Verdict,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<Witness>,
    /// The tightest bound compared (on failure, the violated one).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Bound>,
    /// Number of instances examined.
    pub checked: usize,
}

impl Finding {
    pub fn pass(property: &str, checked: usize) -> Self {
        Finding {
            property: property.to_string(),
            verdict: Verdict::Pass,
            detail: String::new(),
            witness: Vec::new(),
            bound: None,
            checked,
        }
    }

    pub fn na(property: &str, why: impl Into<String>) -> Self {
        Finding { verdict: Verdict::NotApplicable, detail: why.into(), ..Finding::pass(property, 0) }
    }

    pub fn fail(property: &str, detail: impl Into<String>, witness: Vec<Witness>) -> Self {
        Finding { verdict: Verdict::Fail, detail: detail.into(), witness, ..Finding::pass(property, 0) }
    }

    pub fn with_bound(mut self, what: impl Into<String>, lhs: u64, rhs: u64) -> Self {
        self.bound = Some(Bound { what: what.into(), lhs, rhs });
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub findings: Vec<Finding>,
}

impl Report {
    pub fn get(&self, property: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| f.property == property)
    }

    pub fn verdict(&self, property: &str) -> Option<Verdict> {
        self.get(property).map(|f| f.verdict)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.verdict == Verdict::Fail)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    /// Passed, and if `strict`, no property was left inapplicable.
    pub fn accepted(&self, strict: bool) -> bool {
        self.passed() && (!strict || self.findings.iter().all(|f| f.verdict != Verdict::NotApplicable))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let width = self.findings.iter().map(|f| f.property.len()).max().unwrap_or(8).max(8);
        let mut s = String::new();
        if let Some(name) = &self.scenario {
            let _ = writeln!(s, "scenario: {name}");
        }
        let _ = writeln!(s, "{:<width$}  {:<6}  {:>7}  detail", "property", "result", "checked");
        for f in &self.findings {
            let verdict = match f.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::NotApplicable => "n/a",
            };
            let mut detail = f.detail.clone();
            if let Some(b) = &f.bound {
                if !detail.is_empty() {
                    detail.push_str("; ");
                }
                let _ = write!(detail, "{}: {} <= {}", b.what, b.lhs, b.rhs);
            }
            if let Some(w) = f.witness.first() {
                let _ = write!(detail, " [event {} t={} pid={} {}]", w.index, w.event.t, w.event.pid, w.event.kind.name());
            }
            let _ = writeln!(s, "{:<width$}  {:<6}  {:>7}  {}", f.property, verdict, f.checked, detail);
        }
        s
    }
}
