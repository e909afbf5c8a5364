//! Simulate, check and summarize scenarios.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use wishsync_checker::{Metrics, Report, Verdict};
use wishsync_core::msg::Value;
use wishsync_core::{run_scenario, EventKind, Pid, ScenarioConfig, Time, Trace};

/// Runs the properties requested by the config, or all of them.
pub fn check_trace(trace: &Trace) -> Report {
    let props = &trace.config().checks.properties;
    if props.is_empty() {
        wishsync_checker::check(trace)
    } else {
        let ids: Vec<&str> = props.iter().map(String::as_str).collect();
        wishsync_checker::check_only(trace, &ids)
    }
}

/// One sweep row.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub protocol: String,
    pub seed: u64,
    pub passed: bool,
    pub failed: String,
    pub not_applicable: usize,
    pub first_good_view: u64,
    /// `tl(𝒱) - GST`, when every correct process entered the first good view.
    pub good_view_entry_after_gst: Option<Time>,
    pub max_view: u64,
    pub broadcasts: usize,
    /// Values delivered by every correct process.
    pub delivered_by_all: usize,
    /// Time from a correct broadcast to its last correct delivery.
    pub mean_delivery_latency: Option<f64>,
    pub max_delivery_latency: Option<Time>,
    pub events: usize,
}

pub fn summarize(trace: &Trace, report: &Report, strict: bool) -> Summary {
    let cfg = trace.config();
    let m = Metrics::compute(trace);
    let good = m.first_good_view();
    let good_entry = (m.all_entered(good)).then(|| m.tl[&good].0.saturating_sub(cfg.gst));

    let correct: Vec<Pid> = m.correct_pids().collect();
    let mut sent: Vec<(Pid, Time, Value)> = Vec::new();
    let mut first: HashMap<(Pid, Value), Time> = HashMap::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::BroadcastCall { value } if m.correct[e.pid] => sent.push((e.pid, e.t, value.clone())),
            EventKind::Deliver { value, .. } => {
                first.entry((e.pid, value.clone())).or_insert(e.t);
            }
            _ => {}
        }
    }
    let latencies: Vec<Time> = sent
        .iter()
        .filter_map(|(_, t, x)| {
            let last = correct.iter().map(|&p| first.get(&(p, x.clone())).copied()).collect::<Option<Vec<_>>>()?;
            last.into_iter().max().map(|d| d.saturating_sub(*t))
        })
        .collect();
    let failed: Vec<&str> = report.failures().map(|f| f.property.as_str()).collect();
    Summary {
        scenario: cfg.name.clone().unwrap_or_default(),
        protocol: cfg.protocol.name().to_string(),
        seed: cfg.seed,
        passed: report.accepted(strict),
        failed: failed.join(" "),
        not_applicable: report.findings.iter().filter(|f| f.verdict == Verdict::NotApplicable).count(),
        first_good_view: good,
        good_view_entry_after_gst: good_entry,
        max_view: m.max_view(),
        broadcasts: sent.len(),
        delivered_by_all: latencies.len(),
        mean_delivery_latency: (!latencies.is_empty())
            .then(|| latencies.iter().sum::<Time>() as f64 / latencies.len() as f64),
        max_delivery_latency: latencies.iter().max().copied(),
        events: trace.events.len(),
    }
}

pub struct Outcome {
    pub trace: Trace,
    pub report: Report,
    pub summary: Summary,
}

pub fn run_and_check(cfg: &ScenarioConfig, strict: bool) -> anyhow::Result<Outcome> {
    let trace = run_scenario(cfg)?;
    let report = check_trace(&trace);
    let summary = summarize(&trace, &report, strict);
    Ok(Outcome { trace, report, summary })
}

/// Runs `make(seed)` for every seed in parallel; results are in seed order.
pub fn sweep<F>(seeds: std::ops::Range<u64>, strict: bool, make: F) -> anyhow::Result<Vec<(Summary, Report)>>
where
    F: Fn(u64) -> ScenarioConfig + Sync,
{
    let seeds: Vec<u64> = seeds.collect();
    seeds
        .par_iter()
        .map(|&s| {
            let out = run_and_check(&make(s), strict)?;
            Ok((out.summary, out.report))
        })
        .collect()
}

pub fn write_csv<W: std::io::Write>(w: W, rows: &[Summary]) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
