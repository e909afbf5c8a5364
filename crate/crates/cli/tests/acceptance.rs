//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL ...` line
//! straight to stdout so it shows up even when output is captured.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;
use std::sync::OnceLock;

use wishsync_checker::infra::SpaceFold;
use wishsync_checker::{cases, Report, Verdict};
use wishsync_cli::catalog::{self, SAFETY, SYNC};
use wishsync_cli::runner::{self, Summary};
use wishsync_core::sim::run_with_sink;
use wishsync_core::{run_scenario, EventKind};

type Rows = Vec<(Summary, Report)>;

fn sweep(name: &str, seeds: Range<u64>) -> Rows {
    let entry = catalog::find(name).unwrap_or_else(|| panic!("no scenario {name}"));
    runner::sweep(seeds, false, |s| entry.config(s)).expect("valid configs")
}

/// Pass/fail/n-a counts per property over a set of reports.
#[derive(Default)]
struct Tally {
    counts: BTreeMap<String, [usize; 3]>,
    failures: Vec<String>,
}

impl Tally {
    fn of<'a>(rows: impl IntoIterator<Item = &'a (Summary, Report)>, props: &[&str]) -> Tally {
        let mut t = Tally::default();
        for (s, r) in rows {
            for f in r.findings.iter().filter(|f| props.contains(&f.property.as_str())) {
                let slot = match f.verdict {
                    Verdict::Pass => 0,
                    Verdict::Fail => 1,
                    Verdict::NotApplicable => 2,
                };
                t.counts.entry(f.property.clone()).or_default()[slot] += 1;
                if f.verdict == Verdict::Fail {
                    t.failures.push(format!("{} seed {}: {} {}", s.scenario, s.seed, f.property, f.detail));
                }
            }
        }
        t
    }

    fn passes(&self, prop: &str) -> usize {
        self.counts.get(prop).map_or(0, |c| c[0])
    }

    fn applicable(&self, prop: &str) -> usize {
        self.counts.get(prop).map_or(0, |c| c[0] + c[1])
    }

    fn failed(&self) -> usize {
        self.failures.len()
    }

    fn brief(&self) -> String {
        let mut s = String::new();
        for (p, [ok, bad, na]) in &self.counts {
            s += &format!(" {p}={ok}/{bad}/{na}");
        }
        if let Some(first) = self.failures.first() {
            s += &format!("; first failure: {first}");
        }
        s
    }
}

fn report(n: u32, ok: bool, detail: impl AsRef<str>) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} {}", detail.as_ref()).unwrap();
    assert!(ok, "criterion {n} failed: {}", detail.as_ref());
}

fn sync_chaos() -> &'static Rows {
    static ROWS: OnceLock<Rows> = OnceLock::new();
    ROWS.get_or_init(|| sweep("sync-chaos", 0..500))
}

fn pre_gst_chaos() -> &'static Rows {
    static ROWS: OnceLock<Rows> = OnceLock::new();
    ROWS.get_or_init(|| sweep("pre-gst-chaos", 0..300))
}

#[test]
fn criterion_01_synchronizer_properties() {
    let rows = sync_chaos();
    let props = ["monotonicity", "validity", "no-skip", "wish-monotonicity", "wish-form", "bounded-entry"];
    let t = Tally::of(rows.iter(), &props);
    let ok = rows.len() >= 500 && t.failed() == 0 && t.passes("bounded-entry") > 0;
    report(1, ok, format!("{} seeds, pass/fail/n-a:{}", rows.len(), t.brief()));
}

#[test]
fn criterion_02_entry_bounds_under_premises() {
    let mut rows: Vec<&(Summary, Report)> = sync_chaos().iter().collect();
    rows.extend(pre_gst_chaos());
    let good = sweep("good-case", 0..100);
    rows.extend(&good);
    let props = ["late-entry-bound", "advance-to-entry-bound"];
    let t = Tally::of(rows.iter().copied(), &props);
    let ok = t.failed() == 0 && props.iter().all(|p| t.applicable(p) > 0);
    report(2, ok, format!("{} traces, pass/fail/n-a:{}", rows.len(), t.brief()));
}

#[test]
fn criterion_03_toy_client_reaches_view_100() {
    let rows = sweep("toy-client", 0..100);
    let t = Tally::of(&rows, &["target-view"]);
    let lowest = rows.iter().map(|(s, _)| s.max_view).min().unwrap_or(0);
    let ok = t.passes("target-view") == rows.len();
    report(3, ok, format!("{} seeds, lowest max view {lowest},{}", rows.len(), t.brief()));
}

#[test]
fn criterion_04_consensus_synchronizer() {
    let rows = sweep("consensus-sync", 0..100);
    let props = ["cs-local-order", "cs-after-gst", "cs-all-enter", "cs-bounded-entry", "cs-duration-gap"];
    let t = Tally::of(&rows, &props);
    let ok = props.iter().all(|p| t.passes(p) == rows.len());
    report(4, ok, format!("{} seeds, pass/fail/n-a:{}", rows.len(), t.brief()));
}

#[test]
fn criterion_05_pbft_light_safety() {
    let mut rows = sweep("equivocating-leader", 0..200);
    rows.extend(sweep("stale-cert", 0..200));
    rows.extend(sweep("view-change-stress", 0..200));
    rows.extend(sweep("good-case", 0..50));
    rows.extend(pre_gst_chaos().iter().take(50).cloned());
    let t = Tally::of(&rows, SAFETY);
    let ok = rows.len() >= 500 && t.failed() == 0 && SAFETY.iter().all(|p| t.passes(p) == rows.len());
    report(5, ok, format!("{} seeds, pass/fail/n-a:{}", rows.len(), t.brief()));
}

#[test]
fn criterion_06_pbft_light_recovery_bound() {
    let rows = pre_gst_chaos();
    let t = Tally::of(rows.iter(), &["recovery-bound", "liveness"]);
    let applicable = t.applicable("recovery-bound");
    let ok = t.failed() == 0 && applicable > 0;
    report(6, ok, format!("{} seeds, premises held in {applicable}, pass/fail/n-a:{}", rows.len(), t.brief()));
}

#[test]
fn criterion_07_good_case_latency() {
    let rows = sweep("good-case", 0..100);
    let t = Tally::of(&rows, &["good-case", "startup"]);
    let first_view_one = rows.iter().all(|(s, _)| s.first_good_view == 1);
    let ok = t.passes("good-case") == rows.len() && first_view_one && t.failed() == 0;
    report(7, ok, format!("{} seeds, first good view 1 everywhere: {first_view_one},{}", rows.len(), t.brief()));
}

#[test]
fn criterion_08_rotation() {
    let crashed = sweep("crashed-leader", 0..200);
    let pre = sweep("rotation-pre-gst", 0..100);
    let censor = sweep("censorship", 0..50);
    let tc = Tally::of(&crashed, &["crashed-leader"]);
    let tp = Tally::of(&pre, &["rotation-recovery-bound"]);
    let tl = Tally::of(crashed.iter().chain(&pre).chain(&censor), &["liveness", "position-discipline"]);
    let ts = Tally::of(crashed.iter().chain(&pre).chain(&censor), SAFETY);
    let censored_ok = Tally::of(&censor, &["liveness"]).passes("liveness") == censor.len();
    let ok = tc.failed() == 0
        && tc.applicable("crashed-leader") > 0
        && tp.failed() == 0
        && tp.applicable("rotation-recovery-bound") > 0
        && tl.failed() == 0
        && ts.failed() == 0
        && censored_ok;
    report(
        8,
        ok,
        format!(
            "crashed leader:{}; pre-GST:{}; liveness:{}; censorship delivered everything: {censored_ok}",
            tc.brief(),
            tp.brief(),
            tl.brief()
        ),
    );
}

#[test]
fn criterion_09_hotstuff_light() {
    let good = sweep("hotstuff-good", 0..100);
    let byz = sweep("hotstuff-byzantine", 0..100);
    let mut props: Vec<&str> = SAFETY.to_vec();
    props.push("position-discipline");
    let ts = Tally::of(good.iter().chain(&byz), &props);
    let tl = Tally::of(good.iter().chain(&byz), &["liveness"]);
    let ok = ts.failed() == 0
        && SAFETY.iter().all(|p| ts.passes(p) == good.len() + byz.len())
        && tl.passes("liveness") == good.len() + byz.len();
    report(9, ok, format!("{} seeds, safety:{}; liveness:{}", good.len() + byz.len(), ts.brief(), tl.brief()));
}

#[test]
fn criterion_10_bounded_space_under_wish_spam() {
    let cfg = catalog::find("wish-spam").unwrap().config(0);
    let n = cfg.n;
    let mut fold = SpaceFold::new(n);
    let (mut index, mut max_view) = (0usize, 0u64);
    run_with_sink(cfg, &mut |e| {
        if let EventKind::EnterView { v } = e.kind {
            max_view = max_view.max(v);
        }
        fold.observe(index, &e);
        index += 1;
    })
    .expect("valid config");
    let f = fold.finding();
    let ok = max_view >= 1000 && f.verdict == Verdict::Pass;
    report(
        10,
        ok,
        format!(
            "{index} events, {max_view} views, max view entries {} <= {n}, max buffer slots {} <= {}, {} samples",
            fold.max_sync_entries,
            fold.max_future_slots,
            6 * n,
            fold.samples
        ),
    );
}

#[test]
fn criterion_11_checker_self_test() {
    let results = cases::outcomes();
    let broken: Vec<&str> = results.iter().filter(|(_, f, a)| !f || !a).map(|(p, _, _)| *p).collect();
    let ok = results.len() >= 12 && broken.is_empty();
    report(11, ok, format!("{} properties, broken: {broken:?}", results.len()));
}

#[test]
fn criterion_12_determinism() {
    let mut checked = 0;
    let mut differing = Vec::new();
    for entry in catalog::catalog() {
        for seed in 0..3 {
            let mut cfg = entry.config(seed);
            if entry.name == "wish-spam" {
                cfg.horizon = 20_000;
                cfg.gst = cfg.horizon - 1;
            }
            let a = run_scenario(&cfg).unwrap().to_jsonl();
            let b = std::thread::spawn(move || run_scenario(&cfg).unwrap().to_jsonl()).join().unwrap();
            checked += 1;
            if a != b {
                differing.push(format!("{} seed {seed}", entry.name));
            }
        }
    }
    report(12, differing.is_empty(), format!("{checked} runs repeated, differing: {differing:?}"));
}

#[test]
fn sync_property_list_is_checked_everywhere() {
    for entry in catalog::catalog() {
        let cfg = entry.config(0);
        for p in SYNC.iter().filter(|p| **p != "late-entry-bound") {
            assert!(cfg.checks.properties.iter().any(|q| q == p), "{} lacks {p}", entry.name);
        }
    }
}
