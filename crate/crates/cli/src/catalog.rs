//! Named scenario families. Each entry builds a config from a seed and names
//! the properties it is meant to exercise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wishsync_core::clock::Rate;
use wishsync_core::config::{Behavior, ClientOp, FaultDirective, Protocol};
use wishsync_core::msg::leader;
use wishsync_core::{Pid, ScenarioConfig, Time};

pub const INFRA: &[&str] = &["event-order", "post-gst-delay", "unforgeability", "bounded-space"];

pub const SYNC: &[&str] = &[
    "monotonicity",
    "validity",
    "no-skip",
    "wish-monotonicity",
    "wish-form",
    "bounded-entry",
    "late-entry-bound",
    "advance-to-entry-bound",
];

pub const SAFETY: &[&str] = &[
    "integrity",
    "external-validity",
    "ordering",
    "prepared-uniqueness",
    "committed-prepared",
    "commit-agreement",
    "committed-uniqueness",
];

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn(u64) -> ScenarioConfig,
    extra: &'static [&'static str],
}

impl Entry {
    /// The scenario for `seed`, with its property list filled in.
    pub fn config(&self, seed: u64) -> ScenarioConfig {
        let mut cfg = (self.build)(seed);
        cfg.name = Some(self.name.to_string());
        cfg.seed = seed;
        let mut props: Vec<&str> = INFRA.iter().chain(SYNC).copied().collect();
        // Nothing starts before GST, so the pre-GST entry bound cannot apply.
        if (0..cfg.n).all(|p| cfg.start_time(p) >= cfg.gst) {
            props.retain(|&p| p != "late-entry-bound");
        }
        if cfg.protocol.is_smr() {
            props.extend(SAFETY);
        }
        props.extend(self.extra);
        cfg.checks.properties = props.into_iter().map(String::from).collect();
        cfg
    }
}

pub fn catalog() -> Vec<Entry> {
    vec![
        Entry {
            name: "good-case",
            summary: "PBFT-light started after GST with a correct first leader",
            build: good_case,
            extra: &["good-case", "liveness", "startup"],
        },
        Entry {
            name: "pre-gst-chaos",
            summary: "PBFT-light started before GST under loss, delay, drift and partitions",
            build: pre_gst_chaos,
            extra: &["recovery-bound", "liveness"],
        },
        Entry {
            name: "equivocating-leader",
            summary: "PBFT-light whose first leader equivocates, with pre-GST chaos",
            build: equivocating_leader,
            extra: &["liveness"],
        },
        Entry {
            name: "view-change-stress",
            summary: "PBFT-light with an equivocating first leader, dense client load and long asynchrony",
            build: view_change_stress,
            extra: &[],
        },
        Entry {
            name: "stale-cert",
            summary: "PBFT-light with a process reporting stale prepared certificates",
            build: stale_cert,
            extra: &["liveness"],
        },
        Entry {
            name: "crashed-leader",
            summary: "PBFT-rotation started after GST with an initially crashed leader",
            build: crashed_leader,
            extra: &["crashed-leader", "liveness", "position-discipline"],
        },
        Entry {
            name: "rotation-pre-gst",
            summary: "PBFT-rotation started before GST under chaos",
            build: rotation_pre_gst,
            extra: &["rotation-recovery-bound", "liveness", "position-discipline"],
        },
        Entry {
            name: "censorship",
            summary: "PBFT-rotation with a leader replacing client values by nop",
            build: censorship,
            extra: &["liveness", "position-discipline"],
        },
        Entry {
            name: "hotstuff-good",
            summary: "HotStuff-light started after GST with one crashed process",
            build: hotstuff_good,
            extra: &["liveness", "position-discipline"],
        },
        Entry {
            name: "hotstuff-byzantine",
            summary: "HotStuff-light with an equivocating or stale-certificate process and pre-GST chaos",
            build: hotstuff_byzantine,
            extra: &["liveness", "position-discipline"],
        },
        Entry {
            name: "toy-client",
            summary: "Synchronizer driven by the toy client, with a random-WISH adversary",
            build: toy_client,
            extra: &["target-view", "progress"],
        },
        Entry {
            name: "consensus-sync",
            summary: "Consensus synchronizer with F(v) = v * delta_cap under pre-GST chaos",
            build: consensus_sync,
            extra: &["cs-local-order", "cs-after-gst", "cs-all-enter", "cs-bounded-entry", "cs-duration-gap"],
        },
        Entry {
            name: "sync-chaos",
            summary: "Every protocol in turn under pre-GST chaos and a random-WISH adversary",
            build: sync_chaos,
            extra: &[],
        },
        Entry {
            name: "wish-spam",
            summary: "PBFT-light kept asynchronous under sustained high-view WISH spam for many views",
            build: wish_spam,
            extra: &[],
        },
    ]
}

pub fn find(name: &str) -> Option<Entry> {
    catalog().into_iter().find(|e| e.name == name)
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ salt)
}

fn base(protocol: Protocol, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::baseline(protocol, 1, seed);
    c.latency_mode = true;
    c
}

fn byzantine(c: &mut ScenarioConfig, pid: Pid, behavior: Behavior) {
    c.faulty_set = vec![pid];
    c.fault_plan.push(FaultDirective::Byzantine { pid, behavior });
}

/// `count` client values at random correct processes in `[from, to)`.
fn broadcasts(c: &mut ScenarioConfig, r: &mut ChaCha8Rng, count: u64, from: Time, to: Time) {
    let correct: Vec<Pid> = c.correct().collect();
    for id in 1..=count {
        let pid = *correct.choose(r).expect("some correct process");
        c.broadcasts.push(ClientOp { pid, t: r.gen_range(from..to), id, payload: None });
    }
}

/// Loss, delay, partitions and clock drift before GST, and scattered starts.
fn chaos(c: &mut ScenarioConfig, r: &mut ChaCha8Rng) {
    let n = c.n;
    c.drift = (0..n).map(|_| Rate::new(r.gen_range(7..=13), 10)).collect();
    c.start_times = (0..n).map(|_| r.gen_range(0..c.gst / 3)).collect();
    c.fault_plan.push(FaultDirective::Drop { permille: r.gen_range(100..450), from: None, to: None });
    c.fault_plan.push(FaultDirective::Delay { max: r.gen_range(c.delta..c.gst / 2) });
    let mut pids: Vec<Pid> = (0..n).collect();
    pids.shuffle(r);
    let cut = r.gen_range(1..n);
    c.fault_plan.push(FaultDirective::Partition {
        groups: vec![pids[..cut].to_vec(), pids[cut..].to_vec()],
        until: r.gen_range(c.gst / 4..c.gst),
    });
}

/// A random faulty process sending WISHes for arbitrary views.
fn random_wisher(c: &mut ScenarioConfig, r: &mut ChaCha8Rng) {
    let pid = r.gen_range(0..c.n);
    byzantine(c, pid, Behavior::RandomWish { max_jump: r.gen_range(1..2000) });
}

fn good_case(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 1);
    let mut c = base(Protocol::PbftLight, seed);
    c.gst = 50;
    c.horizon = 900;
    c.start_times = (0..c.n).map(|_| r.gen_range(c.gst + 1..c.gst + 30)).collect();
    // Any process but the first leader may crash.
    c.faulty_set = vec![r.gen_range(1..c.n)];
    let gst = c.gst;
    broadcasts(&mut c, &mut r, 8, gst, 500);
    c.checks.liveness_grace = Some(300);
    c
}

fn pre_gst_chaos(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 2);
    let mut c = base(Protocol::PbftLight, seed);
    c.gst = 400;
    c.horizon = 2500;
    chaos(&mut c, &mut r);
    if r.gen_bool(0.5) {
        random_wisher(&mut c, &mut r);
    } else {
        c.faulty_set = vec![r.gen_range(0..c.n)];
    }
    let gst = c.gst;
    broadcasts(&mut c, &mut r, 6, 0, gst);
    broadcasts_more(&mut c, &mut r, 4, gst, gst + 400);
    c.checks.liveness_grace = Some(1200);
    c
}

/// Like `broadcasts`, continuing the id sequence.
fn broadcasts_more(c: &mut ScenarioConfig, r: &mut ChaCha8Rng, count: u64, from: Time, to: Time) {
    let correct: Vec<Pid> = c.correct().collect();
    let start = c.broadcasts.iter().map(|o| o.id).max().unwrap_or(0) + 1;
    for id in start..start + count {
        let pid = *correct.choose(r).expect("some correct process");
        c.broadcasts.push(ClientOp { pid, t: r.gen_range(from..to), id, payload: None });
    }
}

fn equivocating_leader(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 3);
    let mut c = base(Protocol::PbftLight, seed);
    c.gst = 300;
    c.horizon = 2500;
    chaos(&mut c, &mut r);
    let first = leader(1, c.n);
    byzantine(&mut c, first, Behavior::Equivocate);
    let until = c.gst + 300;
    broadcasts(&mut c, &mut r, 8, 0, until);
    c.checks.liveness_grace = Some(1200);
    c
}

fn view_change_stress(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 14);
    let mut c = base(Protocol::PbftLight, seed);
    c.gst = 1_200;
    c.horizon = 2_400;
    chaos(&mut c, &mut r);
    // Milder loss and delay and a short partition, so that values get
    // prepared often but views still change before they commit.
    for d in &mut c.fault_plan {
        match d {
            FaultDirective::Drop { permille, .. } => *permille = r.gen_range(150..350),
            FaultDirective::Delay { max } => *max = r.gen_range(c.delta..5 * c.delta),
            FaultDirective::Partition { until, .. } => *until = r.gen_range(100..300),
            _ => {}
        }
    }
    let first = leader(1, c.n);
    byzantine(&mut c, first, Behavior::Equivocate);
    // A value from every correct process every 60 ticks keeps many
    // positions prepared but uncommitted across view changes.
    let correct: Vec<Pid> = c.correct().collect();
    let mut id = 0;
    for t in (0..c.gst).step_by(60) {
        for &pid in &correct {
            id += 1;
            c.broadcasts.push(ClientOp { pid, t, id, payload: None });
        }
    }
    c
}

fn stale_cert(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 4);
    let mut c = base(Protocol::PbftLight, seed);
    c.gst = 400;
    c.horizon = 2500;
    chaos(&mut c, &mut r);
    let pid = r.gen_range(0..c.n);
    byzantine(&mut c, pid, Behavior::StaleCert);
    let until = c.gst + 300;
    broadcasts(&mut c, &mut r, 8, 0, until);
    c.checks.liveness_grace = Some(1200);
    c
}

fn crashed_leader(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 5);
    let mut c = base(Protocol::PbftRotation, seed);
    c.gst = 0;
    c.horizon = 1500;
    c.start_times = (0..c.n).map(|_| r.gen_range(0..10)).collect();
    c.init_dur_delivery = 80;
    c.init_dur_recovery = 80;
    // The leader of view 2, 3 or 4 crashes before starting.
    let v = r.gen_range(2..=4);
    c.faulty_set = vec![leader(v, c.n)];
    broadcasts(&mut c, &mut r, 10, 0, 600);
    c.checks.liveness_grace = Some(600);
    c
}

fn rotation_pre_gst(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 6);
    let mut c = base(Protocol::PbftRotation, seed);
    c.gst = 400;
    c.horizon = 2500;
    c.init_dur_delivery = 80;
    c.init_dur_recovery = 80;
    chaos(&mut c, &mut r);
    c.faulty_set = vec![r.gen_range(0..c.n)];
    let until = c.gst + 400;
    broadcasts(&mut c, &mut r, 10, 0, until);
    c.checks.liveness_grace = Some(1200);
    c
}

fn censorship(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 7);
    let mut c = base(Protocol::PbftRotation, seed);
    c.gst = 0;
    c.horizon = 2500;
    c.init_dur_delivery = 80;
    c.init_dur_recovery = 80;
    let pid = r.gen_range(0..c.n);
    c.faulty_set = vec![pid];
    broadcasts(&mut c, &mut r, 12, 0, 800);
    let ids = c.broadcasts.iter().map(|o| o.id).collect();
    c.fault_plan.push(FaultDirective::Byzantine { pid, behavior: Behavior::Censor { ids } });
    c.checks.liveness_grace = Some(1000);
    c
}

fn hotstuff_good(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 8);
    let mut c = base(Protocol::HotstuffLight, seed);
    c.gst = 0;
    c.horizon = 2000;
    c.start_times = (0..c.n).map(|_| r.gen_range(0..20)).collect();
    // Above max{5δ, T+4δ} for δ = 10, T = 30.
    c.init_dur_delivery = 90;
    c.init_dur_recovery = 80;
    c.faulty_set = vec![r.gen_range(0..c.n)];
    broadcasts(&mut c, &mut r, 10, 0, 800);
    c.checks.liveness_grace = Some(800);
    c
}

fn hotstuff_byzantine(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 9);
    let mut c = base(Protocol::HotstuffLight, seed);
    c.gst = 300;
    c.horizon = 2500;
    c.init_dur_delivery = 90;
    c.init_dur_recovery = 80;
    chaos(&mut c, &mut r);
    let pid = r.gen_range(0..c.n);
    let behavior = if seed.is_multiple_of(2) { Behavior::Equivocate } else { Behavior::StaleCert };
    byzantine(&mut c, pid, behavior);
    let until = c.gst + 400;
    broadcasts(&mut c, &mut r, 10, 0, until);
    c.checks.liveness_grace = Some(1500);
    c
}

fn toy_client(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 10);
    let mut c = base(Protocol::ToyClient, seed);
    c.gst = 200;
    c.horizon = c.gst + 200 * (c.tau + 2 * c.delta);
    chaos(&mut c, &mut r);
    random_wisher(&mut c, &mut r);
    c.checks.target_view = Some(100);
    c
}

fn consensus_sync(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 11);
    let mut c = base(Protocol::ConsensusSync, seed);
    c.gst = 200;
    c.horizon = 2500;
    chaos(&mut c, &mut r);
    random_wisher(&mut c, &mut r);
    c
}

fn sync_chaos(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 12);
    let protocols = [
        Protocol::ToyClient,
        Protocol::ConsensusSync,
        Protocol::PbftLight,
        Protocol::PbftRotation,
        Protocol::HotstuffLight,
    ];
    let mut c = base(protocols[(seed % 5) as usize], seed);
    c.latency_mode = r.gen_bool(0.5);
    c.gst = r.gen_range(100..500);
    c.horizon = c.gst + 1500;
    chaos(&mut c, &mut r);
    random_wisher(&mut c, &mut r);
    if c.protocol.is_smr() {
        let until = c.gst + 500;
        broadcasts(&mut c, &mut r, 6, 0, until);
    }
    c
}

fn wish_spam(seed: u64) -> ScenarioConfig {
    let mut r = rng(seed, 13);
    let mut c = base(Protocol::PbftLight, seed);
    // Asynchronous throughout, so views keep timing out and messages for
    // future views keep arriving early.
    c.horizon = 150_000;
    c.gst = c.horizon - 1;
    c.fault_plan.push(FaultDirective::Drop { permille: 200, from: None, to: None });
    c.fault_plan.push(FaultDirective::Delay { max: 150 });
    let pid = r.gen_range(0..c.n);
    byzantine(&mut c, pid, Behavior::WishSpam { step: 1_000 });
    let until = c.horizon;
    broadcasts(&mut c, &mut r, 400, 0, until);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_is_valid_for_many_seeds() {
        for e in catalog() {
            for seed in 0..50 {
                let c = e.config(seed);
                c.validate().unwrap_or_else(|err| panic!("{} seed {seed}: {err}", e.name));
                assert_eq!(c.name.as_deref(), Some(e.name));
            }
        }
    }

    #[test]
    fn named_entries_exist() {
        for name in ["crashed-leader", "equivocating-leader", "pre-gst-chaos", "good-case", "toy-client", "censorship"] {
            assert!(find(name).is_some(), "{name}");
        }
    }

    #[test]
    fn good_case_premises() {
        for seed in 0..20 {
            let c = find("good-case").unwrap().config(seed);
            assert!(c.start_times.iter().all(|&t| t > c.gst));
            assert!(!c.is_faulty(leader(1, c.n)));
        }
    }

    #[test]
    fn crashed_leader_premises() {
        let c = find("crashed-leader").unwrap().config(3);
        let p = c.faulty_set[0];
        assert_eq!(c.behavior(p), Some(Behavior::Crash { at: 0 }));
    }

    #[test]
    fn configs_are_seed_deterministic() {
        for e in catalog() {
            assert_eq!(e.config(9), e.config(9));
        }
    }
}
