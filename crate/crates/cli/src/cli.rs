//! Argument parsing and subcommands.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use wishsync_core::config::Protocol;
use wishsync_core::{ScenarioConfig, Time, Trace};

use crate::catalog;
use crate::runner;

/// All checks passed (or were inapplicable without --strict-premises).
pub const EXIT_OK: i32 = 0;
/// Some check failed.
pub const EXIT_FAIL: i32 = 1;
/// Bad arguments, config or input file.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "wishsync", version, about = "Simulate and check view-synchronizer scenarios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// List catalog scenarios, or print one as a config file.
    Catalog {
        #[arg(long)]
        show: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate one scenario and write its trace.
    Run {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also check the trace and fail on violations.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        strict_premises: bool,
    },
    /// Check a trace file.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Config whose check parameters replace those in the trace header.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        strict_premises: bool,
    },
    /// Run and check a range of seeds.
    Sweep {
        #[command(flatten)]
        src: Source,
        /// Half-open seed range `a..b`.
        #[arg(long, value_parser = parse_range)]
        seeds: Range<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        strict_premises: bool,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Scenario config file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Catalog scenario name.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    horizon: Option<Time>,
}

impl Source {
    fn config(&self, seed: Option<u64>) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let mut c = read_config(path)?;
                if let Some(s) = seed {
                    c.seed = s;
                }
                c
            }
            (None, Some(name)) => {
                let entry = catalog::find(name).ok_or_else(|| anyhow!("unknown scenario `{name}`"))?;
                entry.config(seed.unwrap_or(0))
            }
            (None, None) => bail!("either --config or --scenario is required"),
        };
        if let Some(p) = self.protocol {
            cfg.protocol = p;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.parse().map_err(|e| format!("{a}: {e}"))?;
    let b: u64 = b.parse().map_err(|e| format!("{b}: {e}"))?;
    if a >= b {
        return Err(format!("empty range {s}"));
    }
    Ok(a..b)
}

fn read_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ScenarioConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    cfg.validate().with_context(|| format!("in {}", path.display()))?;
    Ok(cfg)
}

fn read_trace(path: &Path) -> anyhow::Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Trace::read_jsonl(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

fn write_trace(path: &Path, trace: &Trace) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_jsonl(BufWriter::new(f))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn verdict_code(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cmd {
        Cmd::Catalog { show: Some(name), seed } => {
            let entry = catalog::find(&name).ok_or_else(|| anyhow!("unknown scenario `{name}`"))?;
            writeln!(out, "{}", entry.config(seed).to_json_pretty())?;
            Ok(EXIT_OK)
        }
        Cmd::Catalog { show: None, .. } => {
            for e in catalog::catalog() {
                let proto = e.config(0).protocol.name();
                writeln!(out, "{:<20} {:<15} {}", e.name, proto, e.summary)?;
            }
            Ok(EXIT_OK)
        }
        Cmd::Run { src, seed, out: path, check, strict_premises } => {
            let cfg = src.config(seed)?;
            let trace = wishsync_core::run_scenario(&cfg)?;
            write_trace(&path, &trace)?;
            writeln!(out, "wrote {} events to {}", trace.events.len(), path.display())?;
            if !check {
                return Ok(EXIT_OK);
            }
            let report = runner::check_trace(&trace);
            write!(out, "{}", report.table())?;
            Ok(verdict_code(report.accepted(strict_premises)))
        }
        Cmd::Check { trace, config, json, strict_premises } => {
            let mut t = read_trace(&trace)?;
            if let Some(path) = config {
                let cfg = read_config(&path)?;
                let mut header = t.config().clone();
                header.checks = cfg.checks.clone();
                if header != cfg {
                    bail!("{} does not describe the run recorded in {}", path.display(), trace.display());
                }
                t.header.config = cfg;
            }
            let report = runner::check_trace(&t);
            write!(out, "{}", report.table())?;
            if let Some(p) = json {
                std::fs::write(&p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(verdict_code(report.accepted(strict_premises)))
        }
        Cmd::Sweep { src, seeds, csv, strict_premises } => {
            src.config(Some(seeds.start))?;
            let rows = runner::sweep(seeds, strict_premises, |s| src.config(Some(s)).expect("validated above"))?;
            let summaries: Vec<runner::Summary> = rows.iter().map(|(s, _)| s.clone()).collect();
            let failed: Vec<&runner::Summary> = summaries.iter().filter(|s| !s.passed).collect();
            for s in &failed {
                writeln!(out, "seed {} failed: {}", s.seed, if s.failed.is_empty() { "premises unmet" } else { &s.failed })?;
            }
            writeln!(out, "{} of {} seeds passed", summaries.len() - failed.len(), summaries.len())?;
            if let Some(p) = csv {
                let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                runner::write_csv(f, &summaries)?;
            }
            Ok(verdict_code(failed.is_empty()))
        }
    }
}
