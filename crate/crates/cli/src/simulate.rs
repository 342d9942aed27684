use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::info;

use ntnsim_core::dynamics::events::EventLog;
use ntnsim_core::dynamics::{run, RunOutput, RunSummary};
use ntnsim_core::feasibility::{link_records, read_link_csv, read_violation_csv, write_link_csv, write_violation_csv, FeasibilityReport, LinkRecord, Violation};
use ntnsim_core::placement::PlacementSpec;
use ntnsim_core::scenario::load_scenario;

use crate::{Format, EXIT_OK, EXIT_VIOLATIONS};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const VIOLATIONS_CSV: &str = "violations.csv";
pub const EVENTS_NDJSON: &str = "events.ndjson";
pub const EVENT_COUNTS_CSV: &str = "event_counts.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLACEMENT_JSON: &str = "placement.json";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Every artifact is written inside this directory.
    #[arg(long, default_value = "ntnsim-out")]
    pub out: PathBuf,
    /// Format of the per-step report series.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Replaces the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn open(dir: &Path, name: &str) -> anyhow::Result<BufReader<File>> {
    let p = dir.join(name);
    Ok(BufReader::new(File::open(&p).with_context(|| format!("opening {}", p.display()))?))
}

fn write_pretty<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes every artifact of a run into `dir`, which must exist.
pub fn write_artifacts(out: &RunOutput, dir: &Path, format: Format) -> anyhow::Result<()> {
    match format {
        Format::Csv => write_link_csv(&link_records(&out.reports), create(dir, REPORT_CSV)?)?,
        Format::Json => {
            let mut w = create(dir, REPORT_JSON)?;
            serde_json::to_writer(&mut w, &out.reports)?;
            w.flush()?;
        }
    }
    write_violation_csv(&out.violations(), create(dir, VIOLATIONS_CSV)?)?;
    out.events.write_ndjson(create(dir, EVENTS_NDJSON)?)?;
    out.events.write_counts_csv(create(dir, EVENT_COUNTS_CSV)?)?;
    write_pretty(dir, SUMMARY_JSON, &out.summary)?;
    write_pretty(dir, PLACEMENT_JSON, &out.spec)?;
    Ok(())
}

pub fn read_report_csv(dir: &Path) -> anyhow::Result<Vec<LinkRecord>> {
    Ok(read_link_csv(open(dir, REPORT_CSV)?)?)
}

pub fn read_report_json(dir: &Path) -> anyhow::Result<Vec<FeasibilityReport>> {
    Ok(serde_json::from_reader(open(dir, REPORT_JSON)?)?)
}

pub fn read_violations(dir: &Path) -> anyhow::Result<Vec<Violation>> {
    Ok(read_violation_csv(open(dir, VIOLATIONS_CSV)?)?)
}

pub fn read_events(dir: &Path) -> anyhow::Result<EventLog> {
    Ok(EventLog::read_ndjson(open(dir, EVENTS_NDJSON)?)?)
}

pub fn read_placement(dir: &Path) -> anyhow::Result<PlacementSpec> {
    Ok(serde_json::from_reader(open(dir, PLACEMENT_JSON)?)?)
}

pub fn read_summary(dir: &Path) -> anyhow::Result<RunSummary> {
    Ok(serde_json::from_reader(open(dir, SUMMARY_JSON)?)?)
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    let mut sc = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    let output = run(&sc)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_artifacts(&output, &a.out, a.format)?;
    let s = &output.summary;
    info!("artifacts written to {}", a.out.display());
    writeln!(
        stdout,
        "{}: option {} / {}, {} steps, availability {:.4}, {} violations -> {}",
        s.scenario,
        s.split,
        s.extension,
        s.steps,
        s.availability,
        output.reports.iter().map(|r| r.violations.len()).sum::<usize>(),
        if s.feasible { "feasible" } else { "infeasible" }
    )?;
    Ok(if s.feasible { EXIT_OK } else { EXIT_VIOLATIONS })
}
